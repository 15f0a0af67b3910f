#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qmlsec/cae.hpp"
#include "qmlsec/dataset.hpp"
#include "qmlsec/qnn.hpp"

namespace qmlsec::pipeline {

// End-to-end defect-classification experiment at desk scale: synthetic
// images -> 70:30 split -> CAE -> latent features -> QNN tasks.
struct PipelineConfig {
  int per_class = 700;
  std::uint64_t data_seed = 11;
  double train_fraction = 0.7;
  cae::CaeConfig cae_config;        // 32x32, latent 4
  cae::CaeTrainConfig cae_train;    // adam 0.001, 25 epochs, batch 50
  int samples_per_task = 2000;
  std::vector<int> three_classes = {0, 3, 5};
  int qnn_layers = 2;
  qnn::TrainConfig qnn_train;       // sce, adagrad 0.5, 10 epochs, batch 32
};

// Latent features for the full 6-class train/val image splits, plus the CAE
// that produced them.
struct LatentArtifacts {
  cae::CaeModel cae_model;
  std::vector<double> cae_history;
  data::FeatureDataset latent_train;
  data::FeatureDataset latent_val;
};

LatentArtifacts build_latent_artifacts(const PipelineConfig& config);

// Task-ready subset with labels remapped to 0..k-1 following `classes` order.
struct LatentTask {
  std::vector<int> classes;
  data::FeatureDataset train;
  data::FeatureDataset val;
};

// Draws round(samples * train_fraction) training and the remaining validation
// samples, stratified evenly over `classes` (earlier classes absorb any
// remainder). Throws if the artifacts cannot cover the quotas.
LatentTask make_task(const LatentArtifacts& artifacts,
                     const std::vector<int>& classes, int samples,
                     double train_fraction);

struct TaskRun {
  qnn::QnnModel model;
  qnn::TrainHistory history;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
};

TaskRun train_task(const LatentTask& task, int qnn_layers,
                   const qnn::TrainConfig& config);

struct PipelineResult {
  LatentArtifacts artifacts;
  TaskRun three_class;
  TaskRun six_class;
};

PipelineResult run_paper_pipeline(const PipelineConfig& config);

// Accuracy table in the shape of the published experiment summary.
std::string format_result_table(const PipelineResult& result);

}  // namespace qmlsec::pipeline

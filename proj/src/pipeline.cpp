#include "qmlsec/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "qmlsec/data.hpp"

namespace qmlsec::pipeline {

LatentArtifacts build_latent_artifacts(const PipelineConfig& config) {
  const data::LabeledImageSet images =
      data::generate_synthetic_defects(config.per_class, config.data_seed);
  data::LabeledImageSet img_train, img_val;
  data::split_dataset(images, config.train_fraction, config.data_seed,
                      img_train, img_val);

  LatentArtifacts artifacts;
  artifacts.cae_model = cae::cae_init(config.cae_config, config.cae_train.seed);
  artifacts.cae_history =
      cae::cae_train(artifacts.cae_model, img_train.images, config.cae_train);
  artifacts.latent_train = cae::cae_encode_dataset(artifacts.cae_model, img_train);
  artifacts.latent_val = cae::cae_encode_dataset(artifacts.cae_model, img_val);
  return artifacts;
}

namespace {

// stratified head of `source` restricted to `classes`, labels remapped to the
// position in `classes`
data::FeatureDataset take_stratified(const data::FeatureDataset& source,
                                     const std::vector<int>& classes,
                                     int total) {
  const int k = static_cast<int>(classes.size());
  std::vector<int> quota(k, total / k);
  for (int i = 0; i < total % k; ++i) quota[i] += 1;

  std::vector<int> picked;
  for (int c = 0; c < k; ++c) {
    int need = quota[c];
    for (int i = 0; i < source.size() && need > 0; ++i) {
      if (source.labels[i] == classes[c]) {
        picked.push_back(i);
        --need;
      }
    }
    if (need > 0) {
      throw std::runtime_error(
          "latent set too small for class " + data::class_name(classes[c]));
    }
  }
  std::sort(picked.begin(), picked.end());

  data::FeatureDataset out;
  out.features.resize(picked.size(), source.features.cols());
  out.labels.reserve(picked.size());
  for (std::size_t i = 0; i < picked.size(); ++i) {
    out.features.row(i) = source.features.row(picked[i]);
    const auto at =
        std::find(classes.begin(), classes.end(), source.labels[picked[i]]);
    out.labels.push_back(static_cast<int>(at - classes.begin()));
  }
  return out;
}

}  // namespace

LatentTask make_task(const LatentArtifacts& artifacts,
                     const std::vector<int>& classes, int samples,
                     double train_fraction) {
  if (classes.size() < 2) {
    throw std::invalid_argument("a task needs at least 2 classes");
  }
  if (samples < static_cast<int>(classes.size()) * 2) {
    throw std::invalid_argument("too few samples for the class count");
  }
  const int n_train =
      static_cast<int>(std::llround(samples * train_fraction));
  const int n_val = samples - n_train;

  LatentTask task;
  task.classes = classes;
  task.train = take_stratified(artifacts.latent_train, classes, n_train);
  task.val = take_stratified(artifacts.latent_val, classes, n_val);
  return task;
}

TaskRun train_task(const LatentTask& task, int qnn_layers,
                   const qnn::TrainConfig& config) {
  qnn::AnsatzSpec spec;
  spec.n_qubits = task.train.feature_dim();
  spec.layers = qnn_layers;

  TaskRun run;
  run.model = qnn::init_model(spec, qnn::HeadKind::Dense,
                              static_cast<int>(task.classes.size()),
                              config.seed);
  run.history = qnn::train_qnn(run.model, task.train, task.val, config);
  run.train_accuracy = qnn::evaluate_qnn(run.model, task.train).accuracy;
  run.val_accuracy = qnn::evaluate_qnn(run.model, task.val).accuracy;
  return run;
}

PipelineResult run_paper_pipeline(const PipelineConfig& config) {
  PipelineResult result;
  result.artifacts = build_latent_artifacts(config);

  std::vector<int> all_classes(data::kNumClasses);
  for (int c = 0; c < data::kNumClasses; ++c) all_classes[c] = c;

  const LatentTask three =
      make_task(result.artifacts, config.three_classes, config.samples_per_task,
                config.train_fraction);
  const LatentTask six =
      make_task(result.artifacts, all_classes, config.samples_per_task,
                config.train_fraction);

  result.three_class = train_task(three, config.qnn_layers, config.qnn_train);
  result.six_class = train_task(six, config.qnn_layers, config.qnn_train);
  return result;
}

std::string format_result_table(const PipelineResult& result) {
  char line[128];
  std::string table;
  table += "Task            Train Acc  Val Acc\n";
  std::snprintf(line, sizeof(line), "Defect 3-Class  %9.2f  %7.2f\n",
                result.three_class.train_accuracy,
                result.three_class.val_accuracy);
  table += line;
  std::snprintf(line, sizeof(line), "Defect 6-Class  %9.2f  %7.2f\n",
                result.six_class.train_accuracy, result.six_class.val_accuracy);
  table += line;
  return table;
}

}  // namespace qmlsec::pipeline

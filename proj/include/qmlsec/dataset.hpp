#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace qmlsec::data {

// Grayscale image, row y / col x, pixel values in [0, 1].
using Image = Eigen::MatrixXd;

enum class Provenance { Synthetic, Ingested };

struct LabeledImageSet {
  std::vector<Image> images;
  std::vector<int> labels;
  Provenance provenance = Provenance::Synthetic;

  int size() const { return static_cast<int>(labels.size()); }
};

// Row-per-sample feature matrix with integer class labels.
struct FeatureDataset {
  Eigen::MatrixXd features;  // n_samples x n_features
  std::vector<int> labels;   // size n_samples

  int size() const { return static_cast<int>(labels.size()); }
  int feature_dim() const { return static_cast<int>(features.cols()); }
};

// CSV with a header row `f1,...,fd,label`, one sample per line.
void save_feature_csv(const FeatureDataset& dataset, const std::string& path);
FeatureDataset load_feature_csv(const std::string& path);

// Stratified split: per class, the first ceil(fraction * count) samples go to
// train, the remainder to validation. Order within a class follows a seeded
// shuffle so repeated calls with the same seed agree exactly.
void split_features(const FeatureDataset& dataset, double train_fraction,
                    std::uint64_t seed, FeatureDataset& train,
                    FeatureDataset& val);

int class_count(const std::vector<int>& labels);

}  // namespace qmlsec::data

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "qmlsec/dataset.hpp"

namespace qmlsec::cae {

using data::Image;

// Stride-2 3x3 conv stack with a dense bottleneck:
//   conv(c1, relu) -> conv(c2, relu) -> flatten -> dense(latent)
//   dense(flatten) -> tconv(c1, relu) -> tconv(1, sigmoid)
// input_size must be divisible by 4 so the two stride-2 stages invert exactly.
struct CaeConfig {
  int input_size = 32;
  int c1 = 8;
  int c2 = 16;
  int latent_dim = 4;

  bool operator==(const CaeConfig&) const = default;
};

// Shared by forward and transposed convolutions; kernel(o, i) is the 3x3
// filter from input channel i to output channel o.
struct ConvLayer {
  int in_ch = 0;
  int out_ch = 0;
  std::vector<Eigen::Matrix3d> kernels;  // out_ch * in_ch, o-major
  Eigen::VectorXd bias;

  Eigen::Matrix3d& kernel(int o, int i) { return kernels[o * in_ch + i]; }
  const Eigen::Matrix3d& kernel(int o, int i) const {
    return kernels[o * in_ch + i];
  }
};

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;
};

struct CaeModel {
  CaeConfig config;
  ConvLayer conv1, conv2;
  DenseLayer enc, dec;
  ConvLayer tconv1, tconv2;
};

// He-uniform weights (limit sqrt(6 / fan_in)) from the seed, zero biases.
CaeModel cae_init(const CaeConfig& config, std::uint64_t seed);
int cae_parameter_count(const CaeConfig& config);

struct CaeOutput {
  Image reconstruction;
  Eigen::VectorXd latent;
};

CaeOutput cae_forward(const CaeModel& model, const Image& image);
Eigen::VectorXd cae_encode(const CaeModel& model, const Image& image);

// Flat parameter view in a fixed layer order, for optimizers and
// finite-difference probes.
Eigen::VectorXd cae_pack(const CaeModel& model);
void cae_unpack(const Eigen::VectorXd& packed, CaeModel& model);

// Mean over the batch of per-image mean squared pixel error.
double cae_batch_loss(const CaeModel& model, const std::vector<Image>& batch);

// Exact backpropagation of cae_batch_loss; returns the packed gradient.
Eigen::VectorXd cae_gradient(const CaeModel& model,
                             const std::vector<Image>& batch);

struct CaeTrainConfig {
  double learning_rate = 0.001;
  int epochs = 25;
  int batch_size = 50;
  std::uint64_t seed = 0;
};

// Adam with seeded shuffling; returns per-epoch mean training MSE.
std::vector<double> cae_train(CaeModel& model, const std::vector<Image>& images,
                              const CaeTrainConfig& config);

// Encoder-only pass preserving sample order and labels.
data::FeatureDataset cae_encode_dataset(const CaeModel& model,
                                        const data::LabeledImageSet& set);

void save_cae(const CaeModel& model, const std::string& path);
CaeModel load_cae(const std::string& path);

}  // namespace qmlsec::cae

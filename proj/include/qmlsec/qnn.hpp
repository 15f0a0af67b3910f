#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qmlsec/dataset.hpp"
#include "qmlsec/noise.hpp"
#include "qmlsec/sim.hpp"

namespace qmlsec::qnn {

// Min-max scaling of each feature column into [0, 2pi]. Statistics come from
// the training set; applying the scaler to unseen data clamps into range.
// A constant column maps to pi.
struct FeatureScaler {
  Eigen::VectorXd min;
  Eigen::VectorXd max;
};

FeatureScaler fit_scaler(const Eigen::MatrixXd& features);
Eigen::VectorXd apply_scaler(const FeatureScaler& scaler,
                             const Eigen::VectorXd& raw);
Eigen::MatrixXd apply_scaler(const FeatureScaler& scaler,
                             const Eigen::MatrixXd& raw);

struct AnsatzSpec {
  std::string family = "crx-ring";
  int n_qubits = 4;
  int layers = 2;

  bool operator==(const AnsatzSpec&) const = default;
};

std::vector<std::string> ansatz_families();
bool ansatz_registered(const std::string& family);

// One feature per qubit: H then RZ(f_i) on qubit i.
sim::Circuit build_encoder(const Eigen::VectorXd& features);

// Parametric template; every rotation carries its own param_index in circuit
// order. crx-ring: per layer RX, RZ on each qubit, then CRX entanglers around
// the ring q_i -> q_{i+1 mod n} (a 2-qubit ring keeps a single edge).
sim::Circuit build_ansatz(const AnsatzSpec& spec);
int ansatz_parameter_count(const AnsatzSpec& spec);

enum class HeadKind { Parity, SingleZ, Dense };

struct Head {
  HeadKind kind = HeadKind::Dense;
  int n_classes = 2;
  Eigen::MatrixXd weights;  // dense only: n_classes x n_qubits
  Eigen::VectorXd biases;   // dense only: n_classes
};

enum class LossKind { Mse, Bce, Sce };
enum class OptimizerKind { Adagrad, Adam, NelderMead };

std::string head_kind_name(HeadKind kind);
HeadKind head_kind_from_name(const std::string& name);
std::string loss_kind_name(LossKind kind);
LossKind loss_kind_from_name(const std::string& name);
std::string optimizer_kind_name(OptimizerKind kind);
OptimizerKind optimizer_kind_from_name(const std::string& name);

struct QnnModel {
  FeatureScaler scaler;
  AnsatzSpec ansatz;
  Eigen::VectorXd theta;
  Head head;
  std::uint64_t seed = 0;
};

// theta ~ U[0, 2pi), dense weights ~ U[-0.5, 0.5], biases zero. The scaler is
// left empty until training fits it.
QnnModel init_model(const AnsatzSpec& spec, HeadKind head, int n_classes,
                    std::uint64_t seed);

int model_class_count(const QnnModel& model);

// Quantities the head consumes, measured on the final state:
//   parity   -> 1 value, expectation of Z on every qubit jointly
//   single_z -> 1 value, <Z> of qubit 0
//   dense    -> n values, per-qubit <Z>
Eigen::VectorXd head_inputs(const sim::StateVector& state, HeadKind kind);
Eigen::VectorXd head_inputs(const sim::Distribution& dist, int n_qubits,
                            HeadKind kind);

// Head input vector -> head output (probability pair, scalar, or softmax).
Eigen::VectorXd head_output(const Head& head, const Eigen::VectorXd& inputs);

// Exact-expectation forward pass on scaled features.
Eigen::VectorXd forward(const QnnModel& model, const Eigen::VectorXd& features);

// Shot-based estimate of the same forward pass under a device noise model.
Eigen::VectorXd forward_noisy(const QnnModel& model,
                              const Eigen::VectorXd& features,
                              const noise::DeviceProfile& device,
                              std::int64_t shots, std::uint64_t seed);

// mse: scalar output vs +1 (class 0) / -1 (class 1).
// bce: 2-entry probability vector; sce: probability vector, log clamped 1e-12.
double compute_loss(const Eigen::VectorXd& output, int label, LossKind loss);

struct Gradient {
  Eigen::VectorXd theta;
  Eigen::MatrixXd head_weights;
  Eigen::VectorXd head_biases;
};

// Mean batch gradient. Rotation parameters use the parameter-shift rule
// (two evaluations at +-pi/2 per occurrence; controlled rotations need the
// four-term variant with shifts at +-pi/2 and +-3pi/2). Head parameters are
// differentiated analytically.
Gradient gradient_parameter_shift(const QnnModel& model,
                                  const Eigen::MatrixXd& features,
                                  const std::vector<int>& labels,
                                  LossKind loss);

// Central differences over every trainable parameter, step h.
Gradient gradient_finite_difference(const QnnModel& model,
                                    const Eigen::MatrixXd& features,
                                    const std::vector<int>& labels,
                                    LossKind loss, double h = 1e-5);

struct TrainConfig {
  LossKind loss = LossKind::Sce;
  OptimizerKind optimizer = OptimizerKind::Adagrad;
  double learning_rate = 0.5;
  int epochs = 10;
  int batch_size = 32;
  std::uint64_t seed = 0;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
};

using TrainHistory = std::vector<EpochStats>;

// Fits the scaler on the training features, then runs seeded mini-batch
// training in place. Validation metrics are recorded each epoch; an empty
// validation set records zeros.
TrainHistory train_qnn(QnnModel& model, const data::FeatureDataset& train,
                       const data::FeatureDataset& val,
                       const TrainConfig& config);

struct EvalResult {
  double accuracy = 0.0;
  Eigen::MatrixXi confusion;  // rows true class, cols predicted
};

int predict(const QnnModel& model, const Eigen::VectorXd& raw_features);
EvalResult evaluate_qnn(const QnnModel& model,
                        const data::FeatureDataset& dataset);

void save_model(const QnnModel& model, const std::string& path);
QnnModel load_model(const std::string& path);
void save_history_csv(const TrainHistory& history, const std::string& path);

}  // namespace qmlsec::qnn

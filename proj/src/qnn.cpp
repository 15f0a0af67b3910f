#include "qmlsec/qnn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "qmlsec/circuit_io.hpp"
#include "qmlsec/optim.hpp"
#include "qmlsec/rng.hpp"

namespace qmlsec::qnn {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kLogClamp = 1e-12;

using json = nlohmann::ordered_json;

}  // namespace

FeatureScaler fit_scaler(const Eigen::MatrixXd& features) {
  if (features.rows() == 0) {
    throw std::invalid_argument("fit_scaler: empty dataset");
  }
  FeatureScaler scaler;
  scaler.min = features.colwise().minCoeff();
  scaler.max = features.colwise().maxCoeff();
  return scaler;
}

Eigen::VectorXd apply_scaler(const FeatureScaler& scaler,
                             const Eigen::VectorXd& raw) {
  if (raw.size() != scaler.min.size()) {
    throw std::invalid_argument("apply_scaler: feature width mismatch");
  }
  Eigen::VectorXd out(raw.size());
  for (Eigen::Index i = 0; i < raw.size(); ++i) {
    const double span = scaler.max[i] - scaler.min[i];
    if (span <= 0.0) {
      out[i] = std::numbers::pi;
      continue;
    }
    const double t = (raw[i] - scaler.min[i]) / span;
    out[i] = kTwoPi * std::clamp(t, 0.0, 1.0);
  }
  return out;
}

Eigen::MatrixXd apply_scaler(const FeatureScaler& scaler,
                             const Eigen::MatrixXd& raw) {
  Eigen::MatrixXd out(raw.rows(), raw.cols());
  for (Eigen::Index r = 0; r < raw.rows(); ++r) {
    out.row(r) = apply_scaler(scaler, Eigen::VectorXd(raw.row(r))).transpose();
  }
  return out;
}

std::vector<std::string> ansatz_families() {
  return {"crx-ring", "ry-cnot-line"};
}

bool ansatz_registered(const std::string& family) {
  const auto names = ansatz_families();
  return std::find(names.begin(), names.end(), family) != names.end();
}

sim::Circuit build_encoder(const Eigen::VectorXd& features) {
  sim::Circuit circuit;
  circuit.n_qubits = static_cast<int>(features.size());
  for (int q = 0; q < circuit.n_qubits; ++q) {
    circuit.ops.push_back(sim::ops::h(q));
    circuit.ops.push_back(sim::ops::rz(q, features[q]));
  }
  return circuit;
}

static void check_spec(const AnsatzSpec& spec) {
  if (!ansatz_registered(spec.family)) {
    throw std::invalid_argument("unknown ansatz family: " + spec.family);
  }
  if (spec.n_qubits < 1 || spec.layers < 1) {
    throw std::invalid_argument("ansatz needs n_qubits >= 1 and layers >= 1");
  }
}

sim::Circuit build_ansatz(const AnsatzSpec& spec) {
  check_spec(spec);
  sim::Circuit circuit;
  circuit.n_qubits = spec.n_qubits;
  const int n = spec.n_qubits;
  int p = 0;
  if (spec.family == "crx-ring") {
    for (int layer = 0; layer < spec.layers; ++layer) {
      for (int q = 0; q < n; ++q) {
        circuit.ops.push_back(sim::ops::rx_param(q, p++));
        circuit.ops.push_back(sim::ops::rz_param(q, p++));
      }
      if (n == 2) {
        circuit.ops.push_back(sim::ops::crx_param(0, 1, p++));
      } else if (n >= 3) {
        for (int q = 0; q < n; ++q) {
          circuit.ops.push_back(sim::ops::crx_param(q, (q + 1) % n, p++));
        }
      }
    }
  } else {  // ry-cnot-line
    for (int layer = 0; layer < spec.layers; ++layer) {
      for (int q = 0; q < n; ++q) {
        circuit.ops.push_back(sim::ops::ry_param(q, p++));
      }
      for (int q = 0; q + 1 < n; ++q) {
        circuit.ops.push_back(sim::ops::cnot(q, q + 1));
      }
    }
  }
  return circuit;
}

int ansatz_parameter_count(const AnsatzSpec& spec) {
  check_spec(spec);
  const int n = spec.n_qubits;
  if (spec.family == "crx-ring") {
    int entanglers = 0;
    if (n == 2) entanglers = 1;
    if (n >= 3) entanglers = n;
    return spec.layers * (2 * n + entanglers);
  }
  return spec.layers * n;  // ry-cnot-line
}

std::string head_kind_name(HeadKind kind) {
  switch (kind) {
    case HeadKind::Parity: return "parity";
    case HeadKind::SingleZ: return "single_z";
    case HeadKind::Dense: return "dense";
  }
  throw std::invalid_argument("bad head kind");
}

HeadKind head_kind_from_name(const std::string& name) {
  if (name == "parity") return HeadKind::Parity;
  if (name == "single_z") return HeadKind::SingleZ;
  if (name == "dense") return HeadKind::Dense;
  throw std::invalid_argument("unknown head kind: " + name);
}

std::string loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::Mse: return "mse";
    case LossKind::Bce: return "bce";
    case LossKind::Sce: return "sce";
  }
  throw std::invalid_argument("bad loss kind");
}

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "mse") return LossKind::Mse;
  if (name == "bce") return LossKind::Bce;
  if (name == "sce") return LossKind::Sce;
  throw std::invalid_argument("unknown loss kind: " + name);
}

std::string optimizer_kind_name(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::Adagrad: return "adagrad";
    case OptimizerKind::Adam: return "adam";
    case OptimizerKind::NelderMead: return "nelder_mead";
  }
  throw std::invalid_argument("bad optimizer kind");
}

OptimizerKind optimizer_kind_from_name(const std::string& name) {
  if (name == "adagrad") return OptimizerKind::Adagrad;
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "nelder_mead") return OptimizerKind::NelderMead;
  throw std::invalid_argument("unknown optimizer kind: " + name);
}

QnnModel init_model(const AnsatzSpec& spec, HeadKind head, int n_classes,
                    std::uint64_t seed) {
  check_spec(spec);
  if (head == HeadKind::Dense) {
    if (n_classes < 2) {
      throw std::invalid_argument("dense head needs at least 2 classes");
    }
  } else if (n_classes != 2) {
    throw std::invalid_argument("parity and single_z heads are binary");
  }

  QnnModel model;
  model.ansatz = spec;
  model.seed = seed;
  model.head.kind = head;
  model.head.n_classes = n_classes;

  std::mt19937_64 rng(derive_seed(seed, 0));
  const int n_params = ansatz_parameter_count(spec);
  model.theta.resize(n_params);
  for (int i = 0; i < n_params; ++i) {
    model.theta[i] = uniform_range(rng, 0.0, kTwoPi);
  }
  if (head == HeadKind::Dense) {
    model.head.weights.resize(n_classes, spec.n_qubits);
    for (int c = 0; c < n_classes; ++c) {
      for (int q = 0; q < spec.n_qubits; ++q) {
        model.head.weights(c, q) = uniform_range(rng, -0.5, 0.5);
      }
    }
    model.head.biases = Eigen::VectorXd::Zero(n_classes);
  }
  return model;
}

int model_class_count(const QnnModel& model) {
  return model.head.kind == HeadKind::Dense ? model.head.n_classes : 2;
}

static std::vector<int> all_qubits(int n) {
  std::vector<int> qubits(n);
  std::iota(qubits.begin(), qubits.end(), 0);
  return qubits;
}

Eigen::VectorXd head_inputs(const sim::StateVector& state, HeadKind kind) {
  switch (kind) {
    case HeadKind::Parity: {
      const auto pair =
          sim::parity_probabilities(state, all_qubits(state.n_qubits));
      Eigen::VectorXd v(1);
      v[0] = pair.first - pair.second;
      return v;
    }
    case HeadKind::SingleZ: {
      Eigen::VectorXd v(1);
      v[0] = sim::expectation_z(state, 0);
      return v;
    }
    case HeadKind::Dense: {
      const sim::Distribution dist = sim::probabilities(state);
      return sim::z_expectations(dist, state.n_qubits);
    }
  }
  throw std::invalid_argument("bad head kind");
}

Eigen::VectorXd head_inputs(const sim::Distribution& dist, int n_qubits,
                            HeadKind kind) {
  switch (kind) {
    case HeadKind::Parity: {
      const auto pair =
          sim::parity_probabilities(dist, n_qubits, all_qubits(n_qubits));
      Eigen::VectorXd v(1);
      v[0] = pair.first - pair.second;
      return v;
    }
    case HeadKind::SingleZ: {
      Eigen::VectorXd v(1);
      v[0] = sim::z_expectations(dist, n_qubits)[0];
      return v;
    }
    case HeadKind::Dense:
      return sim::z_expectations(dist, n_qubits);
  }
  throw std::invalid_argument("bad head kind");
}

static Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double shift = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - shift).exp();
  return e / e.sum();
}

Eigen::VectorXd head_output(const Head& head, const Eigen::VectorXd& inputs) {
  switch (head.kind) {
    case HeadKind::Parity: {
      Eigen::VectorXd out(2);
      out[0] = 0.5 * (1.0 + inputs[0]);
      out[1] = 0.5 * (1.0 - inputs[0]);
      return out;
    }
    case HeadKind::SingleZ:
      return inputs;
    case HeadKind::Dense: {
      if (head.weights.cols() != inputs.size()) {
        throw std::invalid_argument("dense head width mismatch");
      }
      return softmax(head.weights * inputs + head.biases);
    }
  }
  throw std::invalid_argument("bad head kind");
}

static sim::Circuit full_circuit(const QnnModel& model,
                                 const Eigen::VectorXd& features) {
  if (features.size() != model.ansatz.n_qubits) {
    throw std::invalid_argument("feature count does not match qubit count");
  }
  sim::Circuit circuit = build_encoder(features);
  sim::Circuit ansatz =
      sim::bind_parameters(build_ansatz(model.ansatz), model.theta);
  circuit.ops.insert(circuit.ops.end(), ansatz.ops.begin(), ansatz.ops.end());
  return circuit;
}

Eigen::VectorXd forward(const QnnModel& model,
                        const Eigen::VectorXd& features) {
  const sim::StateVector state = sim::run_circuit(full_circuit(model, features));
  return head_output(model.head, head_inputs(state, model.head.kind));
}

Eigen::VectorXd forward_noisy(const QnnModel& model,
                              const Eigen::VectorXd& features,
                              const noise::DeviceProfile& device,
                              std::int64_t shots, std::uint64_t seed) {
  const sim::Circuit circuit = full_circuit(model, features);
  const auto counts = noise::run_noisy_counts(circuit, device, shots, seed);
  const sim::Distribution dist =
      sim::distribution_from_counts(counts, circuit.n_qubits);
  return head_output(model.head,
                     head_inputs(dist, circuit.n_qubits, model.head.kind));
}

double compute_loss(const Eigen::VectorXd& output, int label, LossKind loss) {
  switch (loss) {
    case LossKind::Mse: {
      if (output.size() != 1) {
        throw std::invalid_argument("mse expects a scalar output");
      }
      if (label != 0 && label != 1) {
        throw std::invalid_argument("mse label out of range");
      }
      const double target = label == 0 ? 1.0 : -1.0;
      const double d = output[0] - target;
      return d * d;
    }
    case LossKind::Bce: {
      if (output.size() != 2) {
        throw std::invalid_argument("bce expects a probability pair");
      }
      if (label != 0 && label != 1) {
        throw std::invalid_argument("bce label out of range");
      }
      return -std::log(std::max(output[label], kLogClamp));
    }
    case LossKind::Sce: {
      if (output.size() < 2) {
        throw std::invalid_argument("sce expects a probability vector");
      }
      if (label < 0 || label >= output.size()) {
        throw std::invalid_argument("sce label out of range");
      }
      return -std::log(std::max(output[label], kLogClamp));
    }
  }
  throw std::invalid_argument("bad loss kind");
}

namespace {

// dL/d(head inputs) plus analytic dense-head weight gradients, all evaluated
// at the unshifted circuit output.
struct LossChain {
  Eigen::VectorXd d_inputs;
  Eigen::MatrixXd d_weights;
  Eigen::VectorXd d_biases;
};

LossChain loss_chain(const Head& head, const Eigen::VectorXd& inputs,
                     int label, LossKind loss) {
  LossChain chain;
  switch (head.kind) {
    case HeadKind::SingleZ: {
      if (loss != LossKind::Mse) {
        throw std::invalid_argument("single_z head pairs with mse loss");
      }
      const double target = label == 0 ? 1.0 : -1.0;
      chain.d_inputs.resize(1);
      chain.d_inputs[0] = 2.0 * (inputs[0] - target);
      return chain;
    }
    case HeadKind::Parity: {
      if (loss == LossKind::Mse) {
        throw std::invalid_argument("parity head needs bce or sce loss");
      }
      if (label != 0 && label != 1) {
        throw std::invalid_argument("parity label out of range");
      }
      const double p_even = 0.5 * (1.0 + inputs[0]);
      const double p_odd = 0.5 * (1.0 - inputs[0]);
      chain.d_inputs.resize(1);
      chain.d_inputs[0] = label == 0 ? -0.5 / std::max(p_even, kLogClamp)
                                     : 0.5 / std::max(p_odd, kLogClamp);
      return chain;
    }
    case HeadKind::Dense: {
      if (loss == LossKind::Mse) {
        throw std::invalid_argument("dense head needs bce or sce loss");
      }
      if (loss == LossKind::Bce && head.n_classes != 2) {
        throw std::invalid_argument("bce needs a 2-class dense head");
      }
      if (label < 0 || label >= head.n_classes) {
        throw std::invalid_argument("dense label out of range");
      }
      const Eigen::VectorXd probs =
          softmax(head.weights * inputs + head.biases);
      Eigen::VectorXd delta = probs;  // d loss / d logits
      delta[label] -= 1.0;
      chain.d_inputs = head.weights.transpose() * delta;
      chain.d_weights = delta * inputs.transpose();
      chain.d_biases = delta;
      return chain;
    }
  }
  throw std::invalid_argument("bad head kind");
}

struct ParametricOp {
  int position = 0;  // index into the combined encoder+ansatz op list
  int param = 0;
  sim::GateKind kind = sim::GateKind::RX;
};

// Parameter-shift coefficients for controlled rotations, whose generator has
// eigenvalues {0, +-1}: f' = c1 [f(t+pi/2) - f(t-pi/2)]
//                          - c2 [f(t+3pi/2) - f(t-3pi/2)].
constexpr double kCrxC1 = (std::numbers::sqrt2 + 1.0) / (4.0 * std::numbers::sqrt2);
constexpr double kCrxC2 = (std::numbers::sqrt2 - 1.0) / (4.0 * std::numbers::sqrt2);

Eigen::VectorXd eval_inputs(sim::Circuit& work, HeadKind kind) {
  return head_inputs(sim::run_circuit(work), kind);
}

}  // namespace

Gradient gradient_parameter_shift(const QnnModel& model,
                                  const Eigen::MatrixXd& features,
                                  const std::vector<int>& labels,
                                  LossKind loss) {
  const int n_samples = static_cast<int>(labels.size());
  if (n_samples == 0 || features.rows() != n_samples) {
    throw std::invalid_argument("gradient needs a non-empty batch");
  }

  const sim::Circuit ansatz = build_ansatz(model.ansatz);
  std::vector<ParametricOp> parametric;
  for (int i = 0; i < static_cast<int>(ansatz.ops.size()); ++i) {
    if (ansatz.ops[i].param_index) {
      parametric.push_back({i, *ansatz.ops[i].param_index, ansatz.ops[i].kind});
    }
  }

  Gradient grad;
  grad.theta = Eigen::VectorXd::Zero(model.theta.size());
  if (model.head.kind == HeadKind::Dense) {
    grad.head_weights = Eigen::MatrixXd::Zero(model.head.weights.rows(),
                                              model.head.weights.cols());
    grad.head_biases = Eigen::VectorXd::Zero(model.head.biases.size());
  }

  for (int s = 0; s < n_samples; ++s) {
    sim::Circuit work = full_circuit(model, features.row(s).transpose());
    const int offset =
        static_cast<int>(work.ops.size() - ansatz.ops.size());

    const Eigen::VectorXd inputs = eval_inputs(work, model.head.kind);
    const LossChain chain =
        loss_chain(model.head, inputs, labels[s], loss);

    for (const ParametricOp& op : parametric) {
      sim::GateOp& gate = work.ops[offset + op.position];
      const double base = *gate.angle;
      Eigen::VectorXd d_in;
      if (op.kind == sim::GateKind::CRX) {
        gate.angle = base + std::numbers::pi / 2.0;
        const Eigen::VectorXd p1 = eval_inputs(work, model.head.kind);
        gate.angle = base - std::numbers::pi / 2.0;
        const Eigen::VectorXd m1 = eval_inputs(work, model.head.kind);
        gate.angle = base + 3.0 * std::numbers::pi / 2.0;
        const Eigen::VectorXd p3 = eval_inputs(work, model.head.kind);
        gate.angle = base - 3.0 * std::numbers::pi / 2.0;
        const Eigen::VectorXd m3 = eval_inputs(work, model.head.kind);
        d_in = kCrxC1 * (p1 - m1) - kCrxC2 * (p3 - m3);
      } else {
        gate.angle = base + std::numbers::pi / 2.0;
        const Eigen::VectorXd plus = eval_inputs(work, model.head.kind);
        gate.angle = base - std::numbers::pi / 2.0;
        const Eigen::VectorXd minus = eval_inputs(work, model.head.kind);
        d_in = 0.5 * (plus - minus);
      }
      gate.angle = base;
      grad.theta[op.param] += chain.d_inputs.dot(d_in);
    }

    if (model.head.kind == HeadKind::Dense) {
      grad.head_weights += chain.d_weights;
      grad.head_biases += chain.d_biases;
    }
  }

  grad.theta /= n_samples;
  if (model.head.kind == HeadKind::Dense) {
    grad.head_weights /= n_samples;
    grad.head_biases /= n_samples;
  }
  return grad;
}

static double batch_loss(const QnnModel& model, const Eigen::MatrixXd& features,
                         const std::vector<int>& labels, LossKind loss) {
  double total = 0.0;
  for (int s = 0; s < static_cast<int>(labels.size()); ++s) {
    const Eigen::VectorXd out =
        forward(model, features.row(s).transpose());
    total += compute_loss(out, labels[s], loss);
  }
  return total / static_cast<double>(labels.size());
}

Gradient gradient_finite_difference(const QnnModel& model,
                                    const Eigen::MatrixXd& features,
                                    const std::vector<int>& labels,
                                    LossKind loss, double h) {
  if (h <= 0.0) {
    throw std::invalid_argument("finite difference step must be positive");
  }
  if (labels.empty() || features.rows() != static_cast<int>(labels.size())) {
    throw std::invalid_argument("gradient needs a non-empty batch");
  }

  QnnModel probe = model;
  Gradient grad;
  grad.theta = Eigen::VectorXd::Zero(model.theta.size());

  for (Eigen::Index k = 0; k < model.theta.size(); ++k) {
    probe.theta[k] = model.theta[k] + h;
    const double up = batch_loss(probe, features, labels, loss);
    probe.theta[k] = model.theta[k] - h;
    const double down = batch_loss(probe, features, labels, loss);
    probe.theta[k] = model.theta[k];
    grad.theta[k] = (up - down) / (2.0 * h);
  }

  if (model.head.kind == HeadKind::Dense) {
    grad.head_weights = Eigen::MatrixXd::Zero(model.head.weights.rows(),
                                              model.head.weights.cols());
    grad.head_biases = Eigen::VectorXd::Zero(model.head.biases.size());
    for (Eigen::Index r = 0; r < model.head.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < model.head.weights.cols(); ++c) {
        probe.head.weights(r, c) = model.head.weights(r, c) + h;
        const double up = batch_loss(probe, features, labels, loss);
        probe.head.weights(r, c) = model.head.weights(r, c) - h;
        const double down = batch_loss(probe, features, labels, loss);
        probe.head.weights(r, c) = model.head.weights(r, c);
        grad.head_weights(r, c) = (up - down) / (2.0 * h);
      }
    }
    for (Eigen::Index b = 0; b < model.head.biases.size(); ++b) {
      probe.head.biases[b] = model.head.biases[b] + h;
      const double up = batch_loss(probe, features, labels, loss);
      probe.head.biases[b] = model.head.biases[b] - h;
      const double down = batch_loss(probe, features, labels, loss);
      probe.head.biases[b] = model.head.biases[b];
      grad.head_biases[b] = (up - down) / (2.0 * h);
    }
  }
  return grad;
}

namespace {

int packed_size(const QnnModel& model) {
  int size = static_cast<int>(model.theta.size());
  if (model.head.kind == HeadKind::Dense) {
    size += static_cast<int>(model.head.weights.size() +
                             model.head.biases.size());
  }
  return size;
}

Eigen::VectorXd pack_params(const QnnModel& model) {
  Eigen::VectorXd packed(packed_size(model));
  Eigen::Index at = 0;
  packed.head(model.theta.size()) = model.theta;
  at += model.theta.size();
  if (model.head.kind == HeadKind::Dense) {
    for (Eigen::Index r = 0; r < model.head.weights.rows(); ++r) {
      packed.segment(at, model.head.weights.cols()) =
          model.head.weights.row(r).transpose();
      at += model.head.weights.cols();
    }
    packed.segment(at, model.head.biases.size()) = model.head.biases;
  }
  return packed;
}

void unpack_params(const Eigen::VectorXd& packed, QnnModel& model) {
  Eigen::Index at = 0;
  model.theta = packed.head(model.theta.size());
  at += model.theta.size();
  if (model.head.kind == HeadKind::Dense) {
    for (Eigen::Index r = 0; r < model.head.weights.rows(); ++r) {
      model.head.weights.row(r) =
          packed.segment(at, model.head.weights.cols()).transpose();
      at += model.head.weights.cols();
    }
    model.head.biases = packed.segment(at, model.head.biases.size());
  }
}

Eigen::VectorXd pack_gradient(const QnnModel& model, const Gradient& grad) {
  Eigen::VectorXd packed(packed_size(model));
  Eigen::Index at = 0;
  packed.head(grad.theta.size()) = grad.theta;
  at += grad.theta.size();
  if (model.head.kind == HeadKind::Dense) {
    for (Eigen::Index r = 0; r < grad.head_weights.rows(); ++r) {
      packed.segment(at, grad.head_weights.cols()) =
          grad.head_weights.row(r).transpose();
      at += grad.head_weights.cols();
    }
    packed.segment(at, grad.head_biases.size()) = grad.head_biases;
  }
  return packed;
}

int predict_from_output(const Head& head, const Eigen::VectorXd& output) {
  switch (head.kind) {
    case HeadKind::SingleZ:
      return output[0] >= 0.0 ? 0 : 1;
    case HeadKind::Parity:
      return output[0] >= 0.5 ? 0 : 1;
    case HeadKind::Dense: {
      int best = 0;
      for (Eigen::Index i = 1; i < output.size(); ++i) {
        if (output[i] > output[best]) best = static_cast<int>(i);
      }
      return best;
    }
  }
  throw std::invalid_argument("bad head kind");
}

// loss and accuracy over already-scaled features
std::pair<double, double> scaled_metrics(const QnnModel& model,
                                         const Eigen::MatrixXd& features,
                                         const std::vector<int>& labels,
                                         LossKind loss) {
  if (labels.empty()) return {0.0, 0.0};
  double total = 0.0;
  int hits = 0;
  for (int s = 0; s < static_cast<int>(labels.size()); ++s) {
    const Eigen::VectorXd out = forward(model, features.row(s).transpose());
    total += compute_loss(out, labels[s], loss);
    if (predict_from_output(model.head, out) == labels[s]) ++hits;
  }
  const double n = static_cast<double>(labels.size());
  return {total / n, hits / n};
}

}  // namespace

TrainHistory train_qnn(QnnModel& model, const data::FeatureDataset& train,
                       const data::FeatureDataset& val,
                       const TrainConfig& config) {
  if (train.size() == 0) {
    throw std::invalid_argument("train_qnn: empty training set");
  }
  if (train.feature_dim() != model.ansatz.n_qubits) {
    throw std::invalid_argument("train_qnn: feature width mismatch");
  }
  if (config.epochs < 1 || config.batch_size < 1) {
    throw std::invalid_argument("train_qnn: epochs and batch_size must be >= 1");
  }
  if (config.learning_rate < 0.0) {
    throw std::invalid_argument("train_qnn: negative learning rate");
  }
  const int n_classes = model_class_count(model);
  for (int label : train.labels) {
    if (label < 0 || label >= n_classes) {
      throw std::invalid_argument("train_qnn: label out of range");
    }
  }

  model.scaler = fit_scaler(train.features);
  const Eigen::MatrixXd x_train = apply_scaler(model.scaler, train.features);
  const Eigen::MatrixXd x_val =
      val.size() > 0 ? apply_scaler(model.scaler, val.features)
                     : Eigen::MatrixXd();

  const int n = train.size();
  const int n_batches = (n + config.batch_size - 1) / config.batch_size;

  AdagradState adagrad;
  AdamState adam;
  std::vector<int> order(n);

  TrainHistory history;
  history.reserve(config.epochs);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::mt19937_64 rng(derive_seed(config.seed, epoch));
    for (int i = 0; i < n; ++i) order[i] = i;
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(uniform_int(rng, 0, i));
      std::swap(order[i], order[j]);
    }

    if (config.optimizer == OptimizerKind::NelderMead) {
      QnnModel probe = model;
      NelderMeadOptions options;
      options.max_iterations = n_batches;
      options.tolerance = 1e-10;
      const auto objective = [&](const Eigen::VectorXd& packed) {
        unpack_params(packed, probe);
        return batch_loss(probe, x_train, train.labels, config.loss);
      };
      const NelderMeadResult result =
          nelder_mead_minimize(objective, pack_params(model), options);
      unpack_params(result.x, model);
    } else {
      for (int b = 0; b < n_batches; ++b) {
        const int begin = b * config.batch_size;
        const int end = std::min(n, begin + config.batch_size);
        Eigen::MatrixXd batch(end - begin, train.feature_dim());
        std::vector<int> labels(end - begin);
        for (int i = begin; i < end; ++i) {
          batch.row(i - begin) = x_train.row(order[i]);
          labels[i - begin] = train.labels[order[i]];
        }
        const Gradient grad =
            gradient_parameter_shift(model, batch, labels, config.loss);
        Eigen::VectorXd packed = pack_params(model);
        const Eigen::VectorXd packed_grad = pack_gradient(model, grad);
        if (config.optimizer == OptimizerKind::Adagrad) {
          adagrad_step(packed, packed_grad, adagrad, config.learning_rate);
        } else {
          adam_step(packed, packed_grad, adam, config.learning_rate);
        }
        unpack_params(packed, model);
      }
    }

    EpochStats stats;
    stats.epoch = epoch + 1;
    std::tie(stats.train_loss, stats.train_acc) =
        scaled_metrics(model, x_train, train.labels, config.loss);
    if (val.size() > 0) {
      std::tie(stats.val_loss, stats.val_acc) =
          scaled_metrics(model, x_val, val.labels, config.loss);
    }
    history.push_back(stats);
  }
  return history;
}

int predict(const QnnModel& model, const Eigen::VectorXd& raw_features) {
  const Eigen::VectorXd scaled = apply_scaler(model.scaler, raw_features);
  return predict_from_output(model.head, forward(model, scaled));
}

EvalResult evaluate_qnn(const QnnModel& model,
                        const data::FeatureDataset& dataset) {
  if (dataset.size() == 0) {
    throw std::invalid_argument("evaluate_qnn: empty dataset");
  }
  const int n_classes = model_class_count(model);
  EvalResult result;
  result.confusion = Eigen::MatrixXi::Zero(n_classes, n_classes);
  int hits = 0;
  for (int s = 0; s < dataset.size(); ++s) {
    const int label = dataset.labels[s];
    if (label < 0 || label >= n_classes) {
      throw std::invalid_argument("evaluate_qnn: label out of range");
    }
    const int guess =
        predict(model, dataset.features.row(s).transpose());
    result.confusion(label, guess) += 1;
    if (guess == label) ++hits;
  }
  result.accuracy = hits / static_cast<double>(dataset.size());
  return result;
}

static json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

static Eigen::VectorXd vector_from_json(const json& arr) {
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v[i] = arr[i].get<double>();
  return v;
}

void save_model(const QnnModel& model, const std::string& path) {
  json doc;
  doc["ansatz"] = {{"family", model.ansatz.family},
                   {"n_qubits", model.ansatz.n_qubits},
                   {"layers", model.ansatz.layers}};
  doc["seed"] = model.seed;
  doc["scaler"] = {{"min", vector_to_json(model.scaler.min)},
                   {"max", vector_to_json(model.scaler.max)}};
  doc["theta"] = vector_to_json(model.theta);
  json head;
  head["kind"] = head_kind_name(model.head.kind);
  head["n_classes"] = model.head.n_classes;
  if (model.head.kind == HeadKind::Dense) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < model.head.weights.rows(); ++r) {
      rows.push_back(vector_to_json(model.head.weights.row(r).transpose()));
    }
    head["weights"] = rows;
    head["biases"] = vector_to_json(model.head.biases);
  }
  doc["head"] = head;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  out << doc.dump(2) << "\n";
}

QnnModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read model file: " + path);
  json doc = json::parse(in);

  QnnModel model;
  model.ansatz.family = doc.at("ansatz").at("family").get<std::string>();
  model.ansatz.n_qubits = doc.at("ansatz").at("n_qubits").get<int>();
  model.ansatz.layers = doc.at("ansatz").at("layers").get<int>();
  check_spec(model.ansatz);
  model.seed = doc.at("seed").get<std::uint64_t>();
  model.scaler.min = vector_from_json(doc.at("scaler").at("min"));
  model.scaler.max = vector_from_json(doc.at("scaler").at("max"));
  model.theta = vector_from_json(doc.at("theta"));
  if (model.theta.size() != ansatz_parameter_count(model.ansatz)) {
    throw std::runtime_error("model file theta length mismatch");
  }

  const json& head = doc.at("head");
  model.head.kind = head_kind_from_name(head.at("kind").get<std::string>());
  model.head.n_classes = head.at("n_classes").get<int>();
  if (model.head.kind == HeadKind::Dense) {
    const json& rows = head.at("weights");
    model.head.weights.resize(rows.size(), model.ansatz.n_qubits);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const Eigen::VectorXd row = vector_from_json(rows[r]);
      if (row.size() != model.ansatz.n_qubits) {
        throw std::runtime_error("model file weight row length mismatch");
      }
      model.head.weights.row(r) = row.transpose();
    }
    model.head.biases = vector_from_json(head.at("biases"));
    if (model.head.weights.rows() != model.head.n_classes ||
        model.head.biases.size() != model.head.n_classes) {
      throw std::runtime_error("model file head shape mismatch");
    }
  }
  return model;
}

void save_history_csv(const TrainHistory& history, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write history file: " + path);
  out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
  for (const EpochStats& row : history) {
    out << row.epoch << "," << sim::format_double(row.train_loss) << ","
        << sim::format_double(row.train_acc) << ","
        << sim::format_double(row.val_loss) << ","
        << sim::format_double(row.val_acc) << "\n";
  }
}

}  // namespace qmlsec::qnn

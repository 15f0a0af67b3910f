#include "qmlsec/sim.hpp"

#include "qmlsec/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace qmlsec::sim {

namespace {

constexpr Complex kI{0.0, 1.0};

std::string gate_msg(const GateOp& gate, const std::string& what) {
  return std::string(to_string(gate.kind)) + ": " + what;
}

}  // namespace

std::string_view to_string(GateKind kind) {
  switch (kind) {
    case GateKind::X: return "X";
    case GateKind::Y: return "Y";
    case GateKind::Z: return "Z";
    case GateKind::H: return "H";
    case GateKind::RX: return "RX";
    case GateKind::RY: return "RY";
    case GateKind::RZ: return "RZ";
    case GateKind::CNOT: return "CNOT";
    case GateKind::CZ: return "CZ";
    case GateKind::CRX: return "CRX";
    case GateKind::SWAP: return "SWAP";
    case GateKind::ZZ: return "ZZ";
    case GateKind::DELAY: return "DELAY";
  }
  return "?";
}

std::optional<GateKind> gate_kind_from_string(std::string_view name) {
  static const std::vector<GateKind> kinds = {
      GateKind::X,    GateKind::Y,  GateKind::Z,   GateKind::H,
      GateKind::RX,   GateKind::RY, GateKind::RZ,  GateKind::CNOT,
      GateKind::CZ,   GateKind::CRX, GateKind::SWAP, GateKind::ZZ,
      GateKind::DELAY};
  for (GateKind k : kinds) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

int gate_arity(GateKind kind) {
  switch (kind) {
    case GateKind::CNOT:
    case GateKind::CZ:
    case GateKind::CRX:
    case GateKind::SWAP:
    case GateKind::ZZ:
      return 2;
    default:
      return 1;
  }
}

bool is_rotation(GateKind kind) {
  switch (kind) {
    case GateKind::RX:
    case GateKind::RY:
    case GateKind::RZ:
    case GateKind::CRX:
    case GateKind::ZZ:
      return true;
    default:
      return false;
  }
}

namespace ops {
GateOp x(int q) { return {GateKind::X, {q}, {}, {}, {}}; }
GateOp y(int q) { return {GateKind::Y, {q}, {}, {}, {}}; }
GateOp z(int q) { return {GateKind::Z, {q}, {}, {}, {}}; }
GateOp h(int q) { return {GateKind::H, {q}, {}, {}, {}}; }
GateOp rx(int q, double angle) { return {GateKind::RX, {q}, angle, {}, {}}; }
GateOp ry(int q, double angle) { return {GateKind::RY, {q}, angle, {}, {}}; }
GateOp rz(int q, double angle) { return {GateKind::RZ, {q}, angle, {}, {}}; }
GateOp rx_param(int q, int p) { return {GateKind::RX, {q}, {}, p, {}}; }
GateOp ry_param(int q, int p) { return {GateKind::RY, {q}, {}, p, {}}; }
GateOp rz_param(int q, int p) { return {GateKind::RZ, {q}, {}, p, {}}; }
GateOp cnot(int c, int t) { return {GateKind::CNOT, {c, t}, {}, {}, {}}; }
GateOp cz(int a, int b) { return {GateKind::CZ, {a, b}, {}, {}, {}}; }
GateOp crx(int c, int t, double angle) {
  return {GateKind::CRX, {c, t}, angle, {}, {}};
}
GateOp crx_param(int c, int t, int p) {
  return {GateKind::CRX, {c, t}, {}, p, {}};
}
GateOp swap(int a, int b) { return {GateKind::SWAP, {a, b}, {}, {}, {}}; }
GateOp zz(int a, int b, double angle) {
  return {GateKind::ZZ, {a, b}, angle, {}, {}};
}
GateOp zz_param(int a, int b, int p) {
  return {GateKind::ZZ, {a, b}, {}, p, {}};
}
GateOp delay(int q, double duration) {
  return {GateKind::DELAY, {q}, {}, {}, duration};
}
}  // namespace ops

void validate(const GateOp& gate, int n_qubits) {
  const int arity = gate_arity(gate.kind);
  if (static_cast<int>(gate.targets.size()) != arity) {
    throw std::invalid_argument(
        gate_msg(gate, "expected " + std::to_string(arity) + " target(s), got " +
                           std::to_string(gate.targets.size())));
  }
  for (int q : gate.targets) {
    if (q < 0 || q >= n_qubits) {
      throw std::invalid_argument(
          gate_msg(gate, "target " + std::to_string(q) + " out of range for " +
                             std::to_string(n_qubits) + " qubit(s)"));
    }
  }
  if (arity == 2 && gate.targets[0] == gate.targets[1]) {
    throw std::invalid_argument(gate_msg(gate, "targets must be distinct"));
  }
  if (is_rotation(gate.kind)) {
    if (gate.angle.has_value() == gate.param_index.has_value()) {
      throw std::invalid_argument(
          gate_msg(gate, "rotation needs exactly one of angle or param"));
    }
    if (gate.param_index && *gate.param_index < 0) {
      throw std::invalid_argument(gate_msg(gate, "negative param index"));
    }
  } else if (gate.angle || gate.param_index) {
    throw std::invalid_argument(
        gate_msg(gate, "non-rotation gate cannot carry angle or param"));
  }
}

void validate(const Circuit& circuit) {
  if (circuit.n_qubits < 1) {
    throw std::invalid_argument("circuit needs at least 1 qubit");
  }
  if (circuit.n_qubits > kMaxQubits) {
    throw std::invalid_argument("circuit exceeds the " +
                                std::to_string(kMaxQubits) +
                                "-qubit dense statevector cap");
  }
  for (const GateOp& gate : circuit.ops) validate(gate, circuit.n_qubits);
}

int parameter_count(const Circuit& circuit) {
  int count = 0;
  for (const GateOp& gate : circuit.ops) {
    if (gate.param_index) count = std::max(count, *gate.param_index + 1);
  }
  return count;
}

Circuit bind_parameters(const Circuit& circuit,
                        Eigen::Ref<const Eigen::VectorXd> theta) {
  if (theta.size() < parameter_count(circuit)) {
    throw std::invalid_argument("theta shorter than circuit parameter count");
  }
  Circuit bound = circuit;
  for (GateOp& gate : bound.ops) {
    if (gate.param_index) {
      gate.angle = theta[*gate.param_index];
      gate.param_index.reset();
    }
  }
  return bound;
}

StateVector zero_state(int n_qubits) {
  if (n_qubits < 1 || n_qubits > kMaxQubits) {
    throw std::invalid_argument("qubit count must be in [1, " +
                                std::to_string(kMaxQubits) + "]");
  }
  StateVector state;
  state.n_qubits = n_qubits;
  state.amplitudes = Eigen::VectorXcd::Zero(Eigen::Index{1} << n_qubits);
  state.amplitudes[0] = 1.0;
  return state;
}

double norm_error(const StateVector& state) {
  return std::abs(state.amplitudes.squaredNorm() - 1.0);
}

namespace {

Eigen::Matrix2cd single_qubit_matrix(const GateOp& gate) {
  Eigen::Matrix2cd u;
  const double half = gate.angle.value_or(0.0) / 2.0;
  switch (gate.kind) {
    case GateKind::X:
      u << 0, 1, 1, 0;
      break;
    case GateKind::Y:
      u << 0, -kI, kI, 0;
      break;
    case GateKind::Z:
      u << 1, 0, 0, -1;
      break;
    case GateKind::H:
      u << 1, 1, 1, -1;
      u *= M_SQRT1_2;
      break;
    case GateKind::RX:
      u << std::cos(half), -kI * std::sin(half),
           -kI * std::sin(half), std::cos(half);
      break;
    case GateKind::RY:
      u << std::cos(half), -std::sin(half),
           std::sin(half), std::cos(half);
      break;
    case GateKind::RZ:
      u << std::exp(-kI * half), 0, 0, std::exp(kI * half);
      break;
    default:
      throw std::invalid_argument(gate_msg(gate, "not a single-qubit unitary"));
  }
  return u;
}

// 4x4 in the |targets[0], targets[1]> basis, local index = 2*b0 + b1.
Eigen::Matrix4cd two_qubit_matrix(const GateOp& gate) {
  Eigen::Matrix4cd u = Eigen::Matrix4cd::Identity();
  const double half = gate.angle.value_or(0.0) / 2.0;
  switch (gate.kind) {
    case GateKind::CNOT:
      u(2, 2) = 0; u(3, 3) = 0; u(2, 3) = 1; u(3, 2) = 1;
      break;
    case GateKind::CZ:
      u(3, 3) = -1;
      break;
    case GateKind::CRX: {
      const Eigen::Matrix2cd rx =
          single_qubit_matrix({GateKind::RX, {0}, gate.angle, {}, {}});
      u.block<2, 2>(2, 2) = rx;
      break;
    }
    case GateKind::SWAP:
      u(1, 1) = 0; u(2, 2) = 0; u(1, 2) = 1; u(2, 1) = 1;
      break;
    case GateKind::ZZ: {
      const Complex even = std::exp(-kI * half);
      const Complex odd = std::exp(kI * half);
      u(0, 0) = even; u(1, 1) = odd; u(2, 2) = odd; u(3, 3) = even;
      break;
    }
    default:
      throw std::invalid_argument(gate_msg(gate, "not a two-qubit unitary"));
  }
  return u;
}

void apply_single(Eigen::VectorXcd& amps, int q, const Eigen::Matrix2cd& u) {
  const Eigen::Index dim = amps.size();
  const Eigen::Index bit = Eigen::Index{1} << q;
  for (Eigen::Index base = 0; base < dim; ++base) {
    if (base & bit) continue;
    const Complex a0 = amps[base];
    const Complex a1 = amps[base | bit];
    amps[base] = u(0, 0) * a0 + u(0, 1) * a1;
    amps[base | bit] = u(1, 0) * a0 + u(1, 1) * a1;
  }
}

void apply_double(Eigen::VectorXcd& amps, int q0, int q1,
                  const Eigen::Matrix4cd& u) {
  const Eigen::Index dim = amps.size();
  const Eigen::Index bit0 = Eigen::Index{1} << q0;
  const Eigen::Index bit1 = Eigen::Index{1} << q1;
  for (Eigen::Index base = 0; base < dim; ++base) {
    if ((base & bit0) || (base & bit1)) continue;
    const Eigen::Index idx[4] = {base, base | bit1, base | bit0,
                                 base | bit0 | bit1};
    Eigen::Vector4cd local;
    for (int i = 0; i < 4; ++i) local[i] = amps[idx[i]];
    local = (u * local).eval();
    for (int i = 0; i < 4; ++i) amps[idx[i]] = local[i];
  }
}

}  // namespace

void apply_gate_inplace(Eigen::VectorXcd& amplitudes, const GateOp& gate) {
  if (gate.kind == GateKind::DELAY) return;
  if (is_rotation(gate.kind) && !gate.angle) {
    throw std::invalid_argument(gate_msg(gate, "unresolved parameter binding"));
  }
  if (gate_arity(gate.kind) == 1) {
    apply_single(amplitudes, gate.targets[0], single_qubit_matrix(gate));
  } else {
    apply_double(amplitudes, gate.targets[0], gate.targets[1],
                 two_qubit_matrix(gate));
  }
}

StateVector apply_gate(const StateVector& state, const GateOp& gate) {
  validate(gate, state.n_qubits);
  StateVector out = state;
  apply_gate_inplace(out.amplitudes, gate);
  return out;
}

StateVector run_circuit(const Circuit& circuit, const StateVector* init) {
  validate(circuit);
  StateVector state = init ? *init : zero_state(circuit.n_qubits);
  if (state.n_qubits != circuit.n_qubits) {
    throw std::invalid_argument("initial state qubit count mismatch");
  }
  for (const GateOp& gate : circuit.ops) {
    apply_gate_inplace(state.amplitudes, gate);
  }
  return state;
}

Distribution probabilities(const StateVector& state) {
  if (norm_error(state) > 1e-10) {
    throw std::invalid_argument("state is not normalized");
  }
  Distribution dist;
  dist.probabilities = state.amplitudes.cwiseAbs2();
  return dist;
}

std::uint64_t sample_index(const Eigen::VectorXd& probs, double u) {
  double cumulative = 0.0;
  const Eigen::Index n = probs.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    cumulative += probs[i];
    if (u < cumulative) return static_cast<std::uint64_t>(i);
  }
  return static_cast<std::uint64_t>(n - 1);
}

std::map<std::uint64_t, std::int64_t> sample_counts(const Distribution& dist,
                                                    std::int64_t shots,
                                                    std::uint64_t seed) {
  if (shots < 1) throw std::invalid_argument("shots must be >= 1");
  std::map<std::uint64_t, std::int64_t> counts;
  for (std::int64_t k = 0; k < shots; ++k) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
    const double u = uniform_double(rng);
    ++counts[sample_index(dist.probabilities, u)];
  }
  return counts;
}

double expectation_z(const StateVector& state, int qubit) {
  if (qubit < 0 || qubit >= state.n_qubits) {
    throw std::invalid_argument("qubit index out of range");
  }
  const Eigen::Index bit = Eigen::Index{1} << qubit;
  double value = 0.0;
  for (Eigen::Index i = 0; i < state.amplitudes.size(); ++i) {
    const double p = std::norm(state.amplitudes[i]);
    value += (i & bit) ? -p : p;
  }
  return value;
}

Eigen::VectorXd z_expectations(const Distribution& dist, int n_qubits) {
  if (dist.probabilities.size() != (Eigen::Index{1} << n_qubits)) {
    throw std::invalid_argument("distribution size does not match qubit count");
  }
  Eigen::VectorXd z = Eigen::VectorXd::Zero(n_qubits);
  for (Eigen::Index i = 0; i < dist.probabilities.size(); ++i) {
    const double p = dist.probabilities[i];
    for (int q = 0; q < n_qubits; ++q) {
      z[q] += (i >> q) & 1 ? -p : p;
    }
  }
  return z;
}

std::pair<double, double> parity_probabilities(const Distribution& dist,
                                               int n_qubits,
                                               const std::vector<int>& qubits) {
  if (qubits.empty()) {
    throw std::invalid_argument("parity needs a non-empty qubit set");
  }
  std::uint64_t mask = 0;
  for (int q : qubits) {
    if (q < 0 || q >= n_qubits) {
      throw std::invalid_argument("parity qubit index out of range");
    }
    mask |= std::uint64_t{1} << q;
  }
  double even = 0.0, odd = 0.0;
  for (Eigen::Index i = 0; i < dist.probabilities.size(); ++i) {
    const int pop = std::popcount(static_cast<std::uint64_t>(i) & mask);
    (pop % 2 == 0 ? even : odd) += dist.probabilities[i];
  }
  return {even, odd};
}

std::pair<double, double> parity_probabilities(const StateVector& state,
                                               const std::vector<int>& qubits) {
  return parity_probabilities(probabilities(state), state.n_qubits, qubits);
}

double total_variation_distance(const Distribution& p, const Distribution& q) {
  if (p.probabilities.size() != q.probabilities.size()) {
    throw std::invalid_argument("distribution length mismatch");
  }
  return 0.5 * (p.probabilities - q.probabilities).cwiseAbs().sum();
}

Distribution distribution_from_counts(
    const std::map<std::uint64_t, std::int64_t>& counts, int n_qubits) {
  Distribution dist;
  dist.probabilities = Eigen::VectorXd::Zero(Eigen::Index{1} << n_qubits);
  std::int64_t total = 0;
  for (const auto& [index, count] : counts) {
    if (index >= static_cast<std::uint64_t>(dist.probabilities.size())) {
      throw std::invalid_argument("count outcome out of range");
    }
    dist.probabilities[static_cast<Eigen::Index>(index)] +=
        static_cast<double>(count);
    total += count;
  }
  if (total <= 0) throw std::invalid_argument("counts map is empty");
  dist.probabilities /= static_cast<double>(total);
  return dist;
}

}  // namespace qmlsec::sim

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

// Exact statevector simulation of small quantum circuits.
//
// Conventions used throughout the project:
//  - qubit 0 is the least significant bit of a basis-state index,
//    i.e. index = sum_q bit_q * 2^q;
//  - rotations follow R_P(theta) = exp(-i*theta/2 * P) and
//    ZZ(theta) = exp(-i*theta/2 * Z(x)Z);
//  - for CNOT/CRX, targets[0] is the control and targets[1] the target.
namespace qmlsec::sim {

using Complex = std::complex<double>;

// Dense statevectors only; beyond this the memory/runtime model breaks down.
inline constexpr int kMaxQubits = 16;

enum class GateKind { X, Y, Z, H, RX, RY, RZ, CNOT, CZ, CRX, SWAP, ZZ, DELAY };

std::string_view to_string(GateKind kind);
std::optional<GateKind> gate_kind_from_string(std::string_view name);
int gate_arity(GateKind kind);
// Kinds that carry exactly one of {angle, param_index}: RX, RY, RZ, CRX, ZZ.
bool is_rotation(GateKind kind);

struct GateOp {
  GateKind kind = GateKind::X;
  std::vector<int> targets;
  std::optional<double> angle;        // radians, resolved rotation
  std::optional<int> param_index;     // trainable-parameter binding
  std::optional<double> duration;     // time units (DELAY, noise timing)

  bool operator==(const GateOp&) const = default;
};

// Builders for the common cases; tests and modules construct circuits a lot.
namespace ops {
GateOp x(int q);
GateOp y(int q);
GateOp z(int q);
GateOp h(int q);
GateOp rx(int q, double angle);
GateOp ry(int q, double angle);
GateOp rz(int q, double angle);
GateOp rx_param(int q, int param_index);
GateOp ry_param(int q, int param_index);
GateOp rz_param(int q, int param_index);
GateOp cnot(int control, int target);
GateOp cz(int a, int b);
GateOp crx(int control, int target, double angle);
GateOp crx_param(int control, int target, int param_index);
GateOp swap(int a, int b);
GateOp zz(int a, int b, double angle);
GateOp zz_param(int a, int b, int param_index);
GateOp delay(int q, double duration);
}  // namespace ops

struct Circuit {
  int n_qubits = 0;
  std::vector<GateOp> ops;

  bool operator==(const Circuit&) const = default;
};

// Throws std::invalid_argument on bad arity, out-of-range targets,
// rotation-binding violations, or qubit counts outside [1, kMaxQubits].
void validate(const GateOp& gate, int n_qubits);
void validate(const Circuit& circuit);

// Number of trainable parameters referenced by the circuit (max index + 1).
int parameter_count(const Circuit& circuit);

// Replaces every param_index binding with the matching angle from theta.
Circuit bind_parameters(const Circuit& circuit,
                        Eigen::Ref<const Eigen::VectorXd> theta);

struct StateVector {
  int n_qubits = 0;
  Eigen::VectorXcd amplitudes;  // 2^n entries, unit norm
};

StateVector zero_state(int n_qubits);
double norm_error(const StateVector& state);  // |sum |a|^2 - 1|

// In-place kernel shared by the trajectory sampler; amplitudes.size() fixes n.
void apply_gate_inplace(Eigen::VectorXcd& amplitudes, const GateOp& gate);

StateVector apply_gate(const StateVector& state, const GateOp& gate);

// Left-fold of apply_gate over the ops; init defaults to |0...0>.
// DELAY is the identity here.
StateVector run_circuit(const Circuit& circuit,
                        const StateVector* init = nullptr);

struct Distribution {
  Eigen::VectorXd probabilities;  // 2^n entries, nonnegative, sum 1
};

Distribution probabilities(const StateVector& state);

// CDF inversion used by both sample_counts and the trajectory sampler.
std::uint64_t sample_index(const Eigen::VectorXd& probs, double u);

// Multinomial sample of `shots` outcomes. Shot k draws from a generator
// seeded with derive_seed(seed, k); the noisy counts path uses the same
// per-shot policy, so with all noise rates zero the two agree exactly.
std::map<std::uint64_t, std::int64_t> sample_counts(const Distribution& dist,
                                                    std::int64_t shots,
                                                    std::uint64_t seed);

double expectation_z(const StateVector& state, int qubit);

// Per-qubit <Z> of every qubit, from a distribution over 2^n outcomes.
Eigen::VectorXd z_expectations(const Distribution& dist, int n_qubits);

// (p_even, p_odd) of the measured parity restricted to `qubits`.
std::pair<double, double> parity_probabilities(const StateVector& state,
                                               const std::vector<int>& qubits);
std::pair<double, double> parity_probabilities(const Distribution& dist,
                                               int n_qubits,
                                               const std::vector<int>& qubits);

double total_variation_distance(const Distribution& p, const Distribution& q);

// Empirical distribution from a counts map (used by shot-based estimation).
Distribution distribution_from_counts(
    const std::map<std::uint64_t, std::int64_t>& counts, int n_qubits);

}  // namespace qmlsec::sim

#pragma once

#include "qmlsec/sim.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

// Stochastic-trajectory (Monte Carlo wavefunction) simulation of device noise:
// depolarizing gate errors, T1/T2 decoherence over gate/idle durations,
// readout flips, and crosstalk amplification via the coupling map.
namespace qmlsec::noise {

struct QubitNoise {
  double t1 = 1e9;            // amplitude-damping time, > 0
  double t2 = 1e9;            // total dephasing time, 0 < t2 <= 2*t1
  double readout_p01 = 0.0;   // P(true 0 read as 1)
  double readout_p10 = 0.0;   // P(true 1 read as 0)
  double gate_error_1q = 0.0; // depolarizing probability per 1q gate
  double gate_error_2q = 0.0; // depolarizing probability per 2q gate
};

struct DeviceProfile {
  std::string device_id;
  int n_qubits = 0;
  std::vector<std::pair<int, int>> coupling_map;  // undirected, stored a < b
  std::vector<QubitNoise> per_qubit;
  double crosstalk_multiplier = 3.0;  // >= 1, applied to neighbor-driven gates
  std::map<std::string, double> gate_durations;  // gate kind name -> time
};

void validate(const DeviceProfile& device);
bool adjacent(const DeviceProfile& device, int a, int b);
std::vector<int> neighbors(const DeviceProfile& device, int q);

// Sorted qubit sets; one entry per circuit op when used as a schedule.
using QubitSet = std::vector<int>;
using ConcurrentSchedule = std::vector<QubitSet>;

// Depolarizing probability for `gate`, boosted by crosstalk_multiplier when
// any coupling-map neighbor of a target is simultaneously driven. For a
// two-qubit gate the base rate is the max of the two targets' gate_error_2q.
// DELAY carries no drive and has zero gate error.
double effective_gate_error(const DeviceProfile& device,
                            const sim::GateOp& gate,
                            const QubitSet& concurrent);

// One trajectory, stopping before measurement; `rng` supplies every draw.
// Per gate: unitary, then per-target random Pauli with probability
// effective_gate_error, then per-target decoherence over the op duration
// (DELAY uses its own dur field, other kinds the device's gate_durations).
// Amplitude damping uses the exact two-outcome jump unraveling (jump
// probability (1-exp(-t/t1)) scaled by the qubit's excited population) and
// dephasing applies Z with probability (1-exp(-t/t2_eff))/2, where
// 1/t2_eff = 1/t2 - 1/(2*t1). Draws are skipped when an event probability
// is exactly zero, so a noiseless device consumes no randomness.
sim::StateVector trajectory_state(const sim::Circuit& circuit,
                                  const DeviceProfile& device,
                                  std::mt19937_64& rng,
                                  const ConcurrentSchedule* concurrent = nullptr);

// Full trajectory: trajectory_state, Z-basis sample, then readout flips.
// Deterministic given the seed.
std::uint64_t trajectory_run(const sim::Circuit& circuit,
                             const DeviceProfile& device,
                             std::uint64_t seed,
                             const ConcurrentSchedule* concurrent = nullptr);

// `shots` independent trajectories; trajectory k is seeded with
// derive_seed(seed, k), so aggregation order (and parallelism) cannot
// change the counts.
std::map<std::uint64_t, std::int64_t> run_noisy_counts(
    const sim::Circuit& circuit, const DeviceProfile& device,
    std::int64_t shots, std::uint64_t seed,
    const ConcurrentSchedule* concurrent = nullptr);

// Independent per-qubit flips with readout_p01/p10.
std::vector<int> apply_readout_error(const std::vector<int>& bits,
                                     const DeviceProfile& device,
                                     std::uint64_t seed);

// JSON profile files (fields mirror DeviceProfile).
DeviceProfile load_device(const std::filesystem::path& path);
void save_device(const DeviceProfile& device, const std::filesystem::path& path);
std::string device_to_json(const DeviceProfile& device);
DeviceProfile device_from_json(const std::string& text);

// Shipped example profiles: "ideal", "noisy-a", "noisy-b".
DeviceProfile builtin_profile(const std::string& name);

// Linear-coupling profile with per-qubit rates drawn from a seeded spread;
// used to synthesize device populations for fingerprinting studies.
DeviceProfile random_device_profile(int n_qubits, std::uint64_t seed,
                                    const std::string& device_id);

}  // namespace qmlsec::noise

#include "qmlsec/noise.hpp"

#include "qmlsec/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace qmlsec::noise {

namespace {

using json = nlohmann::ordered_json;

void check_probability(double p, const char* name) {
  if (p < 0.0 || p > 1.0) {
    throw std::invalid_argument(std::string(name) + " must be in [0, 1]");
  }
}

}  // namespace

void validate(const DeviceProfile& device) {
  if (device.n_qubits < 1 || device.n_qubits > sim::kMaxQubits) {
    throw std::invalid_argument("device qubit count must be in [1, " +
                                std::to_string(sim::kMaxQubits) + "]");
  }
  if (static_cast<int>(device.per_qubit.size()) != device.n_qubits) {
    throw std::invalid_argument("per_qubit size must equal n_qubits");
  }
  for (const QubitNoise& q : device.per_qubit) {
    if (q.t1 <= 0.0 || q.t2 <= 0.0) {
      throw std::invalid_argument("t1 and t2 must be positive");
    }
    if (q.t2 > 2.0 * q.t1 + 1e-12) {
      throw std::invalid_argument("t2 must be <= 2*t1");
    }
    check_probability(q.readout_p01, "readout_p01");
    check_probability(q.readout_p10, "readout_p10");
    check_probability(q.gate_error_1q, "gate_error_1q");
    check_probability(q.gate_error_2q, "gate_error_2q");
  }
  for (const auto& [a, b] : device.coupling_map) {
    if (a < 0 || b < 0 || a >= device.n_qubits || b >= device.n_qubits ||
        a == b) {
      throw std::invalid_argument("coupling edge references invalid qubits");
    }
  }
  if (device.crosstalk_multiplier < 1.0) {
    throw std::invalid_argument("crosstalk_multiplier must be >= 1");
  }
}

bool adjacent(const DeviceProfile& device, int a, int b) {
  for (const auto& [x, y] : device.coupling_map) {
    if ((x == a && y == b) || (x == b && y == a)) return true;
  }
  return false;
}

std::vector<int> neighbors(const DeviceProfile& device, int q) {
  std::vector<int> out;
  for (const auto& [a, b] : device.coupling_map) {
    if (a == q) out.push_back(b);
    if (b == q) out.push_back(a);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double effective_gate_error(const DeviceProfile& device,
                            const sim::GateOp& gate,
                            const QubitSet& concurrent) {
  if (gate.kind == sim::GateKind::DELAY) return 0.0;
  double base = 0.0;
  if (sim::gate_arity(gate.kind) == 1) {
    base = device.per_qubit.at(gate.targets[0]).gate_error_1q;
  } else {
    base = std::max(device.per_qubit.at(gate.targets[0]).gate_error_2q,
                    device.per_qubit.at(gate.targets[1]).gate_error_2q);
  }
  if (!concurrent.empty()) {
    bool boosted = false;
    for (int target : gate.targets) {
      for (int n : neighbors(device, target)) {
        if (std::binary_search(concurrent.begin(), concurrent.end(), n)) {
          boosted = true;
          break;
        }
      }
      if (boosted) break;
    }
    if (boosted) base *= device.crosstalk_multiplier;
  }
  return std::clamp(base, 0.0, 1.0);
}

namespace {

double op_duration(const DeviceProfile& device, const sim::GateOp& gate) {
  if (gate.duration) return *gate.duration;
  if (gate.kind == sim::GateKind::DELAY) return 0.0;
  const auto it = device.gate_durations.find(std::string(sim::to_string(gate.kind)));
  return it == device.gate_durations.end() ? 0.0 : it->second;
}

double excited_population(const Eigen::VectorXcd& amps, int q) {
  const Eigen::Index bit = Eigen::Index{1} << q;
  double p = 0.0;
  for (Eigen::Index i = 0; i < amps.size(); ++i) {
    if (i & bit) p += std::norm(amps[i]);
  }
  return p;
}

// Two-outcome amplitude-damping unraveling for one qubit over gamma.
void amplitude_damping_step(Eigen::VectorXcd& amps, int q, double gamma,
                            std::mt19937_64& rng) {
  const double p1 = excited_population(amps, q);
  const double p_jump = gamma * p1;
  if (p_jump <= 0.0) return;  // nothing to damp, no draw
  const Eigen::Index bit = Eigen::Index{1} << q;
  const double u = uniform_double(rng);
  if (u < p_jump) {
    // Jump: excited amplitude collapses into the ground slot.
    const double inv = 1.0 / std::sqrt(p1);
    for (Eigen::Index i = 0; i < amps.size(); ++i) {
      if (i & bit) continue;
      amps[i] = amps[i | bit] * inv;
      amps[i | bit] = 0.0;
    }
  } else {
    // No-jump: damp the excited amplitudes and renormalize.
    const double damp = std::sqrt(1.0 - gamma);
    const double inv = 1.0 / std::sqrt(1.0 - p_jump);
    for (Eigen::Index i = 0; i < amps.size(); ++i) {
      amps[i] *= (i & bit) ? damp * inv : inv;
    }
  }
}

void decoherence_step(Eigen::VectorXcd& amps, const QubitNoise& qn, int q,
                      double t, std::mt19937_64& rng) {
  if (t <= 0.0) return;
  const double gamma = 1.0 - std::exp(-t / qn.t1);
  if (gamma > 0.0) amplitude_damping_step(amps, q, gamma, rng);
  // Pure-dephasing rate: 1/t_phi = 1/t2 - 1/(2*t1), clamped at zero.
  const double rate_phi = std::max(0.0, 1.0 / qn.t2 - 0.5 / qn.t1);
  const double p_z = 0.5 * (1.0 - std::exp(-t * rate_phi));
  if (p_z > 0.0 && uniform_double(rng) < p_z) {
    sim::apply_gate_inplace(amps, sim::ops::z(q));
  }
}

void random_pauli(Eigen::VectorXcd& amps, int q, std::mt19937_64& rng) {
  const std::int64_t which = uniform_int(rng, 0, 2);
  const sim::GateOp pauli = which == 0   ? sim::ops::x(q)
                            : which == 1 ? sim::ops::y(q)
                                         : sim::ops::z(q);
  sim::apply_gate_inplace(amps, pauli);
}

}  // namespace

sim::StateVector trajectory_state(const sim::Circuit& circuit,
                                  const DeviceProfile& device,
                                  std::mt19937_64& rng,
                                  const ConcurrentSchedule* concurrent) {
  validate(device);
  sim::validate(circuit);
  if (circuit.n_qubits > device.n_qubits) {
    throw std::invalid_argument("circuit does not fit on device");
  }
  if (concurrent && concurrent->size() != circuit.ops.size()) {
    throw std::invalid_argument("concurrent schedule length mismatch");
  }
  sim::StateVector state = sim::zero_state(circuit.n_qubits);
  static const QubitSet empty_set;
  for (std::size_t i = 0; i < circuit.ops.size(); ++i) {
    const sim::GateOp& gate = circuit.ops[i];
    sim::apply_gate_inplace(state.amplitudes, gate);
    const QubitSet& active = concurrent ? (*concurrent)[i] : empty_set;
    const double p_err = effective_gate_error(device, gate, active);
    if (p_err > 0.0) {
      for (int target : gate.targets) {
        if (uniform_double(rng) < p_err) {
          random_pauli(state.amplitudes, target, rng);
        }
      }
    }
    const double t = op_duration(device, gate);
    if (t > 0.0) {
      for (int target : gate.targets) {
        decoherence_step(state.amplitudes, device.per_qubit.at(target), target,
                         t, rng);
      }
    }
  }
  return state;
}

std::uint64_t trajectory_run(const sim::Circuit& circuit,
                             const DeviceProfile& device,
                             std::uint64_t seed,
                             const ConcurrentSchedule* concurrent) {
  std::mt19937_64 rng(seed);
  const sim::StateVector state =
      trajectory_state(circuit, device, rng, concurrent);
  const double u = uniform_double(rng);
  std::uint64_t bits = sim::sample_index(state.amplitudes.cwiseAbs2(), u);
  for (int q = 0; q < circuit.n_qubits; ++q) {
    const QubitNoise& qn = device.per_qubit.at(q);
    if (qn.readout_p01 <= 0.0 && qn.readout_p10 <= 0.0) continue;
    const bool one = (bits >> q) & 1;
    const double p_flip = one ? qn.readout_p10 : qn.readout_p01;
    if (p_flip > 0.0 && uniform_double(rng) < p_flip) {
      bits ^= std::uint64_t{1} << q;
    }
  }
  return bits;
}

std::map<std::uint64_t, std::int64_t> run_noisy_counts(
    const sim::Circuit& circuit, const DeviceProfile& device,
    std::int64_t shots, std::uint64_t seed,
    const ConcurrentSchedule* concurrent) {
  if (shots < 1) throw std::invalid_argument("shots must be >= 1");
  const unsigned hw = std::thread::hardware_concurrency();
  const std::int64_t n_chunks =
      std::min<std::int64_t>(shots, std::max(1u, std::min(hw, 8u)));
  std::vector<std::future<std::map<std::uint64_t, std::int64_t>>> futures;
  for (std::int64_t c = 0; c < n_chunks; ++c) {
    const std::int64_t begin = shots * c / n_chunks;
    const std::int64_t end = shots * (c + 1) / n_chunks;
    futures.push_back(std::async(std::launch::async, [&, begin, end]() {
      std::map<std::uint64_t, std::int64_t> local;
      for (std::int64_t k = begin; k < end; ++k) {
        const std::uint64_t shot_seed =
            derive_seed(seed, static_cast<std::uint64_t>(k));
        ++local[trajectory_run(circuit, device, shot_seed, concurrent)];
      }
      return local;
    }));
  }
  std::map<std::uint64_t, std::int64_t> counts;
  for (auto& f : futures) {
    for (const auto& [bits, count] : f.get()) counts[bits] += count;
  }
  return counts;
}

std::vector<int> apply_readout_error(const std::vector<int>& bits,
                                     const DeviceProfile& device,
                                     std::uint64_t seed) {
  validate(device);
  if (static_cast<int>(bits.size()) != device.n_qubits) {
    throw std::invalid_argument("bitstring length must equal device qubits");
  }
  std::mt19937_64 rng(seed);
  std::vector<int> out = bits;
  for (int q = 0; q < device.n_qubits; ++q) {
    const QubitNoise& qn = device.per_qubit[q];
    if (qn.readout_p01 <= 0.0 && qn.readout_p10 <= 0.0) continue;
    const double p_flip = out[q] ? qn.readout_p10 : qn.readout_p01;
    if (p_flip > 0.0 && uniform_double(rng) < p_flip) out[q] ^= 1;
  }
  return out;
}

namespace {

json qubit_to_json(const QubitNoise& q) {
  return json{{"t1", q.t1},
              {"t2", q.t2},
              {"readout_p01", q.readout_p01},
              {"readout_p10", q.readout_p10},
              {"gate_error_1q", q.gate_error_1q},
              {"gate_error_2q", q.gate_error_2q}};
}

QubitNoise qubit_from_json(const json& j) {
  QubitNoise q;
  q.t1 = j.at("t1").get<double>();
  q.t2 = j.at("t2").get<double>();
  q.readout_p01 = j.at("readout_p01").get<double>();
  q.readout_p10 = j.at("readout_p10").get<double>();
  q.gate_error_1q = j.at("gate_error_1q").get<double>();
  q.gate_error_2q = j.at("gate_error_2q").get<double>();
  return q;
}

}  // namespace

std::string device_to_json(const DeviceProfile& device) {
  json j;
  j["device_id"] = device.device_id;
  j["n_qubits"] = device.n_qubits;
  j["coupling_map"] = json::array();
  for (const auto& [a, b] : device.coupling_map) {
    j["coupling_map"].push_back(json::array({a, b}));
  }
  j["crosstalk_multiplier"] = device.crosstalk_multiplier;
  j["gate_durations"] = device.gate_durations;
  j["qubits"] = json::array();
  for (const QubitNoise& q : device.per_qubit) {
    j["qubits"].push_back(qubit_to_json(q));
  }
  return j.dump(2) + "\n";
}

DeviceProfile device_from_json(const std::string& text) {
  const json j = json::parse(text);
  DeviceProfile device;
  device.device_id = j.at("device_id").get<std::string>();
  device.n_qubits = j.at("n_qubits").get<int>();
  for (const auto& edge : j.at("coupling_map")) {
    const int a = edge.at(0).get<int>();
    const int b = edge.at(1).get<int>();
    device.coupling_map.emplace_back(std::min(a, b), std::max(a, b));
  }
  device.crosstalk_multiplier = j.at("crosstalk_multiplier").get<double>();
  if (j.contains("gate_durations")) {
    device.gate_durations =
        j.at("gate_durations").get<std::map<std::string, double>>();
  }
  for (const auto& q : j.at("qubits")) {
    device.per_qubit.push_back(qubit_from_json(q));
  }
  validate(device);
  return device;
}

DeviceProfile load_device(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open device file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return device_from_json(buffer.str());
}

void save_device(const DeviceProfile& device,
                 const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write device file " + path.string());
  out << device_to_json(device);
}

namespace {

DeviceProfile line_device(const std::string& id, int n) {
  DeviceProfile device;
  device.device_id = id;
  device.n_qubits = n;
  for (int q = 0; q + 1 < n; ++q) device.coupling_map.emplace_back(q, q + 1);
  device.per_qubit.assign(n, QubitNoise{});
  return device;
}

}  // namespace

DeviceProfile builtin_profile(const std::string& name) {
  if (name == "ideal") {
    DeviceProfile device = line_device("ideal", 4);
    return device;
  }
  if (name == "noisy-a") {
    DeviceProfile device = line_device("noisy-a", 4);
    const double p01[] = {0.015, 0.040, 0.022, 0.060};
    const double p10[] = {0.070, 0.025, 0.090, 0.030};
    const double g1[] = {0.0010, 0.0016, 0.0008, 0.0022};
    const double g2[] = {0.012, 0.018, 0.015, 0.020};
    const double t1s[] = {90.0, 70.0, 110.0, 60.0};
    for (int q = 0; q < 4; ++q) {
      QubitNoise& qn = device.per_qubit[q];
      qn.t1 = t1s[q];
      qn.t2 = 0.8 * t1s[q];
      qn.readout_p01 = p01[q];
      qn.readout_p10 = p10[q];
      qn.gate_error_1q = g1[q];
      qn.gate_error_2q = g2[q];
    }
    device.gate_durations = {{"H", 0.05}, {"X", 0.05}, {"Y", 0.05},
                             {"Z", 0.05}, {"RX", 0.05}, {"RY", 0.05},
                             {"RZ", 0.05}, {"CNOT", 0.3}, {"CZ", 0.3},
                             {"CRX", 0.3}, {"SWAP", 0.9}, {"ZZ", 0.3}};
    return device;
  }
  if (name == "noisy-b") {
    DeviceProfile device = line_device("noisy-b", 4);
    const double p01[] = {0.055, 0.012, 0.048, 0.018};
    const double p10[] = {0.020, 0.080, 0.035, 0.095};
    const double g1[] = {0.0021, 0.0007, 0.0019, 0.0011};
    const double g2[] = {0.022, 0.011, 0.017, 0.014};
    const double t1s[] = {55.0, 120.0, 75.0, 95.0};
    for (int q = 0; q < 4; ++q) {
      QubitNoise& qn = device.per_qubit[q];
      qn.t1 = t1s[q];
      qn.t2 = 1.1 * t1s[q];
      qn.readout_p01 = p01[q];
      qn.readout_p10 = p10[q];
      qn.gate_error_1q = g1[q];
      qn.gate_error_2q = g2[q];
    }
    device.gate_durations = {{"H", 0.06}, {"X", 0.06}, {"Y", 0.06},
                             {"Z", 0.06}, {"RX", 0.06}, {"RY", 0.06},
                             {"RZ", 0.06}, {"CNOT", 0.35}, {"CZ", 0.35},
                             {"CRX", 0.35}, {"SWAP", 1.05}, {"ZZ", 0.35}};
    return device;
  }
  throw std::invalid_argument("unknown builtin profile '" + name + "'");
}

DeviceProfile random_device_profile(int n_qubits, std::uint64_t seed,
                                    const std::string& device_id) {
  DeviceProfile device = line_device(device_id, n_qubits);
  std::mt19937_64 rng(seed);
  for (int q = 0; q < n_qubits; ++q) {
    QubitNoise& qn = device.per_qubit[q];
    qn.t1 = uniform_range(rng, 50.0, 150.0);
    qn.t2 = uniform_range(rng, 0.6, 1.5) * qn.t1;
    // Readout asymmetry is the fingerprint carrier: each qubit leans toward
    // reading 0 or 1 by a margin well above shot noise at 1e4 shots.
    const double margin = uniform_range(rng, 0.04, 0.24);
    const double base = uniform_range(rng, 0.005, 0.02);
    if (uniform_double(rng) < 0.5) {
      qn.readout_p01 = base + margin;
      qn.readout_p10 = base;
    } else {
      qn.readout_p01 = base;
      qn.readout_p10 = base + margin;
    }
    qn.gate_error_1q = uniform_range(rng, 0.0005, 0.003);
    qn.gate_error_2q = uniform_range(rng, 0.008, 0.03);
  }
  validate(device);
  return device;
}

}  // namespace qmlsec::noise

#include "qmlsec/security.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "qmlsec/circuit_io.hpp"
#include "qmlsec/rng.hpp"

namespace qmlsec::security {

namespace {

using json = nlohmann::ordered_json;

}  // namespace

Signature qupuf_signature(const noise::DeviceProfile& device,
                          const std::string& variant, std::int64_t shots,
                          std::optional<double> delay, std::uint64_t seed) {
  noise::validate(device);
  if (shots < 100) {
    throw std::invalid_argument("qupuf_signature: need at least 100 shots");
  }

  sim::Circuit circuit;
  circuit.n_qubits = device.n_qubits;
  if (variant == "hadamard") {
    for (int q = 0; q < device.n_qubits; ++q) {
      circuit.ops.push_back(sim::ops::h(q));
    }
  } else if (variant == "decoherence") {
    if (!delay || *delay <= 0.0) {
      throw std::invalid_argument(
          "qupuf_signature: decoherence variant needs delay > 0");
    }
    for (int q = 0; q < device.n_qubits; ++q) {
      circuit.ops.push_back(sim::ops::x(q));
    }
    for (int q = 0; q < device.n_qubits; ++q) {
      circuit.ops.push_back(sim::ops::delay(q, *delay));
    }
  } else {
    throw std::invalid_argument("qupuf_signature: unknown variant " + variant);
  }

  const auto counts = noise::run_noisy_counts(circuit, device, shots, seed);

  Signature signature;
  signature.device_id = device.device_id;
  signature.shots = shots;
  signature.biases.assign(device.n_qubits, 0.0);
  for (const auto& [outcome, count] : counts) {
    for (int q = 0; q < device.n_qubits; ++q) {
      if (outcome >> q & 1) {
        signature.biases[q] += static_cast<double>(count);
      }
    }
  }
  for (double& bias : signature.biases) bias /= static_cast<double>(shots);
  signature.bits.reserve(device.n_qubits);
  for (double bias : signature.biases) {
    signature.bits.push_back(bias > 0.5 ? 1 : 0);
  }
  return signature;
}

double hamming_fraction(const Signature& a, const Signature& b) {
  if (a.bits.size() != b.bits.size() || a.bits.empty()) {
    throw std::invalid_argument("hamming_fraction: signature length mismatch");
  }
  int differ = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    if (a.bits[i] != b.bits[i]) ++differ;
  }
  return static_cast<double>(differ) / static_cast<double>(a.bits.size());
}

void save_signature_csv(const Signature& signature, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write signature: " + path);
  out << "qubit,bias,bit\n";
  for (std::size_t q = 0; q < signature.bits.size(); ++q) {
    out << q << "," << sim::format_double(signature.biases[q]) << ","
        << signature.bits[q] << "\n";
  }
}

Signature load_signature_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read signature: " + path);
  Signature signature;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "qubit,bias,bit") continue;
    int qubit = 0, bit = 0;
    double bias = 0.0;
    if (std::sscanf(line.c_str(), "%d,%lf,%d", &qubit, &bias, &bit) != 3 ||
        qubit != static_cast<int>(signature.bits.size()) ||
        (bit != 0 && bit != 1)) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": malformed signature row");
    }
    signature.biases.push_back(bias);
    signature.bits.push_back(bit);
  }
  if (signature.bits.empty()) {
    throw std::runtime_error("empty signature file: " + path);
  }
  return signature;
}

namespace {

// Greedy contiguous dependency layers: a new layer starts when an op shares a
// qubit with one already in the current layer. Returns valid cut positions.
std::vector<int> layer_boundaries(const sim::Circuit& circuit) {
  std::vector<int> cuts = {0};
  std::set<int> busy;
  for (int i = 0; i < static_cast<int>(circuit.ops.size()); ++i) {
    bool clash = false;
    for (int q : circuit.ops[i].targets) {
      if (busy.count(q)) clash = true;
    }
    if (clash && i > 0) {
      cuts.push_back(i);
      busy.clear();
    }
    for (int q : circuit.ops[i].targets) busy.insert(q);
  }
  cuts.push_back(static_cast<int>(circuit.ops.size()));
  return cuts;
}

}  // namespace

std::vector<Fragment> split_circuit(const sim::Circuit& circuit, int k,
                                    SplitPolicy policy) {
  sim::validate(circuit);
  const int n_ops = static_cast<int>(circuit.ops.size());
  if (k < 1 || k > std::max(n_ops, 1)) {
    throw std::invalid_argument("split_circuit: k out of range");
  }

  std::vector<int> cuts(k + 1);
  if (policy == SplitPolicy::ByGateCount) {
    for (int i = 0; i <= k; ++i) {
      cuts[i] = static_cast<int>(static_cast<std::int64_t>(n_ops) * i / k);
    }
  } else {
    // snap near-equal cuts to layer boundaries where one fits
    const std::vector<int> layers = layer_boundaries(circuit);
    cuts[0] = 0;
    cuts[k] = n_ops;
    for (int i = 1; i < k; ++i) {
      const int desired = static_cast<int>(
          static_cast<std::int64_t>(n_ops) * i / k);
      const int lo = cuts[i - 1] + 1;
      const int hi = n_ops - (k - i);
      int best = std::clamp(desired, lo, hi);
      int best_dist = std::numeric_limits<int>::max();
      for (int cut : layers) {
        if (cut < lo || cut > hi) continue;
        const int dist = std::abs(cut - desired);
        if (dist < best_dist) {
          best = cut;
          best_dist = dist;
        }
      }
      cuts[i] = best;
    }
  }

  std::vector<Fragment> fragments(k);
  for (int i = 0; i < k; ++i) {
    fragments[i].index = i;
    fragments[i].total = k;
    fragments[i].circuit.n_qubits = circuit.n_qubits;
    fragments[i].circuit.ops.assign(circuit.ops.begin() + cuts[i],
                                    circuit.ops.begin() + cuts[i + 1]);
  }
  return fragments;
}

void shuffle_fragments(std::vector<Fragment>& fragments, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 0));
  for (int i = static_cast<int>(fragments.size()) - 1; i > 0; --i) {
    const int j = static_cast<int>(uniform_int(rng, 0, i));
    std::swap(fragments[i], fragments[j]);
  }
}

sim::Circuit recombine_circuit(const std::vector<Fragment>& fragments) {
  if (fragments.empty()) {
    throw std::invalid_argument("recombine_circuit: no fragments");
  }
  const int k = static_cast<int>(fragments.size());
  std::vector<const Fragment*> ordered(k, nullptr);
  for (const Fragment& fragment : fragments) {
    if (fragment.total != k) {
      throw std::invalid_argument("recombine_circuit: fragment count mismatch");
    }
    if (fragment.index < 0 || fragment.index >= k) {
      throw std::invalid_argument("recombine_circuit: fragment index out of range");
    }
    if (ordered[fragment.index]) {
      throw std::invalid_argument("recombine_circuit: duplicate fragment index");
    }
    if (fragment.circuit.n_qubits != fragments.front().circuit.n_qubits) {
      throw std::invalid_argument("recombine_circuit: qubit count mismatch");
    }
    ordered[fragment.index] = &fragment;
  }

  sim::Circuit circuit;
  circuit.n_qubits = fragments.front().circuit.n_qubits;
  for (const Fragment* fragment : ordered) {
    circuit.ops.insert(circuit.ops.end(), fragment->circuit.ops.begin(),
                       fragment->circuit.ops.end());
  }
  return circuit;
}

void save_fragment(const Fragment& fragment, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write fragment: " + path);
  out << "fragment " << fragment.index << " of " << fragment.total << "\n";
  out << sim::to_text(fragment.circuit);
}

Fragment load_fragment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read fragment: " + path);
  std::string header;
  if (!std::getline(in, header)) {
    throw std::runtime_error("empty fragment file: " + path);
  }
  Fragment fragment;
  if (std::sscanf(header.c_str(), "fragment %d of %d", &fragment.index,
                  &fragment.total) != 2 ||
      fragment.total < 1 || fragment.index < 0 ||
      fragment.index >= fragment.total) {
    throw std::runtime_error(path + ": bad fragment header `" + header + "`");
  }
  std::stringstream rest;
  rest << in.rdbuf();
  fragment.circuit = sim::circuit_from_text(rest.str());
  return fragment;
}

namespace {

sim::GateOp make_dummy(DummyKind kind, std::pair<int, int> edge,
                       std::optional<int> decoy_param, double probe_angle) {
  if (kind == DummyKind::Swap) {
    return sim::ops::swap(edge.first, edge.second);
  }
  if (decoy_param) {
    return sim::ops::zz_param(edge.first, edge.second, *decoy_param);
  }
  return sim::ops::zz(edge.first, edge.second, probe_angle);
}

}  // namespace

std::vector<InsertionPoint> rank_insertion_points(
    const sim::Circuit& circuit, const noise::DeviceProfile& device,
    DummyKind kind, RankMode mode) {
  sim::validate(circuit);
  noise::validate(device);
  if (circuit.ops.empty()) {
    throw std::invalid_argument("rank_insertion_points: empty circuit");
  }
  if (circuit.n_qubits != device.n_qubits) {
    throw std::invalid_argument(
        "rank_insertion_points: circuit and device qubit counts differ");
  }

  const int n_ops = static_cast<int>(circuit.ops.size());
  std::vector<InsertionPoint> points;
  points.reserve(static_cast<std::size_t>(n_ops + 1) *
                 device.coupling_map.size());

  sim::Distribution base;
  if (mode == RankMode::Exhaustive) {
    base = sim::probabilities(sim::run_circuit(circuit));
  }

  // Heuristic wire tracking: each wire is 0, 1, or -1 once any gate with a
  // non-classical action touches it. A dummy gate inserted where both wires
  // hold the same basis value is provably inert, so candidates are scored by
  // how distinguishable the pair is: opposite basis values 3, basis vs
  // superposed 2, both superposed 1, identical basis 0.
  std::vector<int> wire(circuit.n_qubits, 0);

  for (int position = 0; position <= n_ops; ++position) {
    for (const auto& edge : device.coupling_map) {
      InsertionPoint point;
      point.position = position;
      point.edge = edge;
      if (mode == RankMode::Exhaustive) {
        sim::Circuit probe = circuit;
        probe.ops.insert(
            probe.ops.begin() + position,
            make_dummy(kind, edge, std::nullopt, std::numbers::pi));
        const sim::Distribution obfuscated =
            sim::probabilities(sim::run_circuit(probe));
        point.score = sim::total_variation_distance(base, obfuscated);
      } else {
        const int wa = wire[edge.first];
        const int wb = wire[edge.second];
        if (wa >= 0 && wb >= 0) {
          point.score = wa != wb ? 3.0 : 0.0;
        } else if (wa < 0 && wb < 0) {
          point.score = 1.0;
        } else {
          point.score = 2.0;
        }
      }
      points.push_back(point);
    }
    if (position == n_ops) break;
    const sim::GateOp& op = circuit.ops[position];
    switch (op.kind) {
      case sim::GateKind::X:
      case sim::GateKind::Y:
        if (wire[op.targets[0]] >= 0) wire[op.targets[0]] ^= 1;
        break;
      case sim::GateKind::H:
      case sim::GateKind::RX:
      case sim::GateKind::RY:
        wire[op.targets[0]] = -1;
        break;
      case sim::GateKind::Z:
      case sim::GateKind::RZ:
      case sim::GateKind::CZ:
      case sim::GateKind::ZZ:
      case sim::GateKind::DELAY:
        break;  // diagonal: basis values survive
      case sim::GateKind::CNOT:
        if (wire[op.targets[0]] == 1) {
          if (wire[op.targets[1]] >= 0) wire[op.targets[1]] ^= 1;
        } else if (wire[op.targets[0]] == -1) {
          wire[op.targets[1]] = -1;
        }
        break;
      case sim::GateKind::CRX:
        if (wire[op.targets[0]] != 0) wire[op.targets[1]] = -1;
        break;
      case sim::GateKind::SWAP:
        std::swap(wire[op.targets[0]], wire[op.targets[1]]);
        break;
    }
  }

  std::stable_sort(points.begin(), points.end(),
                   [](const InsertionPoint& a, const InsertionPoint& b) {
                     if (a.score != b.score) return a.score > b.score;
                     if (a.position != b.position) return a.position < b.position;
                     return a.edge < b.edge;
                   });
  return points;
}

std::pair<sim::Circuit, SecurityKey> insert_dummy_gates(
    const sim::Circuit& circuit, const std::vector<DummySelection>& selections) {
  sim::validate(circuit);
  const int n_ops = static_cast<int>(circuit.ops.size());
  for (const DummySelection& selection : selections) {
    if (selection.position < 0 || selection.position > n_ops) {
      throw std::invalid_argument("insert_dummy_gates: position out of range");
    }
    if (selection.edge.first == selection.edge.second ||
        selection.edge.first < 0 || selection.edge.second < 0 ||
        selection.edge.first >= circuit.n_qubits ||
        selection.edge.second >= circuit.n_qubits) {
      throw std::invalid_argument("insert_dummy_gates: bad edge");
    }
  }

  std::vector<DummySelection> ordered = selections;
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const DummySelection& a, const DummySelection& b) {
                     return a.position < b.position;
                   });

  sim::Circuit obfuscated = circuit;
  SecurityKey key;
  int next_param = sim::parameter_count(circuit);
  int inserted = 0;
  for (const DummySelection& selection : ordered) {
    std::optional<int> decoy;
    if (selection.kind == DummyKind::ZZ) decoy = next_param++;
    const int at = selection.position + inserted;
    obfuscated.ops.insert(obfuscated.ops.begin() + at,
                          make_dummy(selection.kind, selection.edge, decoy, 0.0));
    KeyEntry entry;
    entry.position = at;
    entry.kind = selection.kind == DummyKind::Swap ? sim::GateKind::SWAP
                                                   : sim::GateKind::ZZ;
    entry.targets = {selection.edge.first, selection.edge.second};
    entry.decoy_param = decoy;
    key.entries.push_back(entry);
    ++inserted;
  }
  return {std::move(obfuscated), std::move(key)};
}

sim::Circuit restore_circuit(const sim::Circuit& obfuscated,
                             const SecurityKey& key) {
  sim::Circuit restored = obfuscated;
  for (auto it = key.entries.rbegin(); it != key.entries.rend(); ++it) {
    const KeyEntry& entry = *it;
    if (entry.position < 0 ||
        entry.position >= static_cast<int>(restored.ops.size())) {
      throw std::invalid_argument("restore_circuit: key position out of range");
    }
    const sim::GateOp& gate = restored.ops[entry.position];
    const bool match =
        gate.kind == entry.kind &&
        gate.targets == std::vector<int>{entry.targets[0], entry.targets[1]} &&
        ((entry.kind == sim::GateKind::SWAP && !gate.param_index) ||
         (entry.kind == sim::GateKind::ZZ && gate.param_index &&
          entry.decoy_param && *gate.param_index == *entry.decoy_param));
    if (!match) {
      throw std::invalid_argument(
          "restore_circuit: key does not match gate at position " +
          std::to_string(entry.position));
    }
    restored.ops.erase(restored.ops.begin() + entry.position);
  }
  return restored;
}

void save_key(const SecurityKey& key, const std::string& path) {
  json doc;
  json entries = json::array();
  for (const KeyEntry& entry : key.entries) {
    json e;
    e["position"] = entry.position;
    e["kind"] = entry.kind == sim::GateKind::SWAP ? "SWAP" : "ZZ";
    e["targets"] = {entry.targets[0], entry.targets[1]};
    if (entry.decoy_param) {
      e["decoy_param"] = *entry.decoy_param;
    } else {
      e["decoy_param"] = nullptr;
    }
    entries.push_back(e);
  }
  doc["entries"] = entries;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write key: " + path);
  out << doc.dump(2) << "\n";
}

SecurityKey load_key(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read key: " + path);
  json doc = json::parse(in);
  SecurityKey key;
  for (const json& e : doc.at("entries")) {
    KeyEntry entry;
    entry.position = e.at("position").get<int>();
    const std::string kind = e.at("kind").get<std::string>();
    if (kind == "SWAP") {
      entry.kind = sim::GateKind::SWAP;
    } else if (kind == "ZZ") {
      entry.kind = sim::GateKind::ZZ;
    } else {
      throw std::runtime_error(path + ": unknown dummy gate kind " + kind);
    }
    entry.targets = {e.at("targets")[0].get<int>(),
                     e.at("targets")[1].get<int>()};
    if (!e.at("decoy_param").is_null()) {
      entry.decoy_param = e.at("decoy_param").get<int>();
    }
    key.entries.push_back(entry);
  }
  return key;
}

namespace {

std::vector<std::vector<int>> adjacency_list(
    int n_qubits, const std::vector<std::pair<int, int>>& coupling_map) {
  std::vector<std::vector<int>> adjacency(n_qubits);
  for (const auto& [a, b] : coupling_map) {
    if (a < 0 || b < 0 || a >= n_qubits || b >= n_qubits || a == b) {
      throw std::invalid_argument("allocate_with_buffers: bad coupling edge");
    }
    adjacency[a].push_back(b);
    adjacency[b].push_back(a);
  }
  for (auto& neighbors : adjacency) {
    std::sort(neighbors.begin(), neighbors.end());
    neighbors.erase(std::unique(neighbors.begin(), neighbors.end()),
                    neighbors.end());
  }
  return adjacency;
}

}  // namespace

Allocation allocate_with_buffers(
    int n_qubits, const std::vector<std::pair<int, int>>& coupling_map,
    const std::vector<int>& program_sizes) {
  if (n_qubits < 1) {
    throw std::invalid_argument("allocate_with_buffers: need qubits");
  }
  for (int size : program_sizes) {
    if (size < 1) {
      throw std::invalid_argument("allocate_with_buffers: program size < 1");
    }
  }
  const auto adjacency = adjacency_list(n_qubits, coupling_map);

  std::vector<int> order(program_sizes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return program_sizes[a] > program_sizes[b];
  });

  std::vector<char> assigned(n_qubits, 0);   // member of some program
  std::vector<char> forbidden(n_qubits, 0);  // member or neighbor of one
  Allocation allocation;
  allocation.programs.resize(program_sizes.size());

  for (int program : order) {
    const int want = program_sizes[program];
    std::vector<int> placed;
    for (int seed = 0; seed < n_qubits && placed.empty(); ++seed) {
      if (forbidden[seed]) continue;
      // grow a connected set from the seed, smallest free neighbor first
      std::vector<int> grown = {seed};
      std::vector<char> in_set(n_qubits, 0);
      in_set[seed] = 1;
      while (static_cast<int>(grown.size()) < want) {
        int next = -1;
        for (int member : grown) {
          for (int neighbor : adjacency[member]) {
            if (in_set[neighbor] || forbidden[neighbor]) continue;
            if (next < 0 || neighbor < next) next = neighbor;
          }
        }
        if (next < 0) break;
        grown.push_back(next);
        in_set[next] = 1;
      }
      if (static_cast<int>(grown.size()) == want) placed = std::move(grown);
    }
    if (placed.empty()) {
      throw std::runtime_error(
          "allocate_with_buffers: no placement satisfies the buffer rule");
    }
    std::sort(placed.begin(), placed.end());
    for (int q : placed) {
      assigned[q] = 1;
      forbidden[q] = 1;
      for (int neighbor : adjacency[q]) forbidden[neighbor] = 1;
    }
    allocation.programs[program] = std::move(placed);
  }

  for (int q = 0; q < n_qubits; ++q) {
    if (assigned[q]) continue;
    bool borders_program = false;
    for (int neighbor : adjacency[q]) {
      if (assigned[neighbor]) borders_program = true;
    }
    if (borders_program) allocation.buffer.push_back(q);
  }
  return allocation;
}

double simulate_fault_injection(const sim::Circuit& victim,
                                const std::vector<int>& adversary_qubits,
                                const noise::DeviceProfile& device,
                                PlacementArm arm, std::int64_t shots,
                                std::uint64_t seed) {
  sim::validate(victim);
  noise::validate(device);
  if (victim.n_qubits != device.n_qubits) {
    throw std::invalid_argument(
        "simulate_fault_injection: victim must span the device register");
  }
  if (shots < 1) {
    throw std::invalid_argument("simulate_fault_injection: shots must be >= 1");
  }

  std::set<int> victim_qubits;
  for (const sim::GateOp& gate : victim.ops) {
    victim_qubits.insert(gate.targets.begin(), gate.targets.end());
  }
  noise::QubitSet adversary(adversary_qubits.begin(), adversary_qubits.end());
  std::sort(adversary.begin(), adversary.end());
  adversary.erase(std::unique(adversary.begin(), adversary.end()),
                  adversary.end());
  for (int q : adversary) {
    if (q < 0 || q >= device.n_qubits) {
      throw std::invalid_argument(
          "simulate_fault_injection: adversary qubit out of range");
    }
    if (victim_qubits.count(q)) {
      throw std::invalid_argument(
          "simulate_fault_injection: adversary overlaps the victim");
    }
  }

  bool touches = false;
  for (int a : adversary) {
    for (int v : victim_qubits) {
      if (noise::adjacent(device, a, v)) touches = true;
    }
  }
  if (arm == PlacementArm::Adjacent && !touches) {
    throw std::invalid_argument(
        "simulate_fault_injection: adjacent arm has no coupling into the victim");
  }
  if (arm == PlacementArm::Buffered && touches) {
    throw std::invalid_argument(
        "simulate_fault_injection: buffered arm still borders the victim");
  }

  const sim::Distribution ideal = sim::probabilities(sim::run_circuit(victim));
  const double top = ideal.probabilities.maxCoeff();
  std::set<std::uint64_t> ideal_outcomes;
  for (Eigen::Index i = 0; i < ideal.probabilities.size(); ++i) {
    if (ideal.probabilities[i] >= top - 1e-9) {
      ideal_outcomes.insert(static_cast<std::uint64_t>(i));
    }
  }

  const noise::ConcurrentSchedule schedule(victim.ops.size(), adversary);
  const auto counts =
      noise::run_noisy_counts(victim, device, shots, seed, &schedule);
  std::int64_t hits = 0;
  for (const auto& [outcome, count] : counts) {
    if (ideal_outcomes.count(outcome)) hits += count;
  }
  return static_cast<double>(hits) / static_cast<double>(shots);
}

}  // namespace qmlsec::security

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qmlsec/noise.hpp"
#include "qmlsec/sim.hpp"

namespace qmlsec::security {

// Per-qubit readout fingerprint: bias = estimated P(read 1), bit = bias > 0.5.
struct Signature {
  std::string device_id;
  std::int64_t shots = 0;
  std::vector<double> biases;
  std::vector<int> bits;
};

// variant "hadamard": H on every qubit, measure. variant "decoherence":
// X on every qubit, wait `delay`, measure; requires delay > 0.
Signature qupuf_signature(const noise::DeviceProfile& device,
                          const std::string& variant, std::int64_t shots,
                          std::optional<double> delay, std::uint64_t seed);

// differing-bit fraction in [0, 1]
double hamming_fraction(const Signature& a, const Signature& b);

// CSV `qubit,bias,bit`
void save_signature_csv(const Signature& signature, const std::string& path);
Signature load_signature_csv(const std::string& path);

enum class SplitPolicy { ByGateCount, ByLayer };

struct Fragment {
  int index = 0;
  int total = 1;
  sim::Circuit circuit;
};

// Contiguous partition into k fragments. ByGateCount cuts at near-equal op
// counts; ByLayer groups whole dependency layers (ops sharing no qubit with an
// earlier op in the same layer) and cuts on layer boundaries.
std::vector<Fragment> split_circuit(const sim::Circuit& circuit, int k,
                                    SplitPolicy policy);

// Seeded permutation; indices stay intact so recombination is unaffected.
void shuffle_fragments(std::vector<Fragment>& fragments, std::uint64_t seed);

// Concatenation in index order. Indices must cover 0..k-1 exactly once and
// all fragments must agree on the qubit count.
sim::Circuit recombine_circuit(const std::vector<Fragment>& fragments);

// Circuit text plus a `fragment i of k` header line.
void save_fragment(const Fragment& fragment, const std::string& path);
Fragment load_fragment(const std::string& path);

enum class DummyKind { Swap, ZZ };
enum class RankMode { Exhaustive, Heuristic };

struct InsertionPoint {
  int position = 0;               // op boundary, 0..op_count
  std::pair<int, int> edge;       // coupling-map edge, first < second
  double score = 0.0;
};

// Candidates are every op boundary crossed with every coupling edge.
// Exhaustive mode scores the TVD between the original and the obfuscated
// output distribution (ZZ probes use angle pi). Heuristic mode needs no
// simulation: it tracks each wire classically through the prefix (|0>, |1>,
// or superposed once a non-classical gate touches it) and scores how
// distinguishable the edge pair is at the boundary: opposite basis values 3,
// basis vs superposed 2, both superposed 1, identical basis 0. Descending
// score, ties by position then lower edge.
std::vector<InsertionPoint> rank_insertion_points(
    const sim::Circuit& circuit, const noise::DeviceProfile& device,
    DummyKind kind, RankMode mode);

struct DummySelection {
  int position = 0;
  std::pair<int, int> edge;
  DummyKind kind = DummyKind::Swap;
};

struct KeyEntry {
  int position = 0;  // op index in the obfuscated circuit
  sim::GateKind kind = sim::GateKind::SWAP;
  std::array<int, 2> targets = {0, 0};
  std::optional<int> decoy_param;  // ZZ decoys get a fresh parameter slot

  bool operator==(const KeyEntry&) const = default;
};

struct SecurityKey {
  std::vector<KeyEntry> entries;
};

// SWAP decoys are inserted verbatim; ZZ decoys are parameterized with a fresh
// param_index past the circuit's existing count. Positions refer to the
// original circuit and may repeat.
std::pair<sim::Circuit, SecurityKey> insert_dummy_gates(
    const sim::Circuit& circuit, const std::vector<DummySelection>& selections);

// Removes keyed gates in reverse entry order, verifying each matches its
// record; throws on any mismatch.
sim::Circuit restore_circuit(const sim::Circuit& obfuscated,
                             const SecurityKey& key);

void save_key(const SecurityKey& key, const std::string& path);
SecurityKey load_key(const std::string& path);

struct Allocation {
  std::vector<std::vector<int>> programs;  // sorted qubit sets, input order
  std::vector<int> buffer;                 // unassigned neighbors of programs
};

// Greedy largest-first placement of connected programs; no coupling edge may
// join two programs, so their shared neighbors become buffer qubits.
Allocation allocate_with_buffers(
    int n_qubits, const std::vector<std::pair<int, int>>& coupling_map,
    const std::vector<int>& program_sizes);

enum class PlacementArm { Adjacent, Buffered };

// Adversary drives its qubits concurrently with every victim op. The arm
// label is validated against the geometry: Adjacent needs at least one
// coupling edge into the victim's qubits, Buffered forbids all of them.
// Returns the fraction of shots landing in the noiseless argmax outcome set.
double simulate_fault_injection(const sim::Circuit& victim,
                                const std::vector<int>& adversary_qubits,
                                const noise::DeviceProfile& device,
                                PlacementArm arm, std::int64_t shots,
                                std::uint64_t seed);

}  // namespace qmlsec::security

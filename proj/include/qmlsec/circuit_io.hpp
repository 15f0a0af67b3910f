#pragma once

#include "qmlsec/sim.hpp"

#include <filesystem>
#include <string>

// Line-based circuit text format (UTF-8):
//   qubits N
//   KIND q0[,q1][ angle=<radians>|param=<index>][ dur=<t>]
// '#' starts a comment; blank lines are ignored. Parsing is exact: unknown
// kinds, bad arity, or malformed fields are hard errors.
namespace qmlsec::sim {

std::string to_text(const Circuit& circuit);
Circuit circuit_from_text(const std::string& text);

Circuit load_circuit(const std::filesystem::path& path);
void save_circuit(const Circuit& circuit, const std::filesystem::path& path);

// Canonical shortest-round-trip formatting shared by every text artifact
// so identical runs serialize byte-identically.
std::string format_double(double value);

}  // namespace qmlsec::sim

#include "qmlsec/circuit_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace qmlsec::sim {

namespace {

std::string strip(const std::string& line) {
  std::string s = line;
  if (const auto hash = s.find('#'); hash != std::string::npos) {
    s.erase(hash);
  }
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> tokens;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  return tokens;
}

double parse_double(const std::string& s, int line_no) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("circuit line " + std::to_string(line_no) +
                                ": bad number '" + s + "'");
  }
}

int parse_int(const std::string& s, int line_no) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw std::invalid_argument("circuit line " + std::to_string(line_no) +
                                ": bad integer '" + s + "'");
  }
  return v;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::string to_text(const Circuit& circuit) {
  std::string out = "qubits " + std::to_string(circuit.n_qubits) + "\n";
  for (const GateOp& gate : circuit.ops) {
    out += to_string(gate.kind);
    out += ' ';
    for (std::size_t i = 0; i < gate.targets.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(gate.targets[i]);
    }
    if (gate.angle) out += " angle=" + format_double(*gate.angle);
    if (gate.param_index) out += " param=" + std::to_string(*gate.param_index);
    if (gate.duration) out += " dur=" + format_double(*gate.duration);
    out += '\n';
  }
  return out;
}

Circuit circuit_from_text(const std::string& text) {
  Circuit circuit;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = strip(raw);
    if (line.empty()) continue;
    const std::vector<std::string> tokens = split_ws(line);
    if (!have_header) {
      if (tokens.size() != 2 || tokens[0] != "qubits") {
        throw std::invalid_argument("circuit line " + std::to_string(line_no) +
                                    ": expected 'qubits N' header");
      }
      circuit.n_qubits = parse_int(tokens[1], line_no);
      have_header = true;
      continue;
    }
    const auto kind = gate_kind_from_string(tokens[0]);
    if (!kind) {
      throw std::invalid_argument("circuit line " + std::to_string(line_no) +
                                  ": unknown gate kind '" + tokens[0] + "'");
    }
    if (tokens.size() < 2) {
      throw std::invalid_argument("circuit line " + std::to_string(line_no) +
                                  ": missing targets");
    }
    GateOp gate;
    gate.kind = *kind;
    std::string targets = tokens[1];
    for (std::size_t start = 0; start <= targets.size();) {
      auto comma = targets.find(',', start);
      if (comma == std::string::npos) comma = targets.size();
      gate.targets.push_back(
          parse_int(targets.substr(start, comma - start), line_no));
      start = comma + 1;
      if (comma == targets.size()) break;
    }
    for (std::size_t i = 2; i < tokens.size(); ++i) {
      const auto eq = tokens[i].find('=');
      if (eq == std::string::npos) {
        throw std::invalid_argument("circuit line " + std::to_string(line_no) +
                                    ": bad field '" + tokens[i] + "'");
      }
      const std::string key = tokens[i].substr(0, eq);
      const std::string value = tokens[i].substr(eq + 1);
      if (key == "angle" && !gate.angle) {
        gate.angle = parse_double(value, line_no);
      } else if (key == "param" && !gate.param_index) {
        gate.param_index = parse_int(value, line_no);
      } else if (key == "dur" && !gate.duration) {
        gate.duration = parse_double(value, line_no);
      } else {
        throw std::invalid_argument("circuit line " + std::to_string(line_no) +
                                    ": unexpected field '" + key + "'");
      }
    }
    validate(gate, circuit.n_qubits < 1 ? kMaxQubits : circuit.n_qubits);
    circuit.ops.push_back(std::move(gate));
  }
  if (!have_header) {
    throw std::invalid_argument("circuit text missing 'qubits N' header");
  }
  validate(circuit);
  return circuit;
}

Circuit load_circuit(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open circuit file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return circuit_from_text(buffer.str());
}

void save_circuit(const Circuit& circuit, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write circuit file " + path.string());
  out << to_text(circuit);
}

}  // namespace qmlsec::sim

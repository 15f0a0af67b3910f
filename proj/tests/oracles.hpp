#pragma once

// Reference implementations the tests trust instead of the library under
// test. The circuit oracle builds explicit 2^n x 2^n gate matrices from
// literal constants and multiplies them out, so it shares no code with the
// in-place amplitude updates in src/sim.cpp.

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <vector>

#include "qmlsec/sim.hpp"

namespace oracle {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline Matrix small_gate_matrix(const qmlsec::sim::GateOp& gate) {
  using qmlsec::sim::GateKind;
  const Complex i(0.0, 1.0);
  double theta = gate.angle.value_or(0.0);
  double c = std::cos(theta / 2.0);
  double s = std::sin(theta / 2.0);
  Matrix m;
  switch (gate.kind) {
    case GateKind::X:
      m = Matrix{{0, 1}, {1, 0}};
      break;
    case GateKind::Y:
      m = Matrix{{0, -i}, {i, 0}};
      break;
    case GateKind::Z:
      m = Matrix{{1, 0}, {0, -1}};
      break;
    case GateKind::H:
      m = Matrix{{1, 1}, {1, -1}} / std::sqrt(2.0);
      break;
    case GateKind::RX:
      m = Matrix{{c, -i * s}, {-i * s, c}};
      break;
    case GateKind::RY:
      m = Matrix{{c, -s}, {s, c}};
      break;
    case GateKind::RZ:
      m = Matrix{{std::exp(-i * (theta / 2.0)), 0},
                 {0, std::exp(i * (theta / 2.0))}};
      break;
    case GateKind::DELAY:
      m = Matrix::Identity(2, 2);
      break;
    // Two-qubit blocks are indexed l = bit(targets[0]) + 2*bit(targets[1]).
    case GateKind::CNOT:
      m = Matrix::Zero(4, 4);
      m(0, 0) = 1;  // control 0 leaves the target alone
      m(2, 2) = 1;
      m(3, 1) = 1;  // control 1 flips it
      m(1, 3) = 1;
      break;
    case GateKind::CZ:
      m = Matrix::Identity(4, 4);
      m(3, 3) = -1;
      break;
    case GateKind::CRX:
      m = Matrix::Identity(4, 4);
      m(1, 1) = c;
      m(3, 3) = c;
      m(1, 3) = -i * s;
      m(3, 1) = -i * s;
      break;
    case GateKind::SWAP:
      m = Matrix::Zero(4, 4);
      m(0, 0) = 1;
      m(3, 3) = 1;
      m(2, 1) = 1;
      m(1, 2) = 1;
      break;
    case GateKind::ZZ:
      m = Matrix::Zero(4, 4);
      m(0, 0) = std::exp(-i * (theta / 2.0));  // even parity
      m(3, 3) = std::exp(-i * (theta / 2.0));
      m(1, 1) = std::exp(i * (theta / 2.0));   // odd parity
      m(2, 2) = std::exp(i * (theta / 2.0));
      break;
    default:
      throw std::logic_error("oracle: unhandled gate kind");
  }
  return m;
}

// Lift the small block onto the full register by rewriting the target bits
// of each basis-state index.
inline Matrix embed(const Matrix& m, const std::vector<int>& targets,
                    int n_qubits) {
  const long dim = 1L << n_qubits;
  const int k = static_cast<int>(targets.size());
  const int sub = 1 << k;
  Matrix full = Matrix::Zero(dim, dim);
  for (long col = 0; col < dim; ++col) {
    int local_col = 0;
    for (int t = 0; t < k; ++t) {
      local_col |= static_cast<int>((col >> targets[t]) & 1) << t;
    }
    for (int local_row = 0; local_row < sub; ++local_row) {
      Complex entry = m(local_row, local_col);
      if (entry == Complex(0.0, 0.0)) continue;
      long row = col;
      for (int t = 0; t < k; ++t) {
        long bit = (local_row >> t) & 1;
        row = (row & ~(1L << targets[t])) | (bit << targets[t]);
      }
      full(row, col) = entry;
    }
  }
  return full;
}

inline Matrix circuit_unitary(const qmlsec::sim::Circuit& circuit) {
  const long dim = 1L << circuit.n_qubits;
  Matrix u = Matrix::Identity(dim, dim);
  for (const auto& gate : circuit.ops) {
    u = embed(small_gate_matrix(gate), gate.targets, circuit.n_qubits) * u;
  }
  return u;
}

inline Vector circuit_state(const qmlsec::sim::Circuit& circuit) {
  const long dim = 1L << circuit.n_qubits;
  Vector init = Vector::Zero(dim);
  init(0) = 1.0;
  return circuit_unitary(circuit) * init;
}

}  // namespace oracle

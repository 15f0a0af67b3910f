#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "oracles.hpp"
#include "qmlsec/circuit_io.hpp"
#include "qmlsec/rng.hpp"
#include "qmlsec/sim.hpp"
#include "test_util.hpp"

using namespace qmlsec;
using sim::Circuit;
using sim::GateKind;
using sim::StateVector;
namespace ops = sim::ops;

namespace {
const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

StateVector run_ops(int n_qubits, std::vector<sim::GateOp> gates) {
  Circuit c{n_qubits, std::move(gates)};
  return sim::run_circuit(c);
}
}  // namespace

TEST_CASE("hadamard puts |0> into an equal superposition") {
  StateVector s = run_ops(1, {ops::h(0)});
  CHECK(std::abs(s.amplitudes(0) - sim::Complex(kInvSqrt2, 0)) < 1e-12);
  CHECK(std::abs(s.amplitudes(1) - sim::Complex(kInvSqrt2, 0)) < 1e-12);
}

TEST_CASE("x flips |0> to |1>") {
  StateVector s = run_ops(1, {ops::x(0)});
  CHECK(std::abs(s.amplitudes(0)) < 1e-15);
  CHECK(std::abs(s.amplitudes(1) - sim::Complex(1, 0)) < 1e-15);
}

TEST_CASE("rz(pi) on |+> kills <X> and leaves <Z> at zero") {
  StateVector s = run_ops(1, {ops::h(0), ops::rz(0, M_PI)});
  CHECK(sim::expectation_z(s, 0) == doctest::Approx(0.0).epsilon(1e-12));
  // <X> = 2 Re(a0* a1)
  double x_exp = 2.0 * std::real(std::conj(s.amplitudes(0)) * s.amplitudes(1));
  CHECK(x_exp == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("empty circuit leaves |0...0>") {
  StateVector s = sim::run_circuit(Circuit{3, {}});
  CHECK(std::abs(s.amplitudes(0) - sim::Complex(1, 0)) < 1e-15);
  CHECK(s.amplitudes.tail(7).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("h then cnot prepares the bell state") {
  StateVector s = run_ops(2, {ops::h(0), ops::cnot(0, 1)});
  CHECK(std::abs(s.amplitudes(0) - sim::Complex(kInvSqrt2, 0)) < 1e-12);
  CHECK(std::abs(s.amplitudes(3) - sim::Complex(kInvSqrt2, 0)) < 1e-12);
  CHECK(std::abs(s.amplitudes(1)) < 1e-15);
  CHECK(std::abs(s.amplitudes(2)) < 1e-15);

  sim::Distribution d = sim::probabilities(s);
  CHECK(d.probabilities(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(d.probabilities(3) == doctest::Approx(0.5).epsilon(1e-12));

  auto [even, odd] = sim::parity_probabilities(s, {0, 1});
  CHECK(even == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(odd == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("probabilities of |0> and H|0>") {
  sim::Distribution p0 = sim::probabilities(sim::zero_state(1));
  CHECK(p0.probabilities(0) == doctest::Approx(1.0));
  CHECK(p0.probabilities(1) == doctest::Approx(0.0));

  sim::Distribution ph = sim::probabilities(run_ops(1, {ops::h(0)}));
  CHECK(ph.probabilities(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(ph.probabilities(1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("controlled gates ignore a zero control") {
  StateVector s = run_ops(2, {ops::crx(0, 1, 1.234)});
  CHECK(std::abs(s.amplitudes(0) - sim::Complex(1, 0)) < 1e-12);

  StateVector t = run_ops(2, {ops::x(0), ops::crx(0, 1, M_PI)});
  // control set: RX(pi) takes the target to -i|1>
  CHECK(std::abs(t.amplitudes(3) - sim::Complex(0, -1)) < 1e-12);
}

TEST_CASE("zz applies parity-dependent phases") {
  double theta = 0.77;
  StateVector s = run_ops(2, {ops::x(0), ops::zz(0, 1, theta)});
  // |01> has odd parity -> phase exp(+i theta/2)
  sim::Complex expected = std::exp(sim::Complex(0, theta / 2.0));
  CHECK(std::abs(s.amplitudes(1) - expected) < 1e-12);
}

TEST_CASE("sample_counts is deterministic and conserves shots") {
  sim::Distribution point{Eigen::Vector2d(1.0, 0.0)};
  auto counts = sim::sample_counts(point, 100, 5);
  CHECK(counts.size() == 1);
  CHECK(counts[0] == 100);

  sim::Distribution fair{Eigen::Vector2d(0.5, 0.5)};
  auto a = sim::sample_counts(fair, 1000000, 42);
  auto b = sim::sample_counts(fair, 1000000, 42);
  CHECK(a == b);
  std::int64_t total = 0;
  for (auto& [k, v] : a) total += v;
  CHECK(total == 1000000);
  // 3 sigma of a fair binomial at 1e6 shots
  double sigma = std::sqrt(1e6 * 0.25);
  CHECK(std::abs(static_cast<double>(a[0]) - 5e5) < 3 * sigma);

  CHECK_THROWS_AS(sim::sample_counts(fair, 0, 1), std::invalid_argument);
}

TEST_CASE("expectation_z on eigenstates and a rotated state") {
  CHECK(sim::expectation_z(sim::zero_state(1), 0) == doctest::Approx(1.0));
  CHECK(sim::expectation_z(run_ops(1, {ops::x(0)}), 0) == doctest::Approx(-1.0));
  StateVector r = run_ops(1, {ops::rx(0, M_PI / 2.0)});
  CHECK(std::abs(sim::expectation_z(r, 0)) < 1e-10);
  CHECK_THROWS_AS(sim::expectation_z(r, 1), std::invalid_argument);
}

TEST_CASE("parity probabilities on basis states") {
  auto [e0, o0] = sim::parity_probabilities(sim::zero_state(2), {0, 1});
  CHECK(e0 == doctest::Approx(1.0));
  CHECK(o0 == doctest::Approx(0.0));

  auto [e1, o1] = sim::parity_probabilities(run_ops(2, {ops::x(0)}), {0, 1});
  CHECK(e1 == doctest::Approx(0.0));
  CHECK(o1 == doctest::Approx(1.0));

  CHECK_THROWS_AS(sim::parity_probabilities(sim::zero_state(2), {}),
                  std::invalid_argument);
}

TEST_CASE("total variation distance basics") {
  sim::Distribution p{Eigen::Vector2d(1.0, 0.0)};
  sim::Distribution q{Eigen::Vector2d(0.0, 1.0)};
  sim::Distribution h{Eigen::Vector2d(0.5, 0.5)};
  CHECK(sim::total_variation_distance(p, p) == doctest::Approx(0.0));
  CHECK(sim::total_variation_distance(p, q) == doctest::Approx(1.0));
  CHECK(sim::total_variation_distance(p, h) == doctest::Approx(0.5));
  sim::Distribution bad{Eigen::Vector3d(1.0, 0.0, 0.0)};
  CHECK_THROWS_AS(sim::total_variation_distance(p, bad), std::invalid_argument);
}

TEST_CASE("tvd is a metric on random distribution triples") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    auto draw = [&] {
      Eigen::VectorXd v(8);
      for (int i = 0; i < 8; ++i) v(i) = uniform_double(rng) + 1e-3;
      v /= v.sum();
      return sim::Distribution{v};
    };
    sim::Distribution a = draw(), b = draw(), c = draw();
    double ab = sim::total_variation_distance(a, b);
    double ba = sim::total_variation_distance(b, a);
    double ac = sim::total_variation_distance(a, c);
    double cb = sim::total_variation_distance(c, b);
    CHECK(ab == doctest::Approx(ba));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    CHECK(ab <= ac + cb + 1e-12);
  }
}

TEST_CASE("random circuits match the dense matrix-chain oracle") {
  std::mt19937_64 rng(31337);
  for (int trial = 0; trial < 40; ++trial) {
    int n = 1 + static_cast<int>(uniform_int(rng, 0, 2));
    int g = 1 + static_cast<int>(uniform_int(rng, 0, 19));
    Circuit circuit = testutil::random_circuit(rng, n, g);
    StateVector s = sim::run_circuit(circuit);
    oracle::Vector expected = oracle::circuit_state(circuit);
    CHECK(testutil::max_amplitude_diff(s.amplitudes, expected) < 1e-10);
    CHECK(sim::norm_error(s) < 1e-10);
  }
}

TEST_CASE("self-inverse gates undo themselves") {
  std::mt19937_64 rng(99);
  Circuit base = testutil::random_circuit(rng, 2, 6);
  StateVector s = sim::run_circuit(base);
  for (auto gate : {ops::x(0), ops::h(1), ops::z(0), ops::swap(0, 1),
                    ops::cnot(1, 0)}) {
    StateVector twice = sim::apply_gate(sim::apply_gate(s, gate), gate);
    CHECK(testutil::max_amplitude_diff(twice.amplitudes, s.amplitudes) < 1e-10);
  }
}

TEST_CASE("delay is a noiseless identity") {
  std::mt19937_64 rng(123);
  Circuit base = testutil::random_circuit(rng, 2, 5);
  StateVector before = sim::run_circuit(base);
  base.ops.push_back(ops::delay(0, 3.5));
  StateVector after = sim::run_circuit(base);
  CHECK(testutil::max_amplitude_diff(before.amplitudes, after.amplitudes) == 0.0);
}

TEST_CASE("validation rejects malformed gates and circuits") {
  CHECK_THROWS_AS(sim::validate(Circuit{0, {}}), std::invalid_argument);
  CHECK_THROWS_AS(sim::validate(Circuit{17, {}}), std::invalid_argument);
  CHECK_THROWS_AS(sim::validate(ops::x(2), 2), std::invalid_argument);
  CHECK_THROWS_AS(sim::validate(ops::cnot(1, 1), 2), std::invalid_argument);

  sim::GateOp both = ops::rx(0, 0.5);
  both.param_index = 0;
  CHECK_THROWS_AS(sim::validate(both, 1), std::invalid_argument);

  sim::GateOp neither = ops::rx(0, 0.5);
  neither.angle.reset();
  CHECK_THROWS_AS(sim::validate(neither, 1), std::invalid_argument);

  // unresolved parameter at execution time
  Circuit unbound{1, {ops::rx_param(0, 0)}};
  CHECK_THROWS_AS(sim::run_circuit(unbound), std::invalid_argument);
}

TEST_CASE("bind_parameters resolves every referenced slot") {
  Circuit c{2, {ops::rx_param(0, 0), ops::h(1), ops::zz_param(0, 1, 1)}};
  CHECK(sim::parameter_count(c) == 2);
  Eigen::VectorXd theta(2);
  theta << 0.3, 0.9;
  Circuit bound = sim::bind_parameters(c, theta);
  CHECK(sim::parameter_count(bound) == 0);
  CHECK(bound.ops[0].angle == 0.3);
  CHECK_FALSE(bound.ops[0].param_index.has_value());
  CHECK(bound.ops[2].angle == 0.9);

  Eigen::VectorXd shorter(1);
  shorter << 0.3;
  CHECK_THROWS_AS(sim::bind_parameters(c, shorter), std::invalid_argument);
}

TEST_CASE("circuit text round trips exactly") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    Circuit c = testutil::random_circuit(rng, 3, 12);
    std::string text = sim::to_text(c);
    Circuit back = sim::circuit_from_text(text);
    CHECK(back == c);
    CHECK(sim::to_text(back) == text);
  }

  Circuit parametric{2, {ops::rx_param(0, 0), ops::crx_param(0, 1, 1)}};
  Circuit back = sim::circuit_from_text(sim::to_text(parametric));
  CHECK(back == parametric);
}

TEST_CASE("circuit text parser rejects junk") {
  CHECK_THROWS(sim::circuit_from_text("qubits 2\nFOO 0\n"));
  CHECK_THROWS(sim::circuit_from_text("qubits 2\nCNOT 0\n"));
  CHECK_THROWS(sim::circuit_from_text("CNOT 0,1\n"));
  CHECK_THROWS(sim::circuit_from_text("qubits 2\nRX 0\n"));  // missing angle
  // comments and blank lines are fine
  Circuit ok = sim::circuit_from_text("# header\nqubits 2\n\nH 0\nCNOT 0,1\n");
  CHECK(ok.ops.size() == 2);
}

TEST_CASE("z_expectations and distribution_from_counts agree with direct computation") {
  StateVector s = run_ops(2, {ops::h(0), ops::x(1)});
  Eigen::VectorXd z = sim::z_expectations(sim::probabilities(s), 2);
  CHECK(z(0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(z(1) == doctest::Approx(-1.0).epsilon(1e-12));

  std::map<std::uint64_t, std::int64_t> counts{{0, 25}, {3, 75}};
  sim::Distribution d = sim::distribution_from_counts(counts, 2);
  CHECK(d.probabilities(0) == doctest::Approx(0.25));
  CHECK(d.probabilities(3) == doctest::Approx(0.75));
  CHECK(d.probabilities(1) == doctest::Approx(0.0));
}

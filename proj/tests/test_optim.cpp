#include <doctest.h>

#include <cmath>

#include "qmlsec/optim.hpp"

using namespace qmlsec::qnn;

TEST_CASE("zero gradient moves nothing") {
  Eigen::VectorXd params = Eigen::Vector3d(1.0, -2.0, 0.5);
  Eigen::VectorXd zero = Eigen::Vector3d::Zero();

  AdagradState ag;
  Eigen::VectorXd p = params;
  adagrad_step(p, zero, ag, 0.5);
  CHECK(p == params);

  AdamState ad;
  p = params;
  adam_step(p, zero, ad, 0.1);
  CHECK(p == params);
}

TEST_CASE("adagrad first step with unit gradient") {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(1);
  Eigen::VectorXd g = Eigen::VectorXd::Ones(1);
  AdagradState state;
  adagrad_step(p, g, state, 0.5);
  // -lr * g / (sqrt(g^2) + 1e-10)
  CHECK(p(0) == doctest::Approx(-0.5).epsilon(1e-9));
  CHECK(state.accum(0) == doctest::Approx(1.0));
}

TEST_CASE("adagrad accumulates squared gradients") {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(1);
  Eigen::VectorXd g = Eigen::VectorXd::Constant(1, 2.0);
  AdagradState state;
  adagrad_step(p, g, state, 1.0);
  adagrad_step(p, g, state, 1.0);
  CHECK(state.accum(0) == doctest::Approx(8.0));
  // second step: -2 / sqrt(8)
  CHECK(p(0) == doctest::Approx(-1.0 - 2.0 / std::sqrt(8.0)).epsilon(1e-9));
}

TEST_CASE("adam minimizes a shifted quadratic") {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
  AdamState state;
  for (int step = 0; step < 500; ++step) {
    Eigen::VectorXd g(1);
    g(0) = 2.0 * (x(0) - 2.0);
    adam_step(x, g, state, 0.1);
  }
  CHECK(std::abs(x(0) - 2.0) < 1e-2);
}

TEST_CASE("adam state length mismatch is an error") {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(3);
  AdamState state;
  CHECK_THROWS(adam_step(p, g, state, 0.1));
  AdagradState ag;
  CHECK_THROWS(adagrad_step(p, g, ag, 0.1));
}

TEST_CASE("nelder-mead finds the minimum of a 1-d quadratic") {
  auto objective = [](const Eigen::VectorXd& x) {
    return (x(0) - 2.0) * (x(0) - 2.0);
  };
  Eigen::VectorXd start = Eigen::VectorXd::Zero(1);
  NelderMeadResult result = nelder_mead_minimize(objective, start, {});
  CHECK(std::abs(result.x(0) - 2.0) < 1e-4);
  CHECK(result.value < 1e-8);
}

TEST_CASE("nelder-mead on a constant objective returns a simplex point") {
  auto objective = [](const Eigen::VectorXd&) { return 3.0; };
  Eigen::VectorXd start(2);
  start << 0.4, -0.7;
  NelderMeadOptions options;
  options.initial_step = 0.1;
  NelderMeadResult result = nelder_mead_minimize(objective, start, options);
  CHECK(result.value == doctest::Approx(3.0));
  // every simplex vertex sits within the initial spread of the start point
  CHECK((result.x - start).cwiseAbs().maxCoeff() <= 0.1 + 1e-12);
}

TEST_CASE("nelder-mead descends the rosenbrock valley") {
  auto rosenbrock = [](const Eigen::VectorXd& v) {
    double a = 1.0 - v(0);
    double b = v(1) - v(0) * v(0);
    return a * a + 100.0 * b * b;
  };
  Eigen::VectorXd start(2);
  start << -1.0, 1.0;
  NelderMeadOptions options;
  options.max_iterations = 2000;
  options.tolerance = 1e-12;
  NelderMeadResult result = nelder_mead_minimize(rosenbrock, start, options);
  CHECK(result.value < 1e-3);
}

TEST_CASE("nelder-mead rejects a non-finite start") {
  auto objective = [](const Eigen::VectorXd& x) { return x(0); };
  Eigen::VectorXd start(1);
  start << std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS(nelder_mead_minimize(objective, start, {}));
}

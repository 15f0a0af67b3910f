#include "qmlsec/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace qmlsec::qnn {

void adagrad_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad,
                  AdagradState& state, double learning_rate) {
  if (state.accum.size() != params.size()) {
    state.accum = Eigen::VectorXd::Zero(params.size());
  }
  if (grad.size() != params.size()) {
    throw std::invalid_argument("adagrad_step: gradient size mismatch");
  }
  state.accum.array() += grad.array().square();
  params.array() -=
      learning_rate * grad.array() / (state.accum.array().sqrt() + 1e-10);
}

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad,
               AdamState& state, double learning_rate, double beta1,
               double beta2, double epsilon) {
  if (state.m.size() != params.size()) {
    state.m = Eigen::VectorXd::Zero(params.size());
    state.v = Eigen::VectorXd::Zero(params.size());
    state.step = 0;
  }
  if (grad.size() != params.size()) {
    throw std::invalid_argument("adam_step: gradient size mismatch");
  }
  state.step += 1;
  state.m = beta1 * state.m + (1.0 - beta1) * grad;
  state.v.array() = beta2 * state.v.array() + (1.0 - beta2) * grad.array().square();
  const double bias1 = 1.0 - std::pow(beta1, state.step);
  const double bias2 = 1.0 - std::pow(beta2, state.step);
  params.array() -= learning_rate * (state.m.array() / bias1) /
                    ((state.v.array() / bias2).sqrt() + epsilon);
}

NelderMeadResult nelder_mead_minimize(
    const std::function<double(const Eigen::VectorXd&)>& objective,
    const Eigen::VectorXd& initial, const NelderMeadOptions& options) {
  const int n = static_cast<int>(initial.size());
  if (n == 0) {
    throw std::invalid_argument("nelder_mead_minimize: empty parameter vector");
  }

  auto eval_at = [&](const Eigen::VectorXd& x) {
    double f = objective(x);
    if (!std::isfinite(f)) {
      throw std::invalid_argument(
          "nelder_mead_minimize: objective returned a non-finite value");
    }
    return f;
  };

  const double alpha = 1.0;  // reflect
  const double gamma = 2.0;  // expand
  const double rho = 0.5;    // contract
  const double sigma = 0.5;  // shrink

  std::vector<Eigen::VectorXd> simplex;
  simplex.reserve(n + 1);
  simplex.push_back(initial);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd v = initial;
    v[i] += options.initial_step;
    simplex.push_back(std::move(v));
  }
  std::vector<double> values(n + 1);
  for (int i = 0; i <= n; ++i) values[i] = eval_at(simplex[i]);

  std::vector<int> order(n + 1);
  auto sort_simplex = [&] {
    for (int i = 0; i <= n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return values[a] < values[b]; });
    std::vector<Eigen::VectorXd> sx(n + 1);
    std::vector<double> sv(n + 1);
    for (int i = 0; i <= n; ++i) {
      sx[i] = simplex[order[i]];
      sv[i] = values[order[i]];
    }
    simplex.swap(sx);
    values.swap(sv);
  };

  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    sort_simplex();

    double spread = 0.0;
    for (int i = 1; i <= n; ++i) {
      spread = std::max(spread, (simplex[i] - simplex[0]).norm());
    }
    if (spread < options.tolerance) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) centroid += simplex[i];
    centroid /= static_cast<double>(n);

    Eigen::VectorXd reflected = centroid + alpha * (centroid - simplex[n]);
    const double f_r = eval_at(reflected);

    if (f_r < values[0]) {
      Eigen::VectorXd expanded = centroid + gamma * (reflected - centroid);
      const double f_e = eval_at(expanded);
      if (f_e < f_r) {
        simplex[n] = std::move(expanded);
        values[n] = f_e;
      } else {
        simplex[n] = std::move(reflected);
        values[n] = f_r;
      }
      continue;
    }
    if (f_r < values[n - 1]) {
      simplex[n] = std::move(reflected);
      values[n] = f_r;
      continue;
    }

    Eigen::VectorXd contracted = centroid + rho * (simplex[n] - centroid);
    const double f_c = eval_at(contracted);
    if (f_c < values[n]) {
      simplex[n] = std::move(contracted);
      values[n] = f_c;
      continue;
    }

    for (int i = 1; i <= n; ++i) {
      simplex[i] = simplex[0] + sigma * (simplex[i] - simplex[0]);
      values[i] = eval_at(simplex[i]);
    }
  }

  sort_simplex();
  NelderMeadResult result;
  result.x = simplex[0];
  result.value = values[0];
  result.iterations = iter;
  return result;
}

}  // namespace qmlsec::qnn

#pragma once

#include <Eigen/Dense>

#include <functional>

namespace qmlsec::qnn {

struct AdagradState {
  Eigen::VectorXd accum;  // running sum of squared gradients
};

// params -= lr * grad / (sqrt(accum) + 1e-10)
void adagrad_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad,
                  AdagradState& state, double learning_rate);

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  int step = 0;
};

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad,
               AdamState& state, double learning_rate, double beta1 = 0.9,
               double beta2 = 0.999, double epsilon = 1e-8);

struct NelderMeadOptions {
  int max_iterations = 2000;
  double tolerance = 1e-8;   // simplex spread (max vertex distance to best)
  double initial_step = 0.1;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
};

// Standard reflection/expansion/contraction/shrink simplex search
// (alpha = 1, gamma = 2, rho = 0.5, sigma = 0.5).
NelderMeadResult nelder_mead_minimize(
    const std::function<double(const Eigen::VectorXd&)>& objective,
    const Eigen::VectorXd& initial, const NelderMeadOptions& options = {});

}  // namespace qmlsec::qnn

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace pdanse {

// Bias-corrected Adam over a flat parameter vector.
struct OptimizerState {
  long step_count = 0;
  Eigen::VectorXd first_moment;
  Eigen::VectorXd second_moment;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static OptimizerState create(Eigen::Index n, double lr) {
    OptimizerState s;
    s.first_moment = Eigen::VectorXd::Zero(n);
    s.second_moment = Eigen::VectorXd::Zero(n);
    s.lr = lr;
    return s;
  }
};

inline void adam_update(OptimizerState& state, Eigen::VectorXd& params,
                        const Eigen::VectorXd& grad) {
  if (params.size() != grad.size() || params.size() != state.first_moment.size()) {
    throw std::invalid_argument("adam_update: size mismatch");
  }
  ++state.step_count;
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grad;
  state.second_moment =
      state.beta2 * state.second_moment.array() + (1.0 - state.beta2) * grad.array().square();
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  params.array() -= state.lr * (state.first_moment.array() / c1) /
                    ((state.second_moment.array() / c2).sqrt() + state.eps);
}

}  // namespace pdanse

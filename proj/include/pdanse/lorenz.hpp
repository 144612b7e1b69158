#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

#include "pdanse/random.hpp"

namespace pdanse {

// Time-major sequence of 3-d states produced by the stochastic chaotic
// process. dt and the process-noise variance travel with the data.
struct StateTrajectory {
  std::vector<Eigen::Vector3d> states;
  double dt = 0.02;
  double process_noise_var = 0.0;

  int length() const { return static_cast<int>(states.size()); }
};

// State-dependent drift matrix of the Lorenz-63 system (sigma=10, rho=28,
// beta=8/3), before scaling by the step size.
inline Eigen::Matrix3d lorenz_matrix(const Eigen::Vector3d& x) {
  Eigen::Matrix3d a;
  a << -10.0, 10.0, 0.0,
        28.0, -1.0, -x[0],
         0.0, x[0], -8.0 / 3.0;
  return a;
}

// Truncated matrix exponential sum_{k=0}^{order} M^k / k!, evaluated in
// Horner form.
inline Eigen::Matrix3d taylor_expm(const Eigen::Matrix3d& m, int order) {
  if (order < 1) throw std::invalid_argument("taylor_expm: order must be >= 1");
  Eigen::Matrix3d s = Eigen::Matrix3d::Identity();
  for (int k = order; k >= 1; --k) {
    s = Eigen::Matrix3d::Identity() + (m / static_cast<double>(k)) * s;
  }
  return s;
}

// One transition: x' = expm(A(x) dt) x + noise, with the exponential
// truncated at the given Taylor order.
inline Eigen::Vector3d stm_step(const Eigen::Vector3d& x, const Eigen::Vector3d& noise,
                                double dt = 0.02, int order = 5) {
  return taylor_expm(lorenz_matrix(x) * dt, order) * x + noise;
}

// Draws x_init ~ N(0, I), runs `burn_in` noiseless steps to land on the
// attractor, then records T stochastic steps.
inline StateTrajectory generate_trajectory(int T, double sigma_e2, int burn_in,
                                           std::uint64_t seed, double dt = 0.02,
                                           int order = 5) {
  if (T < 1) throw std::invalid_argument("generate_trajectory: T must be >= 1");
  if (sigma_e2 < 0.0) throw std::invalid_argument("generate_trajectory: negative noise variance");

  NormalSampler rng(seed);
  Eigen::Vector3d x = rng.normal3();
  for (int i = 0; i < burn_in; ++i) {
    x = stm_step(x, Eigen::Vector3d::Zero(), dt, order);
  }

  StateTrajectory out;
  out.dt = dt;
  out.process_noise_var = sigma_e2;
  out.states.reserve(T);
  const double sd = std::sqrt(sigma_e2);
  for (int t = 0; t < T; ++t) {
    x = stm_step(x, sd * rng.normal3(), dt, order);
    out.states.push_back(x);
  }
  return out;
}

}  // namespace pdanse

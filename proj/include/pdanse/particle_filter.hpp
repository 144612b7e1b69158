#pragma once

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <vector>

#include "pdanse/inference.hpp"
#include "pdanse/lorenz.hpp"
#include "pdanse/measurement.hpp"
#include "pdanse/random.hpp"

namespace pdanse {

struct PFConfig {
  int num_particles = 300;
  std::uint64_t seed = 0;
  int burn_in = 100;
  double dt = 0.02;
  int taylor_order = 5;
};

struct PFRunStats {
  int degenerate_resets = 0;
};

// deterministic part of the transition; process noise is added by the filter
using TransitionFn = std::function<Eigen::Vector3d(const Eigen::Vector3d&)>;

// Low-variance systematic resampling: one uniform offset, L evenly spaced
// positions over the weight CDF. Expected multiplicity of particle l is
// L * w_l; uniform weights reproduce every index exactly once.
inline std::vector<int> systematic_resample(const Eigen::VectorXd& log_weights,
                                            NormalSampler& rng) {
  const int n = static_cast<int>(log_weights.size());
  const Eigen::VectorXd w = log_weights.array().exp();
  std::vector<int> indices(n);
  const double offset = rng.uniform01();
  double cumulative = w[0];
  int j = 0;
  for (int i = 0; i < n; ++i) {
    const double position = (static_cast<double>(i) + offset) / static_cast<double>(n);
    while (position > cumulative && j + 1 < n) {
      ++j;
      cumulative += w[j];
    }
    indices[i] = j;
  }
  return indices;
}

// One bootstrap update: propagate every particle through the transition with
// fresh process noise, weight by the measurement likelihood, summarize, then
// resample. Weight degeneracy resets to uniform and is counted rather than
// aborting the trajectory.
inline PosteriorSummary bootstrap_step(Eigen::Matrix3Xd& particles, const Eigen::VectorXd& y,
                                       const MeasurementModel& model,
                                       const TransitionFn& transition, double process_noise_var,
                                       NormalSampler& rng, PFRunStats* stats = nullptr) {
  const int n = static_cast<int>(particles.cols());
  const double sd = std::sqrt(process_noise_var);
  for (int l = 0; l < n; ++l) {
    particles.col(l) = transition(particles.col(l)) + sd * rng.normal3();
  }

  Eigen::VectorXd log_lik(n);
  for (int l = 0; l < n; ++l) log_lik[l] = log_likelihood(y, particles.col(l), model);

  ParticleEnsemble e;
  e.samples = particles;
  e.epsilons.resize(3, 0);
  try {
    e.log_weights = normalize_log_weights(log_lik);
  } catch (const DegenerateWeightsError&) {
    e.log_weights = Eigen::VectorXd::Constant(n, -std::log(static_cast<double>(n)));
    if (stats) ++stats->degenerate_resets;
  }
  const PosteriorSummary summary = posterior_moments(e);

  const std::vector<int> idx = systematic_resample(e.log_weights, rng);
  Eigen::Matrix3Xd resampled(3, n);
  for (int l = 0; l < n; ++l) resampled.col(l) = particles.col(idx[l]);
  particles = std::move(resampled);
  return summary;
}

inline std::vector<PosteriorSummary> run_bootstrap_filter(
    const MeasurementTrajectory& y, const MeasurementModel& model, const TransitionFn& transition,
    double process_noise_var, Eigen::Matrix3Xd initial_particles, NormalSampler& rng,
    PFRunStats* stats = nullptr) {
  std::vector<PosteriorSummary> out;
  out.reserve(y.measurements.size());
  Eigen::Matrix3Xd particles = std::move(initial_particles);
  for (const auto& meas : y.measurements) {
    out.push_back(
        bootstrap_step(particles, meas, model, transition, process_noise_var, rng, stats));
  }
  return out;
}

// Initial cloud matching the data-generation convention: N(0, I) draws
// advanced through noiseless transitions onto the attractor.
inline Eigen::Matrix3Xd lorenz_initial_particles(int n, int burn_in, NormalSampler& rng,
                                                 double dt = 0.02, int order = 5) {
  Eigen::Matrix3Xd particles(3, n);
  for (int l = 0; l < n; ++l) {
    Eigen::Vector3d x = rng.normal3();
    for (int i = 0; i < burn_in; ++i) x = stm_step(x, Eigen::Vector3d::Zero(), dt, order);
    particles.col(l) = x;
  }
  return particles;
}

// Model-driven baseline for the chaotic benchmark process.
inline std::vector<PosteriorSummary> bootstrap_filter(const MeasurementTrajectory& y,
                                                      const PFConfig& cfg,
                                                      double process_noise_var,
                                                      const MeasurementModel& model,
                                                      PFRunStats* stats = nullptr) {
  if (cfg.num_particles < 1) throw std::invalid_argument("bootstrap_filter: need particles");
  NormalSampler rng(cfg.seed);
  Eigen::Matrix3Xd init =
      lorenz_initial_particles(cfg.num_particles, cfg.burn_in, rng, cfg.dt, cfg.taylor_order);
  const TransitionFn transition = [&cfg](const Eigen::Vector3d& x) {
    return stm_step(x, Eigen::Vector3d::Zero(), cfg.dt, cfg.taylor_order);
  };
  return run_bootstrap_filter(y, model, transition, process_noise_var, std::move(init), rng,
                              stats);
}

// Exact linear-Gaussian recursion, used to validate the sampler on systems
// where the answer is known in closed form. `prior` describes the state
// before the first transition; each step predicts then updates.
inline std::vector<PosteriorSummary> kalman_filter(const MeasurementTrajectory& y,
                                                   const Eigen::Matrix3d& F,
                                                   const Eigen::MatrixXd& H, double sigma_e2,
                                                   double sigma_w2,
                                                   const GaussianBelief& prior) {
  std::vector<PosteriorSummary> out;
  out.reserve(y.measurements.size());
  Eigen::Vector3d mean = prior.mean;
  Eigen::Matrix3d cov = prior.var.asDiagonal();
  const Eigen::Matrix3d q = sigma_e2 * Eigen::Matrix3d::Identity();
  for (const auto& meas : y.measurements) {
    mean = F * mean;
    cov = F * cov * F.transpose() + q;

    const Eigen::MatrixXd r = H * cov * H.transpose() +
                              sigma_w2 * Eigen::MatrixXd::Identity(H.rows(), H.rows());
    const Eigen::MatrixXd gain = cov * H.transpose() * r.inverse();
    mean += gain * (meas - H * mean);
    cov -= gain * r * gain.transpose();
    cov = 0.5 * (cov + cov.transpose().eval());
    out.push_back({mean, cov});
  }
  return out;
}

}  // namespace pdanse

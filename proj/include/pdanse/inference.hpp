#pragma once

#include <Eigen/Dense>

#include <limits>
#include <stdexcept>
#include <vector>

#include "pdanse/measurement.hpp"
#include "pdanse/numerics.hpp"
#include "pdanse/random.hpp"
#include "pdanse/rnn_prior.hpp"

namespace pdanse {

// Weighted particle set for one time step. The standard-normal draws are kept
// so gradients can flow through mean and scale with the draws held constant.
struct ParticleEnsemble {
  Eigen::Matrix3Xd samples;
  Eigen::Matrix3Xd epsilons;
  Eigen::VectorXd log_weights;  // NaN until weights are computed

  int count() const { return static_cast<int>(samples.cols()); }
};

struct PosteriorSummary {
  Eigen::Vector3d mean;
  Eigen::Matrix3d cov;
};

// Raised when every particle's likelihood underflows even in the log domain.
class DegenerateWeightsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// x^(l) = mean + sqrt(var) .* eps^(l), eps ~ N(0, I). Weights are left unset.
inline ParticleEnsemble sample_prior(const GaussianBelief& belief, int num_samples,
                                     NormalSampler& rng) {
  if (num_samples < 1) throw std::invalid_argument("sample_prior: need at least one sample");
  ParticleEnsemble e;
  e.epsilons.resize(3, num_samples);
  for (int l = 0; l < num_samples; ++l) e.epsilons.col(l) = rng.normal3();
  const Eigen::Vector3d sd = belief.var.cwiseSqrt();
  e.samples = (e.epsilons.array().colwise() * sd.array()).colwise() + belief.mean.array();
  e.log_weights =
      Eigen::VectorXd::Constant(num_samples, std::numeric_limits<double>::quiet_NaN());
  return e;
}

// Normalizes raw log-likelihoods into log-weights via max-subtracted LSE;
// shift-invariant, so offsets of any magnitude cannot overflow.
inline Eigen::VectorXd normalize_log_weights(const Eigen::VectorXd& log_lik) {
  const double m = log_lik.maxCoeff();
  if (!std::isfinite(m)) {
    throw DegenerateWeightsError("normalize_log_weights: no particle has finite likelihood");
  }
  const double lse = m + std::log((log_lik.array() - m).exp().sum());
  return log_lik.array() - lse;
}

inline void compute_log_weights(ParticleEnsemble& e, const Eigen::VectorXd& y,
                                const MeasurementModel& model) {
  Eigen::VectorXd ll(e.count());
  for (int l = 0; l < e.count(); ++l) {
    ll[l] = log_likelihood(y, e.samples.col(l), model);
  }
  e.log_weights = normalize_log_weights(ll);
}

// Weighted first and second central moments of the ensemble.
inline PosteriorSummary posterior_moments(const ParticleEnsemble& e) {
  const Eigen::VectorXd w = e.log_weights.array().exp();
  PosteriorSummary s;
  s.mean = e.samples * w;
  const Eigen::Matrix3Xd centered = e.samples.colwise() - s.mean;
  s.cov = centered * w.asDiagonal() * centered.transpose();
  s.cov = 0.5 * (s.cov + s.cov.transpose().eval());
  return s;
}

// Exact Gaussian update for a linear measurement y = Hx + w: gain
// K = S H^T R^-1 with R = H S H^T + sigma_w^2 I, mean += K (y - H mu),
// cov = S - K R K^T. This is the closed-form route the particle estimates
// are validated against.
inline PosteriorSummary closed_form_linear_update(const GaussianBelief& belief,
                                                  const Eigen::VectorXd& y,
                                                  const Eigen::MatrixXd& H, double sigma_w2) {
  const Eigen::Matrix3d prior_cov = belief.var.asDiagonal();
  const Eigen::MatrixXd r = H * prior_cov * H.transpose() +
                            sigma_w2 * Eigen::MatrixXd::Identity(H.rows(), H.rows());
  Eigen::FullPivLU<Eigen::MatrixXd> lu(r);
  if (!lu.isInvertible()) {
    throw std::runtime_error("closed_form_linear_update: innovation covariance is singular");
  }
  const Eigen::MatrixXd gain = prior_cov * H.transpose() * lu.inverse();
  PosteriorSummary s;
  s.mean = belief.mean + gain * (y - H * belief.mean);
  s.cov = prior_cov - gain * r * gain.transpose();
  s.cov = 0.5 * (s.cov + s.cov.transpose().eval());
  return s;
}

// log N(y; H mu, H S H^T + sigma_w^2 I): the exact marginal the sampled
// lower bound must stay below.
inline double closed_form_log_marginal(const GaussianBelief& belief, const Eigen::VectorXd& y,
                                       const Eigen::MatrixXd& H, double sigma_w2) {
  const Eigen::MatrixXd cov = H * belief.var.asDiagonal() * H.transpose() +
                              sigma_w2 * Eigen::MatrixXd::Identity(H.rows(), H.rows());
  const Eigen::VectorXd mean = H * belief.mean;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("closed_form_log_marginal: covariance not positive definite");
  }
  const Eigen::VectorXd d = y - mean;
  const Eigen::VectorXd sol = llt.solve(d);
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < cov.rows(); ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));
  return -0.5 * (static_cast<double>(y.size()) * kLogTwoPi + log_det + d.dot(sol));
}

// Monte-Carlo bound on log p(y | past): (1/L) sum_l log N(y; h(x^(l)), C_w)
// with x^(l) drawn from the belief. Always at or below the exact marginal.
inline double marginal_ll_lower_bound(const GaussianBelief& belief, const Eigen::VectorXd& y,
                                      const MeasurementModel& model, int num_samples,
                                      NormalSampler& rng) {
  const ParticleEnsemble e = sample_prior(belief, num_samples, rng);
  double acc = 0.0;
  for (int l = 0; l < e.count(); ++l) {
    acc += log_likelihood(y, e.samples.col(l), model);
  }
  return acc / static_cast<double>(num_samples);
}

enum class DegeneratePolicy {
  kThrow,             // propagate DegenerateWeightsError
  kFallBackToPrior,   // substitute the prior belief's moments and keep going
};

struct FilterStats {
  int degenerate_steps = 0;
};

// Causal filtering pass: per step, sample the prior belief, weight by the
// measurement likelihood, and summarize. No resampling and no state carried
// between steps other than the recurrent prior itself.
inline std::vector<PosteriorSummary> filter_sequence(
    const MeasurementTrajectory& y, const PriorNetParams& params, const MeasurementModel& model,
    int num_samples, NormalSampler& rng, DegeneratePolicy policy = DegeneratePolicy::kThrow,
    FilterStats* stats = nullptr) {
  const std::vector<GaussianBelief> beliefs = prior_sequence(params, y);
  std::vector<PosteriorSummary> out(beliefs.size());
  for (std::size_t t = 0; t < beliefs.size(); ++t) {
    ParticleEnsemble e = sample_prior(beliefs[t], num_samples, rng);
    try {
      compute_log_weights(e, y.measurements[t], model);
      out[t] = posterior_moments(e);
    } catch (const DegenerateWeightsError&) {
      if (policy == DegeneratePolicy::kThrow) throw;
      out[t].mean = beliefs[t].mean;
      out[t].cov = beliefs[t].var.asDiagonal();
      if (stats) ++stats->degenerate_steps;
    }
  }
  return out;
}

}  // namespace pdanse

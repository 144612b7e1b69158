#pragma once

#include <Eigen/Dense>

#include <span>
#include <stdexcept>
#include <vector>

#include "pdanse/backprop.hpp"
#include "pdanse/inference.hpp"
#include "pdanse/measurement.hpp"
#include "pdanse/rnn_prior.hpp"

namespace pdanse {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LossGrad {
  double value = 0.0;
  Eigen::VectorXd grad;
};

// One standard-normal block per time step, 3 x L each.
inline std::vector<Eigen::Matrix3Xd> draw_epsilons(int T, int num_samples, NormalSampler& rng) {
  std::vector<Eigen::Matrix3Xd> eps(T);
  for (int t = 0; t < T; ++t) {
    eps[t].resize(3, num_samples);
    for (int l = 0; l < num_samples; ++l) eps[t].col(l) = rng.normal3();
  }
  return eps;
}

// Negative Monte-Carlo measurement bound for one trajectory, beliefs given
// directly: -(1/L) sum_t sum_l log N(y_t; h(mu_t + sqrt(var_t) eps), C_w).
inline double unsupervised_loss_from_beliefs(const std::vector<GaussianBelief>& beliefs,
                                             const MeasurementTrajectory& y,
                                             const MeasurementModel& model,
                                             const std::vector<Eigen::Matrix3Xd>& eps) {
  const int T = y.length();
  if (static_cast<int>(beliefs.size()) != T || static_cast<int>(eps.size()) != T) {
    throw std::invalid_argument("unsupervised_loss_from_beliefs: length mismatch");
  }
  double loss = 0.0;
  for (int t = 0; t < T; ++t) {
    const int L = static_cast<int>(eps[t].cols());
    const Eigen::Vector3d sd = beliefs[t].var.cwiseSqrt();
    double acc = 0.0;
    for (int l = 0; l < L; ++l) {
      const Eigen::Vector3d x = beliefs[t].mean + sd.cwiseProduct(eps[t].col(l));
      acc += log_likelihood(y.measurements[t], x, model);
    }
    loss -= acc / static_cast<double>(L);
  }
  return loss;
}

// Loss and exact reverse-mode gradient for one unlabelled trajectory. The
// sampling path is differentiated through mean and scale with the draws held
// constant.
inline LossGrad unsupervised_loss_grad(const PriorNetParams& params,
                                       const MeasurementTrajectory& y,
                                       const MeasurementModel& model,
                                       const std::vector<Eigen::Matrix3Xd>& eps) {
  PriorForwardCache cache;
  prior_sequence(params, y, &cache);
  const int T = cache.T;
  if (static_cast<int>(eps.size()) != T) {
    throw std::invalid_argument("unsupervised_loss_grad: epsilon block count mismatch");
  }

  double loss = 0.0;
  Eigen::MatrixXd dmu = Eigen::MatrixXd::Zero(kStateDim, T);
  Eigen::MatrixXd dvar = Eigen::MatrixXd::Zero(kStateDim, T);
  const double sigma_w2 = model.noise_var;

  for (int t = 0; t < T; ++t) {
    const int L = static_cast<int>(eps[t].cols());
    const double inv_l = 1.0 / static_cast<double>(L);
    const Eigen::Vector3d var = cache.var.col(t);
    const Eigen::Vector3d sd = var.cwiseSqrt();
    Eigen::Vector3d dmu_t = Eigen::Vector3d::Zero();
    Eigen::Vector3d dsd_t = Eigen::Vector3d::Zero();
    for (int l = 0; l < L; ++l) {
      const Eigen::Vector3d x =
          Eigen::Vector3d(cache.mu.col(t)) + sd.cwiseProduct(eps[t].col(l));
      const Eigen::VectorXd hx = apply_h(model, x);
      const Eigen::VectorXd resid = y.measurements[t] - hx;
      loss -= inv_l * log_normal_isotropic(y.measurements[t], hx, sigma_w2);
      const Eigen::Vector3d dx =
          -inv_l / sigma_w2 * (measurement_jacobian(model, x).transpose() * resid);
      dmu_t += dx;
      dsd_t += dx.cwiseProduct(eps[t].col(l));
    }
    dmu.col(t) = dmu_t;
    dvar.col(t) = 0.5 * dsd_t.cwiseQuotient(sd);
  }

  LossGrad out;
  out.value = loss;
  out.grad = priornet_backward(params, cache, dmu, dvar);
  return out;
}

// Negative joint log-density for one labelled trajectory. The measurement
// term has no parameter dependence; it is included in the value for
// reporting but contributes nothing to the gradient.
inline LossGrad supervised_loss_grad(const PriorNetParams& params, const StateTrajectory& states,
                                     const MeasurementTrajectory& y,
                                     const MeasurementModel& model) {
  if (states.length() != y.length()) {
    throw std::invalid_argument("supervised_loss_grad: state/measurement length mismatch");
  }
  PriorForwardCache cache;
  prior_sequence(params, y, &cache);
  const int T = cache.T;

  double loss = 0.0;
  Eigen::MatrixXd dmu = Eigen::MatrixXd::Zero(kStateDim, T);
  Eigen::MatrixXd dvar = Eigen::MatrixXd::Zero(kStateDim, T);
  for (int t = 0; t < T; ++t) {
    const Eigen::Vector3d& x = states.states[t];
    loss -= log_likelihood(y.measurements[t], x, model);
    const Eigen::Vector3d mu = cache.mu.col(t);
    const Eigen::Vector3d var = cache.var.col(t);
    loss -= log_normal_diagonal(x, mu, var);
    const Eigen::Vector3d d = x - mu;
    dmu.col(t) = -d.cwiseQuotient(var);
    dvar.col(t) =
        0.5 * (var.cwiseInverse() - d.cwiseAbs2().cwiseQuotient(var.cwiseAbs2()));
  }

  LossGrad out;
  out.value = loss;
  out.grad = priornet_backward(params, cache, dmu, dvar);
  return out;
}

// --- dataset-level objective values ---

inline double unsupervised_loss(std::span<const MeasurementTrajectory> batch,
                                const PriorNetParams& params, const MeasurementModel& model,
                                int num_samples, NormalSampler& rng) {
  if (batch.empty()) throw std::invalid_argument("unsupervised_loss: empty batch");
  double loss = 0.0;
  for (const auto& y : batch) {
    const std::vector<GaussianBelief> beliefs = prior_sequence(params, y);
    loss += unsupervised_loss_from_beliefs(beliefs, y, model,
                                           draw_epsilons(y.length(), num_samples, rng));
  }
  return loss;
}

inline double supervised_loss(std::span<const LabelledPair> pairs, const PriorNetParams& params,
                              const MeasurementModel& model) {
  double loss = 0.0;
  for (const auto& pair : pairs) {
    const std::vector<GaussianBelief> beliefs = prior_sequence(params, pair.measurements);
    for (int t = 0; t < pair.states.length(); ++t) {
      loss -= log_likelihood(pair.measurements.measurements[t], pair.states.states[t], model);
      loss -= log_normal_diagonal(pair.states.states[t], beliefs[t].mean, beliefs[t].var);
    }
  }
  return loss;
}

// Joint objective; with no labelled pairs this is exactly the unsupervised
// loss, with no unlabelled trajectories exactly the supervised one.
inline double semi_supervised_objective(std::span<const LabelledPair> labelled,
                                        std::span<const MeasurementTrajectory> unlabelled,
                                        const PriorNetParams& params,
                                        const MeasurementModel& model, int num_samples,
                                        NormalSampler& rng) {
  if (labelled.empty() && unlabelled.empty()) {
    throw std::invalid_argument("semi_supervised_objective: empty dataset");
  }
  double loss = supervised_loss(labelled, params, model);
  if (!unlabelled.empty()) {
    loss += unsupervised_loss(unlabelled, params, model, num_samples, rng);
  }
  return loss;
}

// Summed loss and gradient over a mixed batch; the gradient that reaches the
// optimizer is checked finite here.
inline LossGrad semi_supervised_loss_grad(std::span<const LabelledPair> labelled,
                                          std::span<const MeasurementTrajectory> unlabelled,
                                          const PriorNetParams& params,
                                          const MeasurementModel& model, int num_samples,
                                          NormalSampler& rng) {
  if (labelled.empty() && unlabelled.empty()) {
    throw std::invalid_argument("semi_supervised_loss_grad: empty batch");
  }
  LossGrad total;
  total.grad = Eigen::VectorXd::Zero(params.layout.total());
  for (const auto& pair : labelled) {
    const LossGrad g = supervised_loss_grad(params, pair.states, pair.measurements, model);
    total.value += g.value;
    total.grad += g.grad;
  }
  for (const auto& y : unlabelled) {
    const LossGrad g = unsupervised_loss_grad(params, y, model,
                                              draw_epsilons(y.length(), num_samples, rng));
    total.value += g.value;
    total.grad += g.grad;
  }
  if (!std::isfinite(total.value) || !total.grad.allFinite()) {
    throw TrainingError("loss or gradient is not finite");
  }
  return total;
}

}  // namespace pdanse

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include "pdanse/adam.hpp"
#include "pdanse/dataset.hpp"
#include "pdanse/losses.hpp"
#include "pdanse/rnn_prior.hpp"

namespace pdanse {

struct TrainConfig {
  int batch_size = 128;
  double lr0 = 1e-4;
  double lr_decay = 0.8;   // multiplicative, applied every decay_period epochs
  int decay_period = 20;
  int max_epochs = 200;
  int mc_samples = 10;
  double grad_clip = 10.0;  // global L2 norm of the batch gradient
  double val_fraction = 0.1;
  bool standardize_inputs = false;
  std::uint64_t seed = 0;
};

struct EpochMetrics {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;  // per-trajectory mean over the epoch
  double val_loss = 0.0;
  double wall_time_s = 0.0;
};

struct TrainResult {
  PriorNetParams best_params;
  PriorNetParams final_params;
  int best_epoch = -1;
  std::vector<EpochMetrics> history;
};

using MetricsSink = std::function<void(const EpochMetrics&)>;

namespace detail {

// Pinned Fisher-Yates; std::shuffle's algorithm is implementation-defined and
// training runs must be reproducible from the seed alone.
inline void seeded_shuffle(std::vector<int>& v, std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(engine() % i);
    std::swap(v[i - 1], v[j]);
  }
}

// index < num_labelled addresses the labelled side, the rest the unlabelled
struct SplitIndex {
  std::vector<int> train;
  std::vector<int> val;
};

inline SplitIndex make_split(int n, double val_fraction, std::uint64_t seed) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  seeded_shuffle(idx, seed);
  int n_val = 0;
  if (val_fraction > 0.0 && n >= 2) {
    n_val = std::clamp(static_cast<int>(std::llround(val_fraction * n)), 1, n - 1);
  }
  SplitIndex split;
  split.train.assign(idx.begin(), idx.end() - n_val);
  split.val.assign(idx.end() - n_val, idx.end());
  return split;
}

inline LossGrad trajectory_loss_grad(const Dataset& data, int index, const PriorNetParams& params,
                                     const MeasurementModel& model, int mc_samples,
                                     NormalSampler& rng) {
  if (index < data.num_labelled()) {
    const LabelledPair& pair = data.labelled(index);
    return supervised_loss_grad(params, pair.states, pair.measurements, model);
  }
  const MeasurementTrajectory& y = data.unlabelled(index - data.num_labelled());
  return unsupervised_loss_grad(params, y, model, draw_epsilons(y.length(), mc_samples, rng));
}

inline double trajectory_loss(const Dataset& data, int index, const PriorNetParams& params,
                              const MeasurementModel& model, int mc_samples, NormalSampler& rng) {
  if (index < data.num_labelled()) {
    const LabelledPair& pair = data.labelled(index);
    std::vector<LabelledPair> one{pair};
    return supervised_loss(one, params, model);
  }
  const MeasurementTrajectory& y = data.unlabelled(index - data.num_labelled());
  const std::vector<GaussianBelief> beliefs = prior_sequence(params, y);
  return unsupervised_loss_from_beliefs(beliefs, y, model,
                                        draw_epsilons(y.length(), mc_samples, rng));
}

inline void fit_input_standardization(PriorNetParams& params, const Dataset& data) {
  const Eigen::Index n = params.cfg.input_dim;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(n);
  long count = 0;
  auto accumulate = [&](const MeasurementTrajectory& y) {
    for (const auto& v : y.measurements) {
      sum += v;
      sum_sq += v.cwiseAbs2();
      ++count;
    }
  };
  for (int i = 0; i < data.num_labelled(); ++i) accumulate(data.labelled(i).measurements);
  for (int i = 0; i < data.num_unlabelled(); ++i) accumulate(data.unlabelled(i));
  if (count == 0) return;
  const Eigen::VectorXd mean = sum / static_cast<double>(count);
  const Eigen::VectorXd var =
      (sum_sq / static_cast<double>(count) - mean.cwiseAbs2()).cwiseMax(0.0);
  params.input_shift = mean;
  params.input_scale = var.cwiseSqrt().cwiseMax(1e-8);
}

}  // namespace detail

// Mini-batch optimization of the joint objective. Per epoch: seeded
// reshuffle, summed batch gradients clipped at grad_clip, Adam step at the
// decayed rate; validation loss on the held-out split selects the retained
// parameters. Fully deterministic given the config seed.
inline TrainResult train(const Dataset& data, const MeasurementModel& model,
                         const PriorNetConfig& net_cfg, const TrainConfig& cfg,
                         const MetricsSink& sink = {}) {
  if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
  if (cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");

  PriorNetParams params = init_params(net_cfg, derive_seed(cfg.seed, 0));
  if (cfg.standardize_inputs) detail::fit_input_standardization(params, data);

  TrainResult result;
  result.best_params = params;
  result.final_params = params;
  if (cfg.max_epochs == 0) return result;

  const detail::SplitIndex split = detail::make_split(data.size(), cfg.val_fraction,
                                                      derive_seed(cfg.seed, 1));
  OptimizerState opt = OptimizerState::create(params.flat.size(), cfg.lr0);
  double best_val = std::numeric_limits<double>::infinity();

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = cfg.lr0 * std::pow(cfg.lr_decay, epoch / cfg.decay_period);
    opt.lr = lr;

    std::vector<int> order = split.train;
    detail::seeded_shuffle(order, derive_seed(cfg.seed, 0x100 + static_cast<std::uint64_t>(epoch)));
    NormalSampler eps_rng(derive_seed(cfg.seed, 0x200 + static_cast<std::uint64_t>(epoch)));

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.flat.size());
      for (std::size_t k = start; k < stop; ++k) {
        const LossGrad g =
            detail::trajectory_loss_grad(data, order[k], params, model, cfg.mc_samples, eps_rng);
        epoch_loss += g.value;
        grad += g.grad;
      }
      if (!std::isfinite(epoch_loss) || !grad.allFinite()) {
        throw TrainingError("train: non-finite loss or gradient at epoch " +
                            std::to_string(epoch));
      }
      const double norm = grad.norm();
      if (norm > cfg.grad_clip) grad *= cfg.grad_clip / norm;
      adam_update(opt, params.flat, grad);
    }

    // same eval seed every epoch: validation draws are common across epochs
    NormalSampler val_rng(derive_seed(cfg.seed, 0x300));
    double val_loss = 0.0;
    if (!split.val.empty()) {
      for (int idx : split.val) {
        val_loss += detail::trajectory_loss(data, idx, params, model, cfg.mc_samples, val_rng);
      }
      val_loss /= static_cast<double>(split.val.size());
    } else {
      val_loss = epoch_loss / static_cast<double>(order.size());
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.lr = lr;
    m.train_loss = order.empty() ? 0.0 : epoch_loss / static_cast<double>(order.size());
    m.val_loss = val_loss;
    m.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(m);
    if (sink) sink(m);

    if (val_loss < best_val) {
      best_val = val_loss;
      result.best_params = params;
      result.best_epoch = epoch;
    }
  }

  result.final_params = params;
  if (result.best_epoch < 0) {
    result.best_params = result.final_params;
  }
  return result;
}

}  // namespace pdanse

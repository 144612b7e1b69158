#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "pdanse/inference.hpp"
#include "pdanse/lorenz.hpp"

namespace pdanse {

// numerically perfect estimates report this floor instead of -inf
inline constexpr double kNmseFloorDb = -100.0;

// Per-trajectory normalized squared error in dB: 10 log10(sum_t ||x - xhat||^2
// / sum_t ||x||^2), floored so aggregates stay finite.
inline double trajectory_nmse_db(const StateTrajectory& truth,
                                 std::span<const PosteriorSummary> estimate) {
  if (truth.length() != static_cast<int>(estimate.size())) {
    throw std::invalid_argument("trajectory_nmse_db: length mismatch");
  }
  double num = 0.0;
  double den = 0.0;
  for (int t = 0; t < truth.length(); ++t) {
    num += (truth.states[t] - estimate[t].mean).squaredNorm();
    den += truth.states[t].squaredNorm();
  }
  if (den == 0.0) throw std::invalid_argument("trajectory_nmse_db: zero reference signal");
  if (num == 0.0) return kNmseFloorDb;
  return std::max(kNmseFloorDb, 10.0 * std::log10(num / den));
}

inline std::vector<double> per_trajectory_nmse_db(
    std::span<const StateTrajectory> truth,
    std::span<const std::vector<PosteriorSummary>> estimates) {
  if (truth.size() != estimates.size()) {
    throw std::invalid_argument("per_trajectory_nmse_db: trajectory count mismatch");
  }
  std::vector<double> out;
  out.reserve(truth.size());
  for (std::size_t j = 0; j < truth.size(); ++j) {
    out.push_back(trajectory_nmse_db(truth[j], estimates[j]));
  }
  return out;
}

// Mean of the per-trajectory dB values.
inline double nmse_db(std::span<const StateTrajectory> truth,
                      std::span<const std::vector<PosteriorSummary>> estimates) {
  const std::vector<double> vals = per_trajectory_nmse_db(truth, estimates);
  if (vals.empty()) throw std::invalid_argument("nmse_db: no trajectories");
  double acc = 0.0;
  for (double v : vals) acc += v;
  return acc / static_cast<double>(vals.size());
}

inline double sample_std(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double acc = 0.0;
  for (double v : values) acc += (v - mean) * (v - mean);
  return std::sqrt(acc / static_cast<double>(values.size() - 1));
}

}  // namespace pdanse

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>

namespace pdanse {

inline constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

// log(sum_i exp(v[i])), computed with max-subtraction so constant offsets of
// any magnitude neither overflow nor change the relative result.
inline double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) {
    return m;  // all -inf (or a NaN/inf poisoned input): nothing to stabilize
  }
  const double s = (v.array() - m).exp().sum();
  return m + std::log(s);
}

// log N(y; mean, sigma2 * I)
inline double log_normal_isotropic(const Eigen::Ref<const Eigen::VectorXd>& y,
                                   const Eigen::Ref<const Eigen::VectorXd>& mean,
                                   double sigma2) {
  const double n = static_cast<double>(y.size());
  const double q = (y - mean).squaredNorm();
  return -0.5 * n * (kLogTwoPi + std::log(sigma2)) - q / (2.0 * sigma2);
}

// log N(x; mean, diag(var))
inline double log_normal_diagonal(const Eigen::Ref<const Eigen::VectorXd>& x,
                                  const Eigen::Ref<const Eigen::VectorXd>& mean,
                                  const Eigen::Ref<const Eigen::VectorXd>& var) {
  const double n = static_cast<double>(x.size());
  double acc = -0.5 * n * kLogTwoPi;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double d = x[i] - mean[i];
    acc -= 0.5 * (std::log(var[i]) + d * d / var[i]);
  }
  return acc;
}

// FNV-1a, used to fingerprint canonical config strings in file manifests.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace pdanse

#pragma once

// Test-only reference implementations, kept independent of the library code
// paths they validate.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <stdexcept>

namespace oracle {

// Matrix exponential by scaling and squaring: squeeze the norm below 2^-6,
// run a long plain term-by-term Taylor sum, then square back up. Accurate to
// ~1e-12 relative for the matrices exercised here; shares no code with the
// truncated-exponential implementation under test.
inline Eigen::Matrix3d expm_scaling_squaring(const Eigen::Matrix3d& m) {
  const double norm = m.cwiseAbs().rowwise().sum().maxCoeff();  // infinity norm
  int squarings = 0;
  double scale = 1.0;
  while (norm * scale > 0.015625) {  // 2^-6
    ++squarings;
    scale *= 0.5;
  }
  const Eigen::Matrix3d a = m * scale;

  Eigen::Matrix3d sum = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d term = Eigen::Matrix3d::Identity();
  for (int k = 1; k <= 24; ++k) {
    term = term * a / static_cast<double>(k);
    sum += term;
  }
  for (int i = 0; i < squarings; ++i) sum = sum * sum;
  return sum;
}

// Plain left-to-right partial sum of the exponential series (no Horner).
inline Eigen::Matrix3d taylor_partial_sum_naive(const Eigen::Matrix3d& m, int order) {
  Eigen::Matrix3d sum = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d term = Eigen::Matrix3d::Identity();
  for (int k = 1; k <= order; ++k) {
    term = term * m / static_cast<double>(k);
    sum += term;
  }
  return sum;
}

// Dense multivariate normal log-density via explicit inverse and
// determinant; fine for the small dimensions used in tests.
inline double dense_mvn_logpdf(const Eigen::VectorXd& y, const Eigen::VectorXd& mean,
                               const Eigen::MatrixXd& cov) {
  const double n = static_cast<double>(y.size());
  const double det = cov.determinant();
  if (det <= 0.0) throw std::invalid_argument("dense_mvn_logpdf: covariance not PD");
  const Eigen::VectorXd d = y - mean;
  const double quad = d.dot(cov.inverse() * d);
  return -0.5 * (n * std::log(2.0 * 3.14159265358979323846) + std::log(det) + quad);
}

// Central finite differences of a scalar function of a flat vector.
inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                          const Eigen::VectorXd& x, double step) {
  Eigen::VectorXd grad(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + step;
    const double hi = f(probe);
    probe[i] = saved - step;
    const double lo = f(probe);
    probe[i] = saved;
    grad[i] = (hi - lo) / (2.0 * step);
  }
  return grad;
}

// |a-b| relative to the larger magnitude, floored so near-zero pairs compare
// absolutely at the floor scale.
inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({floor, std::abs(a), std::abs(b)});
}

}  // namespace oracle

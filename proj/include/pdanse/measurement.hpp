#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pdanse/lorenz.hpp"
#include "pdanse/numerics.hpp"
#include "pdanse/random.hpp"

namespace pdanse {

enum class MeasurementKind { kLinear, kCubic, kHalfwave, kCamera8x8, kCart2Sph };

inline std::string to_string(MeasurementKind k) {
  switch (k) {
    case MeasurementKind::kLinear: return "linear";
    case MeasurementKind::kCubic: return "cubic";
    case MeasurementKind::kHalfwave: return "halfwave";
    case MeasurementKind::kCamera8x8: return "camera8x8";
    case MeasurementKind::kCart2Sph: return "cart2sph";
  }
  throw std::logic_error("unknown measurement kind");
}

inline MeasurementKind measurement_kind_from_string(const std::string& s) {
  if (s == "linear") return MeasurementKind::kLinear;
  if (s == "cubic") return MeasurementKind::kCubic;
  if (s == "halfwave") return MeasurementKind::kHalfwave;
  if (s == "camera8x8") return MeasurementKind::kCamera8x8;
  if (s == "cart2sph") return MeasurementKind::kCart2Sph;
  throw std::invalid_argument("unknown measurement kind: " + s);
}

// 8x8 grid of 2-d reference points. Row-major over (row, col) with rows
// indexed by ascending second coordinate, j = 8*row + col; endpoints
// inclusive. The ordering is part of the on-disk measurement layout.
struct CameraGrid {
  Eigen::Matrix<double, 64, 2> ref_points;

  static CameraGrid regular() {
    CameraGrid g;
    for (int row = 0; row < 8; ++row) {
      const double chi2 = -40.0 + 80.0 * row / 7.0;
      for (int col = 0; col < 8; ++col) {
        const double chi1 = -30.0 + 60.0 * col / 7.0;
        g.ref_points(8 * row + col, 0) = chi1;
        g.ref_points(8 * row + col, 1) = chi2;
      }
    }
    return g;
  }
};

// guards camera evaluation against non-positive third coordinates drawn by
// samplers off the attractor
inline constexpr double kCameraDepthFloor = 1e-3;

inline Eigen::Vector3d h_cubic(const Eigen::Vector3d& x) {
  return x.array().cube();
}

inline Eigen::Vector3d h_halfwave(const Eigen::Vector3d& x) {
  return x.cwiseMax(0.0);
}

inline Eigen::VectorXd h_camera(const Eigen::Vector3d& x, const CameraGrid& grid) {
  const double z = std::max(x[2], kCameraDepthFloor);
  Eigen::VectorXd out(64);
  for (int j = 0; j < 64; ++j) {
    const double d1 = grid.ref_points(j, 0) - x[0];
    const double d2 = grid.ref_points(j, 1) - x[1];
    out[j] = 10.0 * std::exp(-(d1 * d1 + d2 * d2) / (2.0 * z));
  }
  return out;
}

// [range, azimuth, elevation]; azimuth is the two-argument arctangent in
// (-pi, pi], elevation in [-pi/2, pi/2].
inline Eigen::Vector3d h_cart2sph(const Eigen::Vector3d& x) {
  const double r = x.norm();
  if (r == 0.0) throw std::domain_error("h_cart2sph: zero input has no direction");
  const double rho = std::hypot(x[0], x[1]);
  return {r, std::atan2(x[1], x[0]), std::atan2(x[2], rho)};
}

inline Eigen::VectorXd h_linear(const Eigen::Vector3d& x, const Eigen::MatrixXd& H) {
  if (H.cols() != 3) throw std::invalid_argument("h_linear: H must have 3 columns");
  return H * x;
}

struct MeasurementModel {
  MeasurementKind kind = MeasurementKind::kLinear;
  Eigen::MatrixXd H;  // linear kind only
  CameraGrid grid;    // camera kind only
  double noise_var = 1.0;

  int out_dim() const {
    switch (kind) {
      case MeasurementKind::kLinear: return static_cast<int>(H.rows());
      case MeasurementKind::kCamera8x8: return 64;
      default: return 3;
    }
  }

  static MeasurementModel linear(Eigen::MatrixXd h, double noise_var) {
    MeasurementModel m;
    m.kind = MeasurementKind::kLinear;
    m.H = std::move(h);
    m.noise_var = noise_var;
    return m;
  }

  static MeasurementModel make(MeasurementKind kind, double noise_var) {
    MeasurementModel m;
    m.kind = kind;
    m.noise_var = noise_var;
    if (kind == MeasurementKind::kLinear) m.H = Eigen::MatrixXd::Identity(3, 3);
    if (kind == MeasurementKind::kCamera8x8) m.grid = CameraGrid::regular();
    return m;
  }
};

inline Eigen::VectorXd apply_h(const MeasurementModel& m, const Eigen::Vector3d& x) {
  switch (m.kind) {
    case MeasurementKind::kLinear: return h_linear(x, m.H);
    case MeasurementKind::kCubic: return h_cubic(x);
    case MeasurementKind::kHalfwave: return h_halfwave(x);
    case MeasurementKind::kCamera8x8: return h_camera(x, m.grid);
    case MeasurementKind::kCart2Sph: return h_cart2sph(x);
  }
  throw std::logic_error("unknown measurement kind");
}

// d h(x) / d x, n x 3. Non-smooth points (halfwave at 0, the camera depth
// clamp) use the one-sided derivative that matches the forward evaluation.
inline Eigen::MatrixXd measurement_jacobian(const MeasurementModel& m, const Eigen::Vector3d& x) {
  switch (m.kind) {
    case MeasurementKind::kLinear:
      return m.H;
    case MeasurementKind::kCubic: {
      Eigen::MatrixXd j = Eigen::MatrixXd::Zero(3, 3);
      for (int i = 0; i < 3; ++i) j(i, i) = 3.0 * x[i] * x[i];
      return j;
    }
    case MeasurementKind::kHalfwave: {
      Eigen::MatrixXd j = Eigen::MatrixXd::Zero(3, 3);
      for (int i = 0; i < 3; ++i) j(i, i) = x[i] > 0.0 ? 1.0 : 0.0;
      return j;
    }
    case MeasurementKind::kCamera8x8: {
      const bool clamped = x[2] <= kCameraDepthFloor;
      const double z = std::max(x[2], kCameraDepthFloor);
      Eigen::MatrixXd j(64, 3);
      for (int k = 0; k < 64; ++k) {
        const double d1 = m.grid.ref_points(k, 0) - x[0];
        const double d2 = m.grid.ref_points(k, 1) - x[1];
        const double d_sq = d1 * d1 + d2 * d2;
        const double v = 10.0 * std::exp(-d_sq / (2.0 * z));
        j(k, 0) = v * d1 / z;
        j(k, 1) = v * d2 / z;
        j(k, 2) = clamped ? 0.0 : v * d_sq / (2.0 * z * z);
      }
      return j;
    }
    case MeasurementKind::kCart2Sph: {
      const double r2 = x.squaredNorm();
      const double r = std::sqrt(r2);
      if (r == 0.0) throw std::domain_error("measurement_jacobian: zero input");
      const double rho2 = x[0] * x[0] + x[1] * x[1];
      const double rho = std::sqrt(rho2);
      Eigen::MatrixXd j(3, 3);
      j.row(0) = x.transpose() / r;
      j(1, 0) = -x[1] / rho2;
      j(1, 1) = x[0] / rho2;
      j(1, 2) = 0.0;
      j(2, 0) = -x[0] * x[2] / (rho * r2);
      j(2, 1) = -x[1] * x[2] / (rho * r2);
      j(2, 2) = rho / r2;
      return j;
    }
  }
  throw std::logic_error("unknown measurement kind");
}

inline Eigen::VectorXd measure(const Eigen::Vector3d& x, const MeasurementModel& m,
                               NormalSampler& rng) {
  const double sd = std::sqrt(m.noise_var);
  Eigen::VectorXd y = apply_h(m, x);
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += sd * rng.normal();
  return y;
}

// log N(y; h(x), noise_var * I)
inline double log_likelihood(const Eigen::VectorXd& y, const Eigen::Vector3d& x,
                             const MeasurementModel& m) {
  if (!y.allFinite() || !x.allFinite()) {
    throw std::invalid_argument("log_likelihood: non-finite input");
  }
  if (y.size() != m.out_dim()) {
    throw std::invalid_argument("log_likelihood: measurement dimension mismatch");
  }
  return log_normal_isotropic(y, apply_h(m, x), m.noise_var);
}

struct MeasurementTrajectory {
  std::vector<Eigen::VectorXd> measurements;

  int length() const { return static_cast<int>(measurements.size()); }
  int dim() const { return measurements.empty() ? 0 : static_cast<int>(measurements[0].size()); }
};

inline MeasurementTrajectory measure_trajectory(const StateTrajectory& traj,
                                                const MeasurementModel& m, NormalSampler& rng) {
  MeasurementTrajectory out;
  out.measurements.reserve(traj.states.size());
  for (const auto& x : traj.states) out.measurements.push_back(measure(x, m, rng));
  return out;
}

// A ground-truth trajectory with its observed counterpart.
struct LabelledPair {
  StateTrajectory states;
  MeasurementTrajectory measurements;
};

class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Noise variance hitting a target signal-to-noise ratio in dB.
//
// Signal power is the per-step average of ||h(x_t) - hbar||^2 where hbar is
// the per-trajectory time mean, pooled over all trajectories; the target then
// fixes sigma_w^2 = P / (n * 10^(target/10)).
inline double calibrate_sigma_from_smnr(std::span<const StateTrajectory> states,
                                        const MeasurementModel& geometry, double smnr_db) {
  if (states.empty()) throw CalibrationError("calibrate_sigma_from_smnr: no trajectories");
  const int n = geometry.out_dim();
  double power_sum = 0.0;
  double scale = 0.0;
  long steps = 0;
  for (const auto& traj : states) {
    if (traj.states.empty()) continue;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
    std::vector<Eigen::VectorXd> h_vals;
    h_vals.reserve(traj.states.size());
    for (const auto& x : traj.states) {
      h_vals.push_back(apply_h(geometry, x));
      mean += h_vals.back();
    }
    mean /= static_cast<double>(h_vals.size());
    scale += mean.squaredNorm();
    for (const auto& h : h_vals) power_sum += (h - mean).squaredNorm();
    steps += static_cast<long>(h_vals.size());
  }
  if (steps == 0) throw CalibrationError("calibrate_sigma_from_smnr: empty trajectories");
  const double power = power_sum / static_cast<double>(steps);
  // constant-signal guard; the threshold is relative to the signal magnitude
  if (power <= 1e-20 * (1.0 + scale / static_cast<double>(states.size()))) {
    throw CalibrationError("calibrate_sigma_from_smnr: signal has no temporal variation");
  }
  return power / (static_cast<double>(n) * std::pow(10.0, smnr_db / 10.0));
}

// Realized ratio for a labelled set, averaging the per-trajectory dB values.
inline double measured_smnr_db(std::span<const StateTrajectory> states,
                               const MeasurementModel& model) {
  if (states.empty()) throw std::invalid_argument("measured_smnr_db: no trajectories");
  const int n = model.out_dim();
  double acc = 0.0;
  for (const auto& traj : states) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
    std::vector<Eigen::VectorXd> h_vals;
    h_vals.reserve(traj.states.size());
    for (const auto& x : traj.states) {
      h_vals.push_back(apply_h(model, x));
      mean += h_vals.back();
    }
    mean /= static_cast<double>(h_vals.size());
    double p = 0.0;
    for (const auto& h : h_vals) p += (h - mean).squaredNorm();
    p /= static_cast<double>(h_vals.size());
    acc += 10.0 * std::log10(p / (static_cast<double>(n) * model.noise_var));
  }
  return acc / static_cast<double>(states.size());
}

}  // namespace pdanse

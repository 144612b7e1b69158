#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>

namespace pdanse {

// Gaussian/uniform sampler over std::mt19937_64.
//
// The transform is a hand-pinned Box-Muller rather than
// std::normal_distribution: the engine is fully specified by the standard but
// the distribution adaptors are not, and dataset files must regenerate
// byte-identically from a seed.
class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : engine_(seed) {}

  // uniform on [0, 1), 53-bit resolution
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log1p(-u1));  // log(1-u1), u1 < 1
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  Eigen::Vector3d normal3() {
    Eigen::Vector3d v;
    v << normal(), normal(), normal();
    return v;
  }

  Eigen::VectorXd normal_vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Splitting rule for per-trajectory / per-purpose seeds. The multiplier keeps
// distinct masters from colliding on small indices (master ^ i would map
// master=0,i=1 and master=1,i=0 to the same stream).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return master ^ (0x9e3779b97f4a7c15ULL * (index + 1));
}

}  // namespace pdanse

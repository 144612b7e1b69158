#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "pdanse/checkpoint.hpp"
#include "pdanse/rnn_prior.hpp"

using namespace pdanse;

namespace {

MeasurementTrajectory random_measurements(int T, int dim, std::uint64_t seed, double scale = 1.0) {
  NormalSampler rng(seed);
  MeasurementTrajectory y;
  for (int t = 0; t < T; ++t) y.measurements.push_back(scale * rng.normal_vector(dim));
  return y;
}

PriorNetConfig small_config() {
  PriorNetConfig cfg;
  cfg.input_dim = 3;
  cfg.hidden = 16;
  cfg.layers = 2;
  cfg.head_hidden = 12;
  return cfg;
}

}  // namespace

TEST_CASE("initialization is pinned by the seed") {
  const PriorNetConfig cfg = small_config();
  const PriorNetParams a = init_params(cfg, 42);
  const PriorNetParams b = init_params(cfg, 42);
  REQUIRE(a.flat == b.flat);
  const PriorNetParams c = init_params(cfg, 43);
  REQUIRE(a.flat != c.flat);

  // biases zero, weights inside the fan-in bound
  for (const TensorSpec& s : a.layout.specs()) {
    if (s.cols == 1) {
      REQUIRE(a.flat.segment(s.offset, s.size()).cwiseAbs().maxCoeff() == 0.0);
    } else {
      const double bound = 1.0 / std::sqrt(static_cast<double>(s.cols));
      REQUIRE(a.flat.segment(s.offset, s.size()).cwiseAbs().maxCoeff() <= bound);
    }
  }
}

TEST_CASE("flat view aliases every tensor") {
  const PriorNetParams p = init_params(small_config(), 1);
  Eigen::Index total = 0;
  for (const TensorSpec& s : p.layout.specs()) total += s.size();
  REQUIRE(total == p.flat.size());
  REQUIRE(p.flat.allFinite());

  // a write through a map lands in the flat vector
  PriorNetParams q = p;
  q.mat("gru0.wr")(0, 0) = 123.5;
  REQUIRE(q.flat[q.layout.at("gru0.wr").offset] == 123.5);
}

TEST_CASE("parameter file round-trip is exact") {
  const PriorNetParams p = init_params(small_config(), 7);
  const auto path = std::filesystem::temp_directory_path() / "pdanse_params_test.pdanse";
  save_params(path, p);
  const PriorNetParams q = load_params(path);
  REQUIRE(p.flat == q.flat);
  REQUIRE(p.input_shift == q.input_shift);
  REQUIRE(p.input_scale == q.input_scale);
  std::filesystem::remove(path);
}

TEST_CASE("initial variances are neutral on silent input") {
  const PriorNetParams p = init_params(small_config(), 5);
  MeasurementTrajectory zeros;
  zeros.measurements.assign(6, Eigen::VectorXd::Zero(3));
  const std::vector<GaussianBelief> beliefs = prior_sequence(p, zeros);
  for (const auto& b : beliefs) {
    for (int i = 0; i < 3; ++i) {
      REQUIRE(b.var[i] >= 0.5);
      REQUIRE(b.var[i] <= 2.0);
      REQUIRE(b.var[i] == Catch::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("recurrence fixed points") {
  PriorNetConfig cfg = small_config();

  SECTION("zero weights, zero input give zero hidden states") {
    PriorNetParams p = init_params(cfg, 9);
    p.flat.setZero();
    const Eigen::MatrixXd hidden = gru_forward(p, Eigen::MatrixXd::Zero(3, 10));
    REQUIRE(hidden.cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("saturated update gate carries the (zero) state unchanged") {
    PriorNetParams p = init_params(cfg, 10);
    for (int l = 0; l < cfg.layers; ++l) {
      p.vec("gru" + std::to_string(l) + ".bz").setConstant(100.0);
    }
    NormalSampler rng(11);
    Eigen::MatrixXd inputs(3, 8);
    for (int t = 0; t < 8; ++t) inputs.col(t) = 5.0 * rng.normal3();
    const Eigen::MatrixXd hidden = gru_forward(p, inputs);
    REQUIRE(hidden.cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("states stay inside the unit box") {
    const PriorNetParams p = init_params(cfg, 12);
    NormalSampler rng(13);
    Eigen::MatrixXd inputs(3, 40);
    for (int t = 0; t < 40; ++t) inputs.col(t) = 30.0 * rng.normal3();
    const Eigen::MatrixXd hidden = gru_forward(p, inputs);
    REQUIRE(hidden.cwiseAbs().maxCoeff() < 1.0);
  }
}

TEST_CASE("belief sequence is causal") {
  const PriorNetParams p = init_params(small_config(), 21);
  const MeasurementTrajectory y = random_measurements(12, 3, 22);
  const std::vector<GaussianBelief> base = prior_sequence(p, y);

  SECTION("first belief ignores every measurement") {
    const MeasurementTrajectory other = random_measurements(12, 3, 23);
    const std::vector<GaussianBelief> perturbed = prior_sequence(p, other);
    REQUIRE(base[0].mean == perturbed[0].mean);
    REQUIRE(base[0].var == perturbed[0].var);
  }

  SECTION("perturbing the tail leaves the head untouched") {
    for (int cut : {3, 7, 11}) {
      MeasurementTrajectory mod = y;
      NormalSampler rng(24 + cut);
      for (int t = cut; t < mod.length(); ++t) {
        mod.measurements[t] += rng.normal_vector(3);
      }
      const std::vector<GaussianBelief> perturbed = prior_sequence(p, mod);
      // belief index t depends on measurements 0..t-1 only
      for (int t = 0; t <= cut; ++t) {
        REQUIRE(base[t].mean == perturbed[t].mean);
        REQUIRE(base[t].var == perturbed[t].var);
      }
      if (cut + 1 < static_cast<int>(base.size())) {
        REQUIRE(base[cut + 1].mean != perturbed[cut + 1].mean);
      }
    }
  }
}

TEST_CASE("variances are clamped and positive") {
  PriorNetConfig cfg = small_config();
  PriorNetParams p = init_params(cfg, 31);
  p.vec("var.b2").setConstant(1e6);  // force the clamp
  const MeasurementTrajectory y = random_measurements(5, 3, 32, 100.0);
  const std::vector<GaussianBelief> beliefs = prior_sequence(p, y);
  for (const auto& b : beliefs) {
    for (int i = 0; i < 3; ++i) {
      REQUIRE(b.var[i] <= std::exp(12.0));
      REQUIRE(b.var[i] >= std::exp(-12.0));
      REQUIRE(b.var[i] > 0.0);
    }
  }

  p.vec("var.b2").setConstant(-1e6);
  const std::vector<GaussianBelief> low = prior_sequence(p, y);
  for (const auto& b : low) {
    REQUIRE(b.var.minCoeff() == Catch::Approx(std::exp(-12.0)).epsilon(1e-12));
  }
}

TEST_CASE("belief sequence is deterministic") {
  const PriorNetParams p = init_params(small_config(), 41);
  const MeasurementTrajectory y = random_measurements(9, 3, 42);
  const std::vector<GaussianBelief> a = prior_sequence(p, y);
  const std::vector<GaussianBelief> b = prior_sequence(p, y);
  for (std::size_t t = 0; t < a.size(); ++t) {
    REQUIRE(a[t].mean == b[t].mean);
    REQUIRE(a[t].var == b[t].var);
  }
}

TEST_CASE("input standardization is an affine pre-map only") {
  PriorNetParams p = init_params(small_config(), 51);
  MeasurementTrajectory y = random_measurements(6, 3, 52, 10.0);

  PriorNetParams q = p;
  q.input_shift = Eigen::Vector3d{1.0, -2.0, 0.5};
  q.input_scale = Eigen::Vector3d{2.0, 4.0, 0.5};
  MeasurementTrajectory y_pre = y;
  for (auto& v : y_pre.measurements) {
    v = (v - q.input_shift).cwiseQuotient(q.input_scale);
  }
  const std::vector<GaussianBelief> via_params = prior_sequence(q, y);
  const std::vector<GaussianBelief> via_data = prior_sequence(p, y_pre);
  // identical beliefs (first-step input is pinned to zero either way)
  for (std::size_t t = 0; t < via_params.size(); ++t) {
    REQUIRE((via_params[t].mean - via_data[t].mean).cwiseAbs().maxCoeff() < 1e-14);
  }
}

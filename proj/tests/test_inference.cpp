#include <catch2/catch_amalgamated.hpp>

#include "pdanse/inference.hpp"
#include "pdanse/rnn_prior.hpp"

#include "oracles.hpp"

using namespace pdanse;

namespace {

GaussianBelief example_belief() {
  GaussianBelief b;
  b.mean = Eigen::Vector3d{1.0, -1.0, 0.5};
  b.var = Eigen::Vector3d{1.0, 4.0, 0.25};
  return b;
}

MeasurementTrajectory random_measurements(int T, int dim, std::uint64_t seed, double scale = 1.0) {
  NormalSampler rng(seed);
  MeasurementTrajectory y;
  for (int t = 0; t < T; ++t) y.measurements.push_back(scale * rng.normal_vector(dim));
  return y;
}

}  // namespace

TEST_CASE("prior sampling") {
  SECTION("degenerate scale collapses onto the mean") {
    GaussianBelief b = example_belief();
    b.var.setZero();
    NormalSampler rng(1);
    const ParticleEnsemble e = sample_prior(b, 16, rng);
    for (int l = 0; l < e.count(); ++l) REQUIRE(e.samples.col(l) == b.mean);
  }

  SECTION("retained draws reproduce the samples exactly") {
    const GaussianBelief b = example_belief();
    NormalSampler rng(2);
    const ParticleEnsemble e = sample_prior(b, 64, rng);
    const Eigen::Vector3d sd = b.var.cwiseSqrt();
    for (int l = 0; l < e.count(); ++l) {
      const Eigen::Vector3d rebuilt = b.mean + sd.cwiseProduct(Eigen::Vector3d(e.epsilons.col(l)));
      REQUIRE(rebuilt == e.samples.col(l));
    }
    REQUIRE(std::isnan(e.log_weights[0]));
  }

  SECTION("sample mean concentrates at the CLT rate") {
    const GaussianBelief b = example_belief();
    NormalSampler rng(3);
    const int n = 1000000;
    const ParticleEnsemble e = sample_prior(b, n, rng);
    const Eigen::Vector3d mean = e.samples.rowwise().mean();
    for (int i = 0; i < 3; ++i) {
      const double bound = 4.0 * std::sqrt(b.var[i]) / std::sqrt(static_cast<double>(n));
      REQUIRE(std::abs(mean[i] - b.mean[i]) <= bound);
    }
  }
}

TEST_CASE("log-weight normalization") {
  SECTION("identical particles get uniform weights") {
    GaussianBelief b = example_belief();
    b.var.setZero();
    NormalSampler rng(4);
    ParticleEnsemble e = sample_prior(b, 8, rng);
    const MeasurementModel m = MeasurementModel::make(MeasurementKind::kCubic, 1.0);
    compute_log_weights(e, h_cubic(b.mean), m);
    for (int l = 0; l < 8; ++l) {
      REQUIRE(std::exp(e.log_weights[l]) == Catch::Approx(0.125).epsilon(1e-12));
    }
  }

  SECTION("a known likelihood gap gives 3:1 odds") {
    Eigen::VectorXd ll(2);
    ll << std::log(3.0), 0.0;
    ll.array() += 17.25;  // common offset is irrelevant
    const Eigen::VectorXd lw = normalize_log_weights(ll);
    REQUIRE(std::exp(lw[0]) == Catch::Approx(0.75).epsilon(1e-12));
    REQUIRE(std::exp(lw[1]) == Catch::Approx(0.25).epsilon(1e-12));
  }

  SECTION("offsets up to 1e3 neither overflow nor change the result") {
    NormalSampler rng(5);
    Eigen::VectorXd ll = rng.normal_vector(32);
    const Eigen::VectorXd base = normalize_log_weights(ll);
    for (double offset : {1e3, -1e3}) {
      const Eigen::VectorXd shifted = normalize_log_weights(ll.array() + offset);
      REQUIRE(shifted.allFinite());
      // differences at this scale come from representing ll + offset, not
      // from the normalization
      REQUIRE((shifted - base).cwiseAbs().maxCoeff() < 1e-9);
      REQUIRE(shifted.array().exp().sum() == Catch::Approx(1.0).margin(1e-9));
    }
    for (double offset : {1e6, -1e6}) {
      const Eigen::VectorXd shifted = normalize_log_weights(ll.array() + offset);
      REQUIRE(shifted.allFinite());
      REQUIRE(shifted.array().exp().sum() == Catch::Approx(1.0).margin(1e-9));
    }
  }

  SECTION("all-underflow raises the degenerate error") {
    Eigen::VectorXd ll = Eigen::VectorXd::Constant(4, -std::numeric_limits<double>::infinity());
    REQUIRE_THROWS_AS(normalize_log_weights(ll), DegenerateWeightsError);
  }
}

TEST_CASE("posterior moments") {
  SECTION("single particle") {
    ParticleEnsemble e;
    e.samples.resize(3, 1);
    e.samples.col(0) = Eigen::Vector3d{2.0, -1.0, 3.0};
    e.epsilons.resize(3, 1);
    e.epsilons.setZero();
    e.log_weights = Eigen::VectorXd::Zero(1);
    const PosteriorSummary s = posterior_moments(e);
    REQUIRE(s.mean == Eigen::Vector3d(2.0, -1.0, 3.0));
    REQUIRE(s.cov.cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("uniform weights reduce to the sample average") {
    NormalSampler rng(6);
    const int n = 50;
    ParticleEnsemble e;
    e.samples.resize(3, n);
    for (int l = 0; l < n; ++l) e.samples.col(l) = rng.normal3();
    e.epsilons = e.samples;
    e.log_weights = Eigen::VectorXd::Constant(n, -std::log(static_cast<double>(n)));
    const PosteriorSummary s = posterior_moments(e);
    REQUIRE((s.mean - e.samples.rowwise().mean()).norm() < 1e-12);
    REQUIRE((s.cov - s.cov.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  }

  SECTION("weighted moments match the exact linear update") {
    const GaussianBelief b = example_belief();
    const Eigen::MatrixXd H = Eigen::MatrixXd::Identity(3, 3);
    Eigen::VectorXd y(3);
    y << 1.5, -0.5, 1.0;
    const MeasurementModel m = MeasurementModel::linear(H, 1.0);

    NormalSampler rng(7);
    ParticleEnsemble e = sample_prior(b, 100000, rng);
    compute_log_weights(e, y, m);
    const PosteriorSummary mc = posterior_moments(e);
    const PosteriorSummary exact = closed_form_linear_update(b, y, H, 1.0);

    REQUIRE((mc.mean - exact.mean).norm() / exact.mean.norm() < 0.01);
    REQUIRE((mc.cov - exact.cov).norm() / exact.cov.norm() < 0.05);
  }

  SECTION("covariance is positive semidefinite") {
    NormalSampler rng(8);
    for (int trial = 0; trial < 10; ++trial) {
      GaussianBelief b;
      b.mean = 5.0 * rng.normal3();
      b.var = rng.normal3().cwiseAbs2() + Eigen::Vector3d::Constant(0.01);
      ParticleEnsemble e = sample_prior(b, 200, rng);
      const MeasurementModel m = MeasurementModel::make(MeasurementKind::kCubic, 25.0);
      compute_log_weights(e, h_cubic(b.mean), m);
      const PosteriorSummary s = posterior_moments(e);
      const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(s.cov);
      REQUIRE(es.eigenvalues().minCoeff() >= -1e-10);
      REQUIRE((s.cov - s.cov.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("closed-form linear update") {
  const GaussianBelief b = example_belief();

  SECTION("zero observation matrix leaves the prior") {
    Eigen::VectorXd y(2);
    y << 5.0, -3.0;
    const PosteriorSummary s = closed_form_linear_update(b, y, Eigen::MatrixXd::Zero(2, 3), 1.0);
    REQUIRE(s.mean == b.mean);
    REQUIRE((s.cov - Eigen::Matrix3d(b.var.asDiagonal())).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("uninformative noise leaves the prior") {
    Eigen::VectorXd y(3);
    y << 4.0, 4.0, 4.0;
    const PosteriorSummary s =
        closed_form_linear_update(b, y, Eigen::MatrixXd::Identity(3, 3), 1e12);
    REQUIRE((s.mean - b.mean).cwiseAbs().maxCoeff() <= 1e-9);
    REQUIRE((s.cov - Eigen::Matrix3d(b.var.asDiagonal())).cwiseAbs().maxCoeff() <= 1e-9);
  }

  SECTION("scalar textbook case") {
    GaussianBelief scalar;
    scalar.mean = Eigen::Vector3d{0.0, 7.0, -7.0};
    scalar.var = Eigen::Vector3d{1.0, 2.0, 3.0};
    Eigen::MatrixXd H(1, 3);
    H << 1.0, 0.0, 0.0;
    Eigen::VectorXd y(1);
    y << 2.0;
    const PosteriorSummary s = closed_form_linear_update(scalar, y, H, 1.0);
    REQUIRE(s.mean[0] == Catch::Approx(1.0).epsilon(1e-12));
    REQUIRE(s.cov(0, 0) == Catch::Approx(0.5).epsilon(1e-12));
    REQUIRE(s.mean[1] == 7.0);  // unobserved components untouched
    REQUIRE(s.mean[2] == -7.0);
  }
}

TEST_CASE("measurement-marginal lower bound") {
  const GaussianBelief b = example_belief();
  const Eigen::MatrixXd H = Eigen::MatrixXd::Identity(3, 3);
  const MeasurementModel m = MeasurementModel::linear(H, 1.0);
  Eigen::VectorXd y(3);
  y << 0.5, -1.5, 1.0;

  SECTION("collapsed prior recovers the plain likelihood") {
    GaussianBelief point = b;
    point.var.setZero();
    NormalSampler rng(9);
    const double bound = marginal_ll_lower_bound(point, y, m, 32, rng);
    REQUIRE(bound == Catch::Approx(log_likelihood(y, point.mean, m)).epsilon(1e-12));
  }

  SECTION("stays below the exact marginal") {
    NormalSampler rng(10);
    for (int trial = 0; trial < 20; ++trial) {
      GaussianBelief bt;
      bt.mean = 2.0 * rng.normal3();
      bt.var = rng.normal3().cwiseAbs2() + Eigen::Vector3d::Constant(0.1);
      const Eigen::VectorXd yt = 2.0 * rng.normal_vector(3);

      const int L = 200;
      const ParticleEnsemble e = sample_prior(bt, L, rng);
      double mean = 0.0, sq = 0.0;
      for (int l = 0; l < L; ++l) {
        const double term = log_likelihood(yt, e.samples.col(l), m);
        mean += term;
        sq += term * term;
      }
      mean /= L;
      const double se = std::sqrt((sq / L - mean * mean) / L);
      const double exact = closed_form_log_marginal(bt, yt, H, 1.0);
      REQUIRE(mean <= exact + 3.0 * se);
    }
  }

  SECTION("estimator is an order-insensitive average") {
    NormalSampler rng(11);
    const double direct = marginal_ll_lower_bound(b, y, m, 64, rng);
    NormalSampler rng2(11);
    const ParticleEnsemble e = sample_prior(b, 64, rng2);
    double reversed = 0.0;
    for (int l = 63; l >= 0; --l) reversed += log_likelihood(y, e.samples.col(l), m);
    REQUIRE(direct == Catch::Approx(reversed / 64.0).epsilon(1e-12));
  }
}

TEST_CASE("filter sequence") {
  PriorNetConfig cfg;
  cfg.input_dim = 3;
  cfg.hidden = 16;
  cfg.layers = 2;
  cfg.head_hidden = 12;
  const PriorNetParams p = init_params(cfg, 50);
  const MeasurementModel m = MeasurementModel::make(MeasurementKind::kCubic, 4.0);

  SECTION("one step equals the composed primitive operations") {
    const MeasurementTrajectory y = random_measurements(1, 3, 51);
    NormalSampler rng(52);
    const std::vector<PosteriorSummary> seq = filter_sequence(y, p, m, 32, rng);

    NormalSampler rng2(52);
    const std::vector<GaussianBelief> beliefs = prior_sequence(p, y);
    ParticleEnsemble e = sample_prior(beliefs[0], 32, rng2);
    compute_log_weights(e, y.measurements[0], m);
    const PosteriorSummary direct = posterior_moments(e);
    REQUIRE(seq[0].mean == direct.mean);
    REQUIRE(seq[0].cov == direct.cov);
  }

  SECTION("future measurements cannot affect the past") {
    const MeasurementTrajectory y = random_measurements(10, 3, 53);
    NormalSampler rng_a(54);
    const std::vector<PosteriorSummary> base = filter_sequence(y, p, m, 16, rng_a);

    MeasurementTrajectory mod = y;
    std::swap(mod.measurements[6], mod.measurements[9]);
    mod.measurements[7] *= -2.0;
    NormalSampler rng_b(54);
    const std::vector<PosteriorSummary> perturbed = filter_sequence(mod, p, m, 16, rng_b);
    for (int t = 0; t < 6; ++t) {
      REQUIRE(base[t].mean == perturbed[t].mean);
      REQUIRE(base[t].cov == perturbed[t].cov);
    }
  }

  SECTION("tracks the exact posterior on a linear system") {
    const Eigen::MatrixXd H = Eigen::MatrixXd::Identity(3, 3);
    const MeasurementModel lin = MeasurementModel::linear(H, 1.0);
    const MeasurementTrajectory y = random_measurements(5, 3, 55, 2.0);
    NormalSampler rng(56);
    const std::vector<PosteriorSummary> mc = filter_sequence(y, p, lin, 100000, rng);
    const std::vector<GaussianBelief> beliefs = prior_sequence(p, y);
    for (int t = 0; t < 5; ++t) {
      const PosteriorSummary exact =
          closed_form_linear_update(beliefs[t], y.measurements[t], H, 1.0);
      REQUIRE((mc[t].mean - exact.mean).norm() / exact.mean.norm() < 0.02);
    }
  }

  SECTION("degenerate weights: throw or fall back") {
    // residual norms overflow, so every log-likelihood is -inf
    MeasurementModel tight = MeasurementModel::make(MeasurementKind::kCubic, 1e-6);
    MeasurementTrajectory y;
    y.measurements.push_back(Eigen::Vector3d{1e200, 1e200, 1e200});
    NormalSampler rng(57);
    REQUIRE_THROWS_AS(filter_sequence(y, p, tight, 8, rng), DegenerateWeightsError);

    NormalSampler rng2(57);
    FilterStats stats;
    const std::vector<PosteriorSummary> fallback =
        filter_sequence(y, p, tight, 8, rng2, DegeneratePolicy::kFallBackToPrior, &stats);
    REQUIRE(stats.degenerate_steps == 1);
    const std::vector<GaussianBelief> beliefs = prior_sequence(p, y);
    REQUIRE(fallback[0].mean == beliefs[0].mean);
  }
}

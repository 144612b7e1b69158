#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "pdanse/measurement.hpp"
#include "pdanse/random.hpp"

namespace pdanse {

inline constexpr int kStateDim = 3;

// Per-step Gaussian summary emitted by the prior network (diagonal
// covariance, entries strictly positive).
struct GaussianBelief {
  Eigen::Vector3d mean;
  Eigen::Vector3d var;
};

struct PriorNetConfig {
  int input_dim = 3;
  int hidden = 80;
  int layers = 2;
  int head_hidden = 128;
  // |log-variance| is clamped here before exponentiation
  double log_var_clamp = 12.0;
};

struct TensorSpec {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;  // 1 for vectors
  Eigen::Index offset = 0;

  Eigen::Index size() const { return rows * cols; }
};

// Addressing scheme mapping every learnable tensor into one contiguous
// vector; the order of the table is also the checkpoint payload order.
class ParamLayout {
 public:
  ParamLayout() = default;

  explicit ParamLayout(const PriorNetConfig& cfg) {
    const Eigen::Index h = cfg.hidden;
    for (int l = 0; l < cfg.layers; ++l) {
      const Eigen::Index in = (l == 0) ? cfg.input_dim : cfg.hidden;
      const std::string p = "gru" + std::to_string(l) + ".";
      add(p + "wr", h, in);
      add(p + "wz", h, in);
      add(p + "wc", h, in);
      add(p + "ur", h, h);
      add(p + "uz", h, h);
      add(p + "uc", h, h);
      add(p + "br", h, 1);
      add(p + "bz", h, 1);
      add(p + "bc", h, 1);
    }
    for (const char* head : {"mean", "var"}) {
      const std::string p = std::string(head) + ".";
      add(p + "w1", cfg.head_hidden, h);
      add(p + "b1", cfg.head_hidden, 1);
      add(p + "w2", kStateDim, cfg.head_hidden);
      add(p + "b2", kStateDim, 1);
    }
  }

  Eigen::Index total() const { return total_; }
  const std::vector<TensorSpec>& specs() const { return specs_; }

  const TensorSpec& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("ParamLayout: no tensor '" + name + "'");
    return specs_[it->second];
  }

 private:
  void add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    index_[name] = specs_.size();
    specs_.push_back({name, rows, cols, total_});
    total_ += rows * cols;
  }

  std::vector<TensorSpec> specs_;
  std::unordered_map<std::string, std::size_t> index_;
  Eigen::Index total_ = 0;
};

// All learnable parameters plus the fixed input-standardization constants.
// `flat` aliases every tensor, so the optimizer and the serializer both work
// on one vector.
struct PriorNetParams {
  PriorNetConfig cfg;
  ParamLayout layout;
  Eigen::VectorXd flat;
  Eigen::VectorXd input_shift;  // not learnable; identity by default
  Eigen::VectorXd input_scale;

  Eigen::Map<const Eigen::MatrixXd> mat(const std::string& name) const {
    const TensorSpec& s = layout.at(name);
    return {flat.data() + s.offset, s.rows, s.cols};
  }
  Eigen::Map<const Eigen::VectorXd> vec(const std::string& name) const {
    const TensorSpec& s = layout.at(name);
    return {flat.data() + s.offset, s.size()};
  }
  Eigen::Map<Eigen::MatrixXd> mat(const std::string& name) {
    const TensorSpec& s = layout.at(name);
    return {flat.data() + s.offset, s.rows, s.cols};
  }
  Eigen::Map<Eigen::VectorXd> vec(const std::string& name) {
    const TensorSpec& s = layout.at(name);
    return {flat.data() + s.offset, s.size()};
  }

  Eigen::VectorXd standardize(const Eigen::VectorXd& y) const {
    return (y - input_shift).cwiseQuotient(input_scale);
  }
};

// Weights uniform on (-1/sqrt(fanin), 1/sqrt(fanin)), biases zero. The flat
// vector is filled in layout order so a seed pins every coefficient.
inline PriorNetParams init_params(const PriorNetConfig& cfg, std::uint64_t seed) {
  PriorNetParams p;
  p.cfg = cfg;
  p.layout = ParamLayout(cfg);
  p.flat = Eigen::VectorXd::Zero(p.layout.total());
  p.input_shift = Eigen::VectorXd::Zero(cfg.input_dim);
  p.input_scale = Eigen::VectorXd::Ones(cfg.input_dim);

  NormalSampler rng(seed);
  for (const TensorSpec& s : p.layout.specs()) {
    if (s.cols == 1) continue;  // biases stay zero
    const double bound = 1.0 / std::sqrt(static_cast<double>(s.cols));
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      p.flat[s.offset + i] = bound * (2.0 * rng.uniform01() - 1.0);
    }
  }
  return p;
}

// Everything the backward pass needs, recorded during a forward run.
// Activations are stored column-per-step.
struct PriorForwardCache {
  Eigen::MatrixXd inputs;                 // in x T, layer-0 input (already standardized)
  std::vector<Eigen::MatrixXd> r, z, c, h;  // per layer, hidden x T
  Eigen::MatrixXd mean_hidden, var_hidden;  // head tanh activations
  Eigen::MatrixXd mu;                       // kStateDim x T
  Eigen::MatrixXd log_var_raw;              // pre-clamp head output
  Eigen::MatrixXd var;
  int T = 0;
};

namespace detail {

// Stacked-GRU + heads pass over a prepared input matrix (in x T). The input
// projections of all steps are batched into one product per gate; only the
// recurrent terms run step by step. Hidden state starts at zero and is
// carried within the sequence only.
inline void priornet_forward(const PriorNetParams& p, Eigen::MatrixXd inputs,
                             PriorForwardCache& cache) {
  if (inputs.rows() != p.cfg.input_dim) {
    throw std::invalid_argument("priornet_forward: input rows do not match input_dim");
  }
  const int T = static_cast<int>(inputs.cols());
  const int L = p.cfg.layers;
  const Eigen::Index hd = p.cfg.hidden;
  cache.T = T;
  cache.inputs = std::move(inputs);
  cache.r.assign(L, Eigen::MatrixXd(hd, T));
  cache.z.assign(L, Eigen::MatrixXd(hd, T));
  cache.c.assign(L, Eigen::MatrixXd(hd, T));
  cache.h.assign(L, Eigen::MatrixXd(hd, T));

  for (int l = 0; l < L; ++l) {
    const std::string pre = "gru" + std::to_string(l) + ".";
    const auto ur = p.mat(pre + "ur"), uz = p.mat(pre + "uz"), uc = p.mat(pre + "uc");
    const Eigen::MatrixXd& u = (l == 0) ? cache.inputs : cache.h[l - 1];

    Eigen::MatrixXd proj_r = (p.mat(pre + "wr") * u).colwise() + p.vec(pre + "br");
    Eigen::MatrixXd proj_z = (p.mat(pre + "wz") * u).colwise() + p.vec(pre + "bz");
    Eigen::MatrixXd proj_c = (p.mat(pre + "wc") * u).colwise() + p.vec(pre + "bc");

    Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(hd);
    for (int t = 0; t < T; ++t) {
      const Eigen::ArrayXd ar = (proj_r.col(t) + ur * h_prev).array();
      const Eigen::ArrayXd az = (proj_z.col(t) + uz * h_prev).array();
      const Eigen::ArrayXd rt = 1.0 / (1.0 + (-ar).exp());
      const Eigen::ArrayXd zt = 1.0 / (1.0 + (-az).exp());
      const Eigen::ArrayXd ct =
          (proj_c.col(t).array() + (uc * (rt * h_prev.array()).matrix()).array()).tanh();
      cache.r[l].col(t) = rt;
      cache.z[l].col(t) = zt;
      cache.c[l].col(t) = ct;
      h_prev = (1.0 - zt) * ct + zt * h_prev.array();
      cache.h[l].col(t) = h_prev;
    }
  }

  const Eigen::MatrixXd& top = cache.h[L - 1];
  cache.mean_hidden = ((p.mat("mean.w1") * top).colwise() + p.vec("mean.b1")).array().tanh();
  cache.mu = (p.mat("mean.w2") * cache.mean_hidden).colwise() + p.vec("mean.b2");
  cache.var_hidden = ((p.mat("var.w1") * top).colwise() + p.vec("var.b1")).array().tanh();
  cache.log_var_raw = (p.mat("var.w2") * cache.var_hidden).colwise() + p.vec("var.b2");
  cache.var = cache.log_var_raw.array()
                  .min(p.cfg.log_var_clamp)
                  .max(-p.cfg.log_var_clamp)
                  .exp();
}

// Causal input matrix: column t carries the standardized previous
// measurement; the first column is zero (nothing has been observed yet).
inline Eigen::MatrixXd shifted_inputs(const PriorNetParams& p, const MeasurementTrajectory& y) {
  const int T = y.length();
  Eigen::MatrixXd inputs = Eigen::MatrixXd::Zero(p.cfg.input_dim, T);
  for (int t = 1; t < T; ++t) {
    if (y.measurements[t - 1].size() != p.cfg.input_dim) {
      throw std::invalid_argument("prior_sequence: measurement dim does not match net input dim");
    }
    inputs.col(t) = p.standardize(y.measurements[t - 1]);
  }
  return inputs;
}

}  // namespace detail

// Top-layer hidden states (hidden x T) for raw inputs (in x T), zero initial
// state.
inline Eigen::MatrixXd gru_forward(const PriorNetParams& p, const Eigen::MatrixXd& inputs) {
  PriorForwardCache cache;
  detail::priornet_forward(p, inputs, cache);
  return cache.h[p.cfg.layers - 1];
}

// Belief sequence: the belief at step t is a function of measurements before
// t only. Optionally records the activation cache for a later backward pass.
inline std::vector<GaussianBelief> prior_sequence(const PriorNetParams& p,
                                                  const MeasurementTrajectory& y,
                                                  PriorForwardCache* cache_out = nullptr) {
  if (y.length() < 1) throw std::invalid_argument("prior_sequence: empty trajectory");
  PriorForwardCache local;
  PriorForwardCache& cache = cache_out ? *cache_out : local;
  detail::priornet_forward(p, detail::shifted_inputs(p, y), cache);

  std::vector<GaussianBelief> beliefs(cache.T);
  for (int t = 0; t < cache.T; ++t) {
    beliefs[t].mean = cache.mu.col(t);
    beliefs[t].var = cache.var.col(t);
  }
  return beliefs;
}

}  // namespace pdanse

#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdanse/container.hpp"
#include "pdanse/rnn_prior.hpp"

namespace pdanse {

namespace detail {

inline void append_params_tensors(std::vector<NamedTensor>& tensors, const PriorNetParams& p,
                                  const std::string& prefix) {
  for (const TensorSpec& s : p.layout.specs()) {
    NamedTensor t;
    t.name = prefix + s.name;
    t.shape = {s.rows, s.cols};
    t.data.assign(p.flat.data() + s.offset, p.flat.data() + s.offset + s.size());
    tensors.push_back(std::move(t));
  }
  NamedTensor shift{prefix + "input_shift", {p.input_shift.size()}, {}};
  shift.data.assign(p.input_shift.data(), p.input_shift.data() + p.input_shift.size());
  tensors.push_back(std::move(shift));
  NamedTensor scale{prefix + "input_scale", {p.input_scale.size()}, {}};
  scale.data.assign(p.input_scale.data(), p.input_scale.data() + p.input_scale.size());
  tensors.push_back(std::move(scale));
}

inline PriorNetParams params_from_container(const Container& c, const PriorNetConfig& cfg,
                                            const std::string& prefix) {
  PriorNetParams p;
  p.cfg = cfg;
  p.layout = ParamLayout(cfg);
  p.flat = Eigen::VectorXd::Zero(p.layout.total());
  for (const TensorSpec& s : p.layout.specs()) {
    const NamedTensor& t = c.find(prefix + s.name);
    if (t.element_count() != s.size()) {
      throw std::runtime_error("checkpoint: shape mismatch for '" + s.name + "'");
    }
    for (Eigen::Index i = 0; i < s.size(); ++i) p.flat[s.offset + i] = t.data[i];
  }
  const NamedTensor& shift = c.find(prefix + "input_shift");
  const NamedTensor& scale = c.find(prefix + "input_scale");
  p.input_shift = Eigen::Map<const Eigen::VectorXd>(shift.data.data(),
                                                    static_cast<Eigen::Index>(shift.data.size()));
  p.input_scale = Eigen::Map<const Eigen::VectorXd>(scale.data.data(),
                                                    static_cast<Eigen::Index>(scale.data.size()));
  return p;
}

inline nlohmann::json net_config_to_json(const PriorNetConfig& cfg) {
  return {{"input_dim", cfg.input_dim},
          {"hidden", cfg.hidden},
          {"layers", cfg.layers},
          {"head_hidden", cfg.head_hidden},
          {"log_var_clamp", cfg.log_var_clamp}};
}

inline PriorNetConfig net_config_from_json(const nlohmann::json& j) {
  PriorNetConfig cfg;
  cfg.input_dim = j.at("input_dim").get<int>();
  cfg.hidden = j.at("hidden").get<int>();
  cfg.layers = j.at("layers").get<int>();
  cfg.head_hidden = j.at("head_hidden").get<int>();
  cfg.log_var_clamp = j.at("log_var_clamp").get<double>();
  return cfg;
}

}  // namespace detail

// Round-trippable single-parameter-set file.
inline void save_params(const std::filesystem::path& path, const PriorNetParams& p,
                        nlohmann::json extra_meta = {}) {
  nlohmann::json meta = std::move(extra_meta);
  meta["net"] = detail::net_config_to_json(p.cfg);
  std::vector<NamedTensor> tensors;
  detail::append_params_tensors(tensors, p, "");
  write_container(path, meta, tensors);
}

inline PriorNetParams load_params(const std::filesystem::path& path) {
  const Container c = read_container(path);
  return detail::params_from_container(c, detail::net_config_from_json(c.meta.at("net")), "");
}

// A training checkpoint stores the best-validation and final parameter sets
// side by side; evaluation reports both.
inline void save_checkpoint(const std::filesystem::path& path, const PriorNetParams& best,
                            const PriorNetParams& final_params, nlohmann::json extra_meta = {}) {
  nlohmann::json meta = std::move(extra_meta);
  meta["net"] = detail::net_config_to_json(best.cfg);
  std::vector<NamedTensor> tensors;
  detail::append_params_tensors(tensors, best, "best.");
  detail::append_params_tensors(tensors, final_params, "final.");
  write_container(path, meta, tensors);
}

struct Checkpoint {
  PriorNetParams best;
  PriorNetParams final_params;
  nlohmann::json meta;
};

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const Container c = read_container(path);
  const PriorNetConfig cfg = detail::net_config_from_json(c.meta.at("net"));
  Checkpoint ck;
  ck.best = detail::params_from_container(c, cfg, "best.");
  ck.final_params = detail::params_from_container(c, cfg, "final.");
  ck.meta = c.meta;
  return ck;
}

}  // namespace pdanse

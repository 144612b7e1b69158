#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "pdanse/measurement.hpp"
#include "pdanse/numerics.hpp"
#include "pdanse/rnn_prior.hpp"
#include "pdanse/trainer.hpp"

namespace pdanse {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Seeds {
  std::uint64_t data = 1;
  std::uint64_t train = 2;
  std::uint64_t eval = 3;
};

// Full experiment description: process, measurement system, dataset sizes,
// network and optimizer settings. Everything a run needs, hashable for
// provenance.
struct ExperimentConfig {
  MeasurementKind kind = MeasurementKind::kCubic;
  double smnr_db = 20.0;
  double kappa = 0.0;
  int n_train = 1000;
  int t_train = 200;
  int n_test = 100;
  int t_test = 2000;
  int mc_samples = 10;
  int pf_particles = 300;
  double process_noise_var = 0.1;
  double dt = 0.02;
  int burn_in = 100;
  int taylor_order = 5;
  Seeds seeds;
  TrainConfig train;
  PriorNetConfig net;

  int num_labelled() const { return static_cast<int>(std::llround(kappa * n_train)); }
};

namespace detail {

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    if (j.contains("measurement")) {
      c.kind = measurement_kind_from_string(j.at("measurement").get<std::string>());
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  c.smnr_db = detail::get_or(j, "smnr_db", c.smnr_db);
  c.kappa = detail::get_or(j, "kappa", c.kappa);
  c.n_train = detail::get_or(j, "n_train", c.n_train);
  c.t_train = detail::get_or(j, "t_train", c.t_train);
  c.n_test = detail::get_or(j, "n_test", c.n_test);
  c.t_test = detail::get_or(j, "t_test", c.t_test);
  c.mc_samples = detail::get_or(j, "mc_samples", c.mc_samples);
  c.pf_particles = detail::get_or(j, "pf_particles", c.pf_particles);
  c.process_noise_var = detail::get_or(j, "process_noise_var", c.process_noise_var);
  c.dt = detail::get_or(j, "dt", c.dt);
  c.burn_in = detail::get_or(j, "burn_in", c.burn_in);
  c.taylor_order = detail::get_or(j, "taylor_order", c.taylor_order);
  if (j.contains("seeds")) {
    const auto& s = j.at("seeds");
    c.seeds.data = detail::get_or(s, "data", c.seeds.data);
    c.seeds.train = detail::get_or(s, "train", c.seeds.train);
    c.seeds.eval = detail::get_or(s, "eval", c.seeds.eval);
  }
  // harness-trained models standardize inputs unless a config disables it;
  // the bare library default stays off so the raw input contract holds
  c.train.standardize_inputs = true;
  if (j.contains("train")) {
    const auto& t = j.at("train");
    c.train.batch_size = detail::get_or(t, "batch_size", c.train.batch_size);
    c.train.lr0 = detail::get_or(t, "lr0", c.train.lr0);
    c.train.lr_decay = detail::get_or(t, "lr_decay", c.train.lr_decay);
    c.train.decay_period = detail::get_or(t, "decay_period", c.train.decay_period);
    c.train.max_epochs = detail::get_or(t, "max_epochs", c.train.max_epochs);
    c.train.grad_clip = detail::get_or(t, "grad_clip", c.train.grad_clip);
    c.train.val_fraction = detail::get_or(t, "val_fraction", c.train.val_fraction);
    c.train.standardize_inputs =
        detail::get_or(t, "standardize_inputs", c.train.standardize_inputs);
  }
  if (j.contains("net")) {
    const auto& n = j.at("net");
    c.net.hidden = detail::get_or(n, "hidden", c.net.hidden);
    c.net.layers = detail::get_or(n, "layers", c.net.layers);
    c.net.head_hidden = detail::get_or(n, "head_hidden", c.net.head_hidden);
    c.net.log_var_clamp = detail::get_or(n, "log_var_clamp", c.net.log_var_clamp);
  }

  c.train.mc_samples = c.mc_samples;
  c.train.seed = c.seeds.train;
  c.net.input_dim = MeasurementModel::make(c.kind, 1.0).out_dim();

  if (c.kappa < 0.0 || c.kappa > 1.0) throw ConfigError("kappa must lie in [0, 1]");
  if (c.n_train < 1 || c.t_train < 1) throw ConfigError("training dataset must be non-empty");
  if (c.n_test < 1 || c.t_test < 1) throw ConfigError("test dataset must be non-empty");
  if (c.mc_samples < 1) throw ConfigError("mc_samples must be >= 1");
  if (c.pf_particles < 1) throw ConfigError("pf_particles must be >= 1");
  if (c.process_noise_var < 0.0) throw ConfigError("process_noise_var must be >= 0");
  if (c.dt <= 0.0) throw ConfigError("dt must be > 0");
  if (c.train.lr_decay <= 0.0 || c.train.lr_decay >= 1.0) {
    throw ConfigError("lr_decay must lie in (0, 1)");
  }
  if (c.train.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  return c;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  return {
      {"measurement", to_string(c.kind)},
      {"smnr_db", c.smnr_db},
      {"kappa", c.kappa},
      {"n_train", c.n_train},
      {"t_train", c.t_train},
      {"n_test", c.n_test},
      {"t_test", c.t_test},
      {"mc_samples", c.mc_samples},
      {"pf_particles", c.pf_particles},
      {"process_noise_var", c.process_noise_var},
      {"dt", c.dt},
      {"burn_in", c.burn_in},
      {"taylor_order", c.taylor_order},
      {"seeds", {{"data", c.seeds.data}, {"train", c.seeds.train}, {"eval", c.seeds.eval}}},
      {"train",
       {{"batch_size", c.train.batch_size},
        {"lr0", c.train.lr0},
        {"lr_decay", c.train.lr_decay},
        {"decay_period", c.train.decay_period},
        {"max_epochs", c.train.max_epochs},
        {"grad_clip", c.train.grad_clip},
        {"val_fraction", c.train.val_fraction},
        {"standardize_inputs", c.train.standardize_inputs}}},
      {"net",
       {{"hidden", c.net.hidden},
        {"layers", c.net.layers},
        {"head_hidden", c.net.head_hidden},
        {"log_var_clamp", c.net.log_var_clamp}}},
  };
}

// nlohmann::json dumps object keys sorted, so the hash is canonical.
inline std::uint64_t config_hash(const ExperimentConfig& c) {
  return fnv1a64(config_to_json(c).dump());
}

}  // namespace pdanse

#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdanse/config.hpp"
#include "pdanse/dataset.hpp"
#include "pdanse/inference.hpp"
#include "pdanse/metrics.hpp"
#include "pdanse/particle_filter.hpp"
#include "pdanse/rnn_prior.hpp"

namespace pdanse {

struct GeneratedData {
  Dataset train;
  Dataset test;  // fully labelled
  MeasurementModel model;
};

namespace detail {

inline nlohmann::json provenance_for(const ExperimentConfig& cfg, const MeasurementModel& model,
                                     const char* role) {
  return {{"role", role},
          {"measurement", to_string(cfg.kind)},
          {"smnr_db", cfg.smnr_db},
          {"kappa", cfg.kappa},
          {"sigma_w2", model.noise_var},
          {"process_noise_var", cfg.process_noise_var},
          {"dt", cfg.dt},
          {"seeds", {{"data", cfg.seeds.data}}},
          {"config_hash", config_hash(cfg)}};
}

}  // namespace detail

// Builds the training corpus and the labelled test set. Noise calibration
// uses the training states only; the test set reuses the same measurement
// model. The first round(kappa*N) training trajectories keep their labels.
inline GeneratedData generate_experiment_data(const ExperimentConfig& cfg) {
  const std::uint64_t states_train = derive_seed(cfg.seeds.data, 1);
  const std::uint64_t states_test = derive_seed(cfg.seeds.data, 2);
  const std::uint64_t noise_train = derive_seed(cfg.seeds.data, 3);
  const std::uint64_t noise_test = derive_seed(cfg.seeds.data, 4);

  std::vector<StateTrajectory> train_states;
  train_states.reserve(cfg.n_train);
  for (int i = 0; i < cfg.n_train; ++i) {
    train_states.push_back(generate_trajectory(cfg.t_train, cfg.process_noise_var, cfg.burn_in,
                                               derive_seed(states_train, i), cfg.dt,
                                               cfg.taylor_order));
  }

  MeasurementModel model = MeasurementModel::make(cfg.kind, 1.0);
  model.noise_var = calibrate_sigma_from_smnr(train_states, model, cfg.smnr_db);

  GeneratedData out;
  out.model = model;
  const int n_labelled = cfg.num_labelled();
  for (int i = 0; i < cfg.n_train; ++i) {
    NormalSampler rng(derive_seed(noise_train, i));
    MeasurementTrajectory y = measure_trajectory(train_states[i], model, rng);
    if (i < n_labelled) {
      out.train.add_labelled(std::move(train_states[i]), std::move(y));
    } else {
      out.train.add_unlabelled(std::move(y));
    }
  }
  out.train.provenance = detail::provenance_for(cfg, model, "train");

  for (int j = 0; j < cfg.n_test; ++j) {
    StateTrajectory st = generate_trajectory(cfg.t_test, cfg.process_noise_var, cfg.burn_in,
                                             derive_seed(states_test, j), cfg.dt,
                                             cfg.taylor_order);
    NormalSampler rng(derive_seed(noise_test, j));
    MeasurementTrajectory y = measure_trajectory(st, model, rng);
    out.test.add_labelled(std::move(st), std::move(y));
  }
  out.test.provenance = detail::provenance_for(cfg, model, "test");
  return out;
}

// One row of the results table.
struct MethodResult {
  std::string method;
  double smnr_db_target = 0.0;
  double smnr_db_measured = 0.0;
  double kappa = 0.0;
  double nmse_db_mean = 0.0;
  double nmse_db_std = 0.0;
  double wall_time_s = 0.0;
  int degenerate_events = 0;
};

namespace detail {

inline MethodResult summarize(const std::string& method, const ExperimentConfig& cfg,
                              std::span<const StateTrajectory> truth,
                              std::span<const std::vector<PosteriorSummary>> estimates,
                              double measured_smnr, double seconds, int degenerate) {
  const std::vector<double> per_traj = per_trajectory_nmse_db(truth, estimates);
  double mean = 0.0;
  for (double v : per_traj) mean += v;
  mean /= static_cast<double>(per_traj.size());
  MethodResult r;
  r.method = method;
  r.smnr_db_target = cfg.smnr_db;
  r.smnr_db_measured = measured_smnr;
  r.kappa = cfg.kappa;
  r.nmse_db_mean = mean;
  r.nmse_db_std = sample_std(per_traj);
  r.wall_time_s = seconds;
  r.degenerate_events = degenerate;
  return r;
}

}  // namespace detail

// Runs the learned filter over the labelled test set. Degenerate steps fall
// back to the prior belief and are counted in the result row.
inline MethodResult evaluate_pdanse(const Dataset& test, const PriorNetParams& params,
                                    const MeasurementModel& model, const ExperimentConfig& cfg,
                                    const std::string& method_name) {
  std::vector<StateTrajectory> truth;
  std::vector<std::vector<PosteriorSummary>> estimates;
  FilterStats stats;
  const auto t0 = std::chrono::steady_clock::now();
  for (int j = 0; j < test.num_labelled(); ++j) {
    const LabelledPair& pair = test.labelled(j);
    NormalSampler rng(derive_seed(cfg.seeds.eval, j));
    estimates.push_back(filter_sequence(pair.measurements, params, model, cfg.mc_samples, rng,
                                        DegeneratePolicy::kFallBackToPrior, &stats));
    truth.push_back(pair.states);
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return detail::summarize(method_name, cfg, truth, estimates,
                           measured_smnr_db(truth, model), secs, stats.degenerate_steps);
}

inline MethodResult evaluate_pf(const Dataset& test, const MeasurementModel& model,
                                const ExperimentConfig& cfg) {
  std::vector<StateTrajectory> truth;
  std::vector<std::vector<PosteriorSummary>> estimates;
  PFRunStats stats;
  const auto t0 = std::chrono::steady_clock::now();
  for (int j = 0; j < test.num_labelled(); ++j) {
    const LabelledPair& pair = test.labelled(j);
    PFConfig pf;
    pf.num_particles = cfg.pf_particles;
    pf.seed = derive_seed(cfg.seeds.eval, 0x10000 + static_cast<std::uint64_t>(j));
    pf.burn_in = cfg.burn_in;
    pf.dt = cfg.dt;
    pf.taylor_order = cfg.taylor_order;
    estimates.push_back(
        bootstrap_filter(pair.measurements, pf, cfg.process_noise_var, model, &stats));
    truth.push_back(pair.states);
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return detail::summarize("pf", cfg, truth, estimates, measured_smnr_db(truth, model), secs,
                           stats.degenerate_resets);
}

inline constexpr const char* kResultsCsvHeader =
    "method,smnr_db_target,smnr_db_measured,kappa,nmse_db_mean,nmse_db_std,wall_time_s";

inline void write_results_csv(const std::filesystem::path& path,
                              std::span<const MethodResult> rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_results_csv: cannot open " + path.string());
  out << kResultsCsvHeader << "\n";
  out.precision(10);
  for (const auto& r : rows) {
    out << r.method << ',' << r.smnr_db_target << ',' << r.smnr_db_measured << ',' << r.kappa
        << ',' << r.nmse_db_mean << ',' << r.nmse_db_std << ',' << r.wall_time_s << "\n";
  }
}

// Regroups a results table into per-(method, kappa) series for plotting,
// sorted by target ratio ascending. Returns the written file names.
inline std::vector<std::string> export_plot_series(const std::filesystem::path& results_csv,
                                                   const std::filesystem::path& out_dir) {
  std::ifstream in(results_csv);
  if (!in) throw std::runtime_error("export_plot_series: cannot open " + results_csv.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("export_plot_series: empty results file");

  struct Point {
    double smnr, mean, std;
  };
  std::map<std::string, std::vector<Point>> series;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() < 7) throw std::runtime_error("export_plot_series: malformed row: " + line);
    const std::string key = fields[0] + "_kappa" + fields[3];
    series[key].push_back({std::stod(fields[1]), std::stod(fields[4]), std::stod(fields[5])});
  }

  std::vector<std::string> written;
  std::filesystem::create_directories(out_dir);
  for (auto& [key, points] : series) {
    std::sort(points.begin(), points.end(),
              [](const Point& a, const Point& b) { return a.smnr < b.smnr; });
    std::string base = "series_" + key;
    for (char& ch : base) {
      if (ch == '.') ch = 'p';
    }
    const std::string name = base + ".csv";
    std::ofstream out(out_dir / name, std::ios::trunc);
    out << "smnr_db,nmse_db_mean,nmse_db_std\n";
    out.precision(10);
    for (const auto& p : points) out << p.smnr << ',' << p.mean << ',' << p.std << "\n";
    written.push_back(name);
  }
  return written;
}

}  // namespace pdanse

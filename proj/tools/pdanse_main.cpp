// Command-line front end: dataset generation, training, filtering,
// evaluation, and plot-data export.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pdanse/pdanse.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct CommonArgs {
  std::string config_path;
  std::optional<double> smnr_db;
  std::optional<double> kappa;
  std::optional<std::uint64_t> seed;
  std::optional<int> particles;
  std::string out_dir = ".";
  bool log_json = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config (JSON)")->required();
  cmd->add_option("--smnr-db", args.smnr_db, "override target SMNR in dB");
  cmd->add_option("--kappa", args.kappa, "override labelled fraction");
  cmd->add_option("--seed", args.seed, "override master seed (data/train/eval derive from it)");
  cmd->add_option("--particles", args.particles, "override PF particle count");
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_flag("--log-json", args.log_json, "stream line-delimited JSON metrics on stdout");
}

pdanse::ExperimentConfig load_config(const CommonArgs& args) {
  std::ifstream in(args.config_path);
  if (!in) throw pdanse::ConfigError("cannot open config file: " + args.config_path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw pdanse::ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  pdanse::ExperimentConfig cfg = pdanse::parse_config(j);
  if (args.smnr_db) cfg.smnr_db = *args.smnr_db;
  if (args.kappa) {
    cfg.kappa = *args.kappa;
    if (cfg.kappa < 0.0 || cfg.kappa > 1.0) throw pdanse::ConfigError("kappa must lie in [0, 1]");
  }
  if (args.seed) {
    cfg.seeds.data = pdanse::derive_seed(*args.seed, 0);
    cfg.seeds.train = pdanse::derive_seed(*args.seed, 1);
    cfg.seeds.eval = pdanse::derive_seed(*args.seed, 2);
    cfg.train.seed = cfg.seeds.train;
  }
  if (args.particles) {
    cfg.pf_particles = *args.particles;
    if (cfg.pf_particles < 1) throw pdanse::ConfigError("particles must be >= 1");
  }
  return cfg;
}

int cmd_generate(const CommonArgs& args) {
  const pdanse::ExperimentConfig cfg = load_config(args);
  fs::create_directories(args.out_dir);
  pdanse::GeneratedData data = pdanse::generate_experiment_data(cfg);
  pdanse::save_dataset(fs::path(args.out_dir) / "train.pdanse", data.train);
  pdanse::save_dataset(fs::path(args.out_dir) / "test.pdanse", data.test);
  if (args.log_json) {
    json msg = {{"event", "generated"},
                {"sigma_w2", data.model.noise_var},
                {"n_labelled", data.train.num_labelled()},
                {"n_unlabelled", data.train.num_unlabelled()},
                {"n_test", data.test.num_labelled()}};
    std::cout << msg.dump() << "\n";
  } else {
    std::cout << "wrote train.pdanse (" << data.train.num_labelled() << " labelled, "
              << data.train.num_unlabelled() << " unlabelled) and test.pdanse ("
              << data.test.num_labelled() << " trajectories) to " << args.out_dir << "\n";
  }
  return kExitOk;
}

pdanse::MeasurementModel model_from_dataset(const pdanse::ExperimentConfig& cfg,
                                            const pdanse::Dataset& data) {
  pdanse::MeasurementModel model = pdanse::MeasurementModel::make(cfg.kind, 1.0);
  if (!data.provenance.contains("sigma_w2")) {
    throw pdanse::ConfigError("dataset file lacks sigma_w2 provenance");
  }
  model.noise_var = data.provenance.at("sigma_w2").get<double>();
  return model;
}

int cmd_train(const CommonArgs& args, const std::string& data_dir) {
  const pdanse::ExperimentConfig cfg = load_config(args);
  const fs::path dir = data_dir.empty() ? fs::path(args.out_dir) : fs::path(data_dir);
  const pdanse::Dataset train_data = pdanse::load_dataset(dir / "train.pdanse");
  const pdanse::MeasurementModel model = model_from_dataset(cfg, train_data);

  fs::create_directories(args.out_dir);
  std::ofstream metrics_file(fs::path(args.out_dir) / "metrics.jsonl", std::ios::trunc);
  const auto sink = [&](const pdanse::EpochMetrics& m) {
    const json line = {{"epoch", m.epoch},
                       {"lr", m.lr},
                       {"train_loss", m.train_loss},
                       {"val_loss", m.val_loss},
                       {"wall_time_s", m.wall_time_s}};
    metrics_file << line.dump() << "\n";
    metrics_file.flush();
    if (args.log_json) std::cout << line.dump() << "\n" << std::flush;
  };

  const pdanse::TrainResult result = pdanse::train(train_data, model, cfg.net, cfg.train, sink);

  json meta = {{"config_hash", pdanse::config_hash(cfg)},
               {"sigma_w2", model.noise_var},
               {"measurement", pdanse::to_string(cfg.kind)},
               {"kappa", cfg.kappa},
               {"best_epoch", result.best_epoch}};
  pdanse::save_checkpoint(fs::path(args.out_dir) / "checkpoint.pdanse", result.best_params,
                          result.final_params, meta);
  if (!args.log_json) {
    std::cout << "checkpoint written to " << (fs::path(args.out_dir) / "checkpoint.pdanse")
              << " (best epoch " << result.best_epoch << ")\n";
  }
  return kExitOk;
}

int cmd_filter(const CommonArgs& args, const std::string& data_dir,
               const std::string& checkpoint, const std::string& method) {
  const pdanse::ExperimentConfig cfg = load_config(args);
  const fs::path dir = data_dir.empty() ? fs::path(args.out_dir) : fs::path(data_dir);
  const pdanse::Dataset test = pdanse::load_dataset(dir / "test.pdanse");
  const pdanse::MeasurementModel model = model_from_dataset(cfg, test);
  fs::create_directories(args.out_dir);

  std::vector<pdanse::NamedTensor> tensors;
  const int n = test.num_labelled();
  const int t_len = n > 0 ? test.labelled(0).measurements.length() : 0;
  pdanse::NamedTensor means{"posterior_means", {n, t_len, 3}, {}};
  pdanse::NamedTensor covs{"posterior_covs", {n, t_len, 3, 3}, {}};

  auto record = [&](const std::vector<pdanse::PosteriorSummary>& summaries) {
    for (const auto& s : summaries) {
      means.data.insert(means.data.end(), s.mean.data(), s.mean.data() + 3);
      covs.data.insert(covs.data.end(), s.cov.data(), s.cov.data() + 9);
    }
  };

  if (method == "pf") {
    for (int j = 0; j < n; ++j) {
      pdanse::PFConfig pf;
      pf.num_particles = cfg.pf_particles;
      pf.seed = pdanse::derive_seed(cfg.seeds.eval, 0x10000 + static_cast<std::uint64_t>(j));
      pf.burn_in = cfg.burn_in;
      pf.dt = cfg.dt;
      pf.taylor_order = cfg.taylor_order;
      record(pdanse::bootstrap_filter(test.labelled(j).measurements, pf, cfg.process_noise_var,
                                      model));
    }
  } else {
    if (checkpoint.empty()) throw pdanse::ConfigError("--checkpoint required for pdanse filter");
    const pdanse::Checkpoint ck = pdanse::load_checkpoint(checkpoint);
    for (int j = 0; j < n; ++j) {
      pdanse::NormalSampler rng(pdanse::derive_seed(cfg.seeds.eval, j));
      record(pdanse::filter_sequence(test.labelled(j).measurements, ck.best, model,
                                     cfg.mc_samples, rng,
                                     pdanse::DegeneratePolicy::kFallBackToPrior));
    }
  }
  tensors.push_back(std::move(means));
  tensors.push_back(std::move(covs));
  const json meta = {{"method", method}, {"config_hash", pdanse::config_hash(cfg)}};
  pdanse::write_container(fs::path(args.out_dir) / ("estimates_" + method + ".pdanse"), meta,
                          tensors);
  if (!args.log_json) {
    std::cout << "estimates written for method " << method << "\n";
  }
  return kExitOk;
}

int cmd_evaluate(const CommonArgs& args, const std::string& data_dir,
                 const std::string& checkpoint, const std::string& methods) {
  const pdanse::ExperimentConfig cfg = load_config(args);
  const fs::path dir = data_dir.empty() ? fs::path(args.out_dir) : fs::path(data_dir);
  const pdanse::Dataset test = pdanse::load_dataset(dir / "test.pdanse");
  const pdanse::MeasurementModel model = model_from_dataset(cfg, test);
  fs::create_directories(args.out_dir);

  std::vector<pdanse::MethodResult> rows;
  const bool want_pf = methods.find("pf") != std::string::npos;
  const bool want_pdanse = methods.find("pdanse") != std::string::npos;
  if (want_pf) rows.push_back(pdanse::evaluate_pf(test, model, cfg));
  if (want_pdanse) {
    if (checkpoint.empty()) throw pdanse::ConfigError("--checkpoint required to evaluate pdanse");
    const pdanse::Checkpoint ck = pdanse::load_checkpoint(checkpoint);
    rows.push_back(pdanse::evaluate_pdanse(test, ck.best, model, cfg, "pdanse-best"));
    rows.push_back(pdanse::evaluate_pdanse(test, ck.final_params, model, cfg, "pdanse-final"));
  }
  pdanse::write_results_csv(fs::path(args.out_dir) / "results.csv", rows);

  for (const auto& r : rows) {
    if (args.log_json) {
      const json line = {{"method", r.method},
                         {"smnr_db_target", r.smnr_db_target},
                         {"smnr_db_measured", r.smnr_db_measured},
                         {"kappa", r.kappa},
                         {"nmse_db_mean", r.nmse_db_mean},
                         {"nmse_db_std", r.nmse_db_std},
                         {"wall_time_s", r.wall_time_s},
                         {"degenerate_events", r.degenerate_events}};
      std::cout << line.dump() << "\n";
    } else {
      std::cout << r.method << ": NMSE " << r.nmse_db_mean << " dB (std " << r.nmse_db_std
                << "), measured SMNR " << r.smnr_db_measured << " dB, " << r.wall_time_s
                << " s\n";
    }
  }
  return kExitOk;
}

int cmd_export_plot(const std::string& results, const std::string& out_dir) {
  const auto files = pdanse::export_plot_series(results, out_dir);
  for (const auto& f : files) std::cout << f << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"data-driven state estimation benchmark harness"};
  app.require_subcommand(1);

  CommonArgs gen_args, train_args, filter_args, eval_args;
  std::string train_data_dir, filter_data_dir, eval_data_dir;
  std::string filter_checkpoint, eval_checkpoint;
  std::string filter_method = "pdanse", eval_methods = "pdanse,pf";
  std::string results_csv, plot_out = ".";

  CLI::App* gen = app.add_subcommand("generate", "generate train/test dataset files");
  add_common(gen, gen_args);

  CLI::App* tr = app.add_subcommand("train", "train the prior network on a dataset");
  add_common(tr, train_args);
  tr->add_option("--data", train_data_dir, "directory holding train.pdanse");

  CLI::App* fl = app.add_subcommand("filter", "write posterior estimates for the test set");
  add_common(fl, filter_args);
  fl->add_option("--data", filter_data_dir, "directory holding test.pdanse");
  fl->add_option("--checkpoint", filter_checkpoint, "trained checkpoint file");
  fl->add_option("--method", filter_method, "pdanse or pf")
      ->check(CLI::IsMember({"pdanse", "pf"}));

  CLI::App* ev = app.add_subcommand("evaluate", "NMSE results table over the test set");
  add_common(ev, eval_args);
  ev->add_option("--data", eval_data_dir, "directory holding test.pdanse");
  ev->add_option("--checkpoint", eval_checkpoint, "trained checkpoint file");
  ev->add_option("--methods", eval_methods, "comma-separated subset of {pdanse,pf}");

  CLI::App* ex = app.add_subcommand("export-plot", "split a results table into plot series");
  std::string export_config;
  ex->add_option("--config", export_config, "experiment config (validated if given)");
  ex->add_option("--results", results_csv, "results.csv from evaluate")->required();
  ex->add_option("--out", plot_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_generate(gen_args);
    if (tr->parsed()) return cmd_train(train_args, train_data_dir);
    if (fl->parsed()) return cmd_filter(filter_args, filter_data_dir, filter_checkpoint,
                                        filter_method);
    if (ev->parsed()) return cmd_evaluate(eval_args, eval_data_dir, eval_checkpoint,
                                          eval_methods);
    if (ex->parsed()) {
      if (!export_config.empty()) {
        CommonArgs probe;
        probe.config_path = export_config;
        load_config(probe);
      }
      return cmd_export_plot(results_csv, plot_out);
    }
  } catch (const pdanse::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const pdanse::DegenerateWeightsError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const pdanse::TrainingError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const pdanse::CalibrationError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}

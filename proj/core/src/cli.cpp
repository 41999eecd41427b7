#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "covdiff/classifier_io.hpp"
#include "covdiff/harness.hpp"
#include "covdiff/rng.hpp"
#include "covdiff/version.hpp"

namespace covdiff {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::string models_dir;
  std::optional<std::uint64_t> seed_flag;
  std::vector<std::string> scheme_flags;
  bool json_out = false;
};

void add_common_options(CLI::App* sub, CommonOpts& opts, bool with_models_dir) {
  sub->add_option("--config", opts.config_path,
                  "experiment config JSON file (built-in defaults if omitted)");
  sub->add_option("--seed", opts.seed_flag,
                  "root seed override (takes precedence over COVDIFF_SEED)");
  sub->add_option("--out-dir", opts.out_dir,
                  "output directory (default: results/<run-id>)");
  sub->add_option("--scheme", opts.scheme_flags,
                  "restrict to these schemes (repeatable): proposed, raw_only, "
                  "diff_only, thresholding, mdl");
  sub->add_flag("--json", opts.json_out, "print the run summary as JSON");
  if (with_models_dir) {
    sub->add_option("--models-dir", opts.models_dir,
                    "directory with trained model files (default: the output dir)");
  }
}

// Seed precedence: --seed flag, then COVDIFF_SEED, then the config file.
ExperimentConfig resolve_config(const CommonOpts& opts) {
  ExperimentConfig cfg;
  if (!opts.config_path.empty()) cfg = load_experiment_config(opts.config_path);
  if (const char* env = std::getenv("COVDIFF_SEED"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') {
      throw std::invalid_argument("COVDIFF_SEED must be a nonnegative integer");
    }
    cfg.root_seed = v;
  }
  if (opts.seed_flag) cfg.root_seed = *opts.seed_flag;
  if (!opts.scheme_flags.empty()) {
    cfg.schemes.clear();
    for (const std::string& s : opts.scheme_flags) {
      cfg.schemes.push_back(scheme_from_string(s));
    }
  }
  cfg.validate();
  return cfg;
}

double best_val_accuracy(const std::vector<EpochStats>& history) {
  double best = 0.0;
  for (const EpochStats& e : history) best = std::max(best, e.val_accuracy);
  return best;
}

json result_rows_json(const ResultTable& table) {
  json rows = json::array();
  for (const ResultRow& r : table.rows) {
    rows.push_back(json{{"scheme", to_string(r.scheme)},
                        {table.sweep_name, r.sweep_value},
                        {"accuracy", r.accuracy},
                        {"n_test", r.n_test},
                        {"wilson_low", r.wilson_low},
                        {"wilson_high", r.wilson_high}});
  }
  return rows;
}

void print_result_rows(std::ostream& out, const ResultTable& table) {
  for (const ResultRow& r : table.rows) {
    char line[160];
    std::snprintf(line, sizeof(line), "  %-12s %s=%-6g accuracy=%.4f [%.4f, %.4f]",
                  to_string(r.scheme), table.sweep_name.c_str(), r.sweep_value,
                  r.accuracy, r.wilson_low, r.wilson_high);
    out << line << "\n";
  }
}

json cmd_gen_data(const ExperimentConfig& cfg, const fs::path& dir) {
  const std::uint64_t scenario_hash = config_hash(cfg.scenario);
  const struct {
    const char* name;
    std::size_t n;
    std::uint64_t stream;
  } pieces[] = {{"features_train.csv", cfg.n_train, seed_streams::kTrain},
                {"features_val.csv", cfg.n_val, seed_streams::kVal},
                {"features_test.csv", cfg.n_test, seed_streams::kTestBase}};
  json outputs = json::array();
  for (const auto& piece : pieces) {
    const FeatureDataset set =
        build_feature_dataset(cfg.scenario, piece.n, LabelDistribution::uniform(),
                              derive_seed(cfg.root_seed, piece.stream));
    write_features_csv((dir / piece.name).string(), set, scenario_hash);
    outputs.push_back(piece.name);
  }
  return json{{"outputs", outputs},
              {"n_train", cfg.n_train},
              {"n_val", cfg.n_val},
              {"n_test", cfg.n_test}};
}

json cmd_train(const ExperimentConfig& cfg, const fs::path& dir) {
  const std::uint64_t scenario_hash = config_hash(cfg.scenario);
  const FeatureDataset train_set =
      build_feature_dataset(cfg.scenario, cfg.n_train, LabelDistribution::uniform(),
                            derive_seed(cfg.root_seed, seed_streams::kTrain));
  const FeatureDataset val_set =
      build_feature_dataset(cfg.scenario, cfg.n_val, LabelDistribution::uniform(),
                            derive_seed(cfg.root_seed, seed_streams::kVal));
  const SchemeModels models = train_schemes(cfg, train_set, val_set);

  json outputs = json::array();
  json val_accuracy = json::object();
  const auto save = [&](const std::optional<TrainResult>& trained,
                        ClassifierVariant variant, Scheme scheme, const char* file) {
    if (!trained) return;
    ClassifierBundle bundle{trained->model, variant_train_config(cfg, variant),
                            scenario_hash, trained->history};
    save_classifier((dir / file).string(), bundle);
    outputs.push_back(file);
    val_accuracy[to_string(scheme)] = best_val_accuracy(trained->history);
  };
  save(models.full, ClassifierVariant::Full, Scheme::Proposed, "model_full.json");
  save(models.raw_only, ClassifierVariant::RawOnly, Scheme::RawOnly,
       "model_raw_only.json");
  save(models.diff_only, ClassifierVariant::DiffOnly, Scheme::DiffOnly,
       "model_diff_only.json");
  if (models.threshold) {
    save_threshold((dir / "threshold.json").string(), *models.threshold, scenario_hash);
    outputs.push_back("threshold.json");
    val_accuracy[to_string(Scheme::Thresholding)] = models.threshold->calibration_accuracy;
  }
  return json{{"outputs", outputs}, {"validation_accuracy", val_accuracy}};
}

json cmd_eval(const ExperimentConfig& cfg, const fs::path& dir,
              const fs::path& models_dir) {
  const std::uint64_t scenario_hash = config_hash(cfg.scenario);
  const auto load_network = [&](const char* file) {
    ClassifierBundle bundle = load_classifier((models_dir / file).string());
    if (bundle.dataset_config_hash != scenario_hash) {
      throw std::runtime_error(std::string(file) + ": trained under config " +
                               hash_hex(bundle.dataset_config_hash) +
                               " but evaluating config " + hash_hex(scenario_hash));
    }
    return TrainResult{std::move(bundle.model), std::move(bundle.history)};
  };

  SchemeModels models;
  for (Scheme scheme : cfg.schemes) {
    switch (scheme) {
      case Scheme::Proposed: models.full = load_network("model_full.json"); break;
      case Scheme::RawOnly: models.raw_only = load_network("model_raw_only.json"); break;
      case Scheme::DiffOnly:
        models.diff_only = load_network("model_diff_only.json");
        break;
      case Scheme::Thresholding:
        models.threshold =
            load_threshold((models_dir / "threshold.json").string(), scenario_hash);
        break;
      default: break;  // MDL needs no trained artifact
    }
  }

  const FeatureDataset test_set =
      build_feature_dataset(cfg.scenario, cfg.n_test, LabelDistribution::uniform(),
                            derive_seed(cfg.root_seed, seed_streams::kTestBase));
  ResultTable table;
  table.sweep_name = "snr_db";
  const auto window = static_cast<std::size_t>(cfg.scenario.window_samples());
  for (Scheme scheme : cfg.schemes) {
    const std::vector<int> predicted =
        predict_scheme(scheme, models, test_set, window, cfg.scenario.k_gf_max);
    const AccuracyResult acc = evaluate_accuracy(predicted, test_set.labels);
    table.rows.push_back({scheme, cfg.scenario.snr_db, acc.accuracy, acc.n,
                          acc.wilson_low, acc.wilson_high});
  }
  write_result_files((dir / "eval.csv").string(), table, config_hash(cfg));
  return json{{"outputs", json::array({"eval.csv", "eval.dat"})},
              {"rows", result_rows_json(table)}};
}

json cmd_sweep(const ExperimentConfig& cfg, const fs::path& dir, bool sweep_snr) {
  const ResultTable table = sweep_snr ? run_snr_sweep(cfg) : run_kt_sweep(cfg);
  const char* csv = sweep_snr ? "snr_sweep.csv" : "kt_sweep.csv";
  const char* dat = sweep_snr ? "snr_sweep.dat" : "kt_sweep.dat";
  write_result_files((dir / csv).string(), table, config_hash(cfg));
  return json{{"outputs", json::array({csv, dat})}, {"rows", result_rows_json(table)}};
}

json cmd_corr_curve(const ExperimentConfig& cfg, const fs::path& dir) {
  const std::vector<CorrPoint> curve = run_corr_curve(cfg);
  write_corr_files((dir / "corr_curve.csv").string(), curve, config_hash(cfg));
  json rows = json::array();
  for (const CorrPoint& pt : curve) {
    rows.push_back(json{{"delta_f", pt.delta_f},
                        {"rho_mc", pt.rho_mc},
                        {"rho_closed", pt.rho_closed}});
  }
  return json{{"outputs", json::array({"corr_curve.csv", "corr_curve.dat"})},
              {"rows", rows}};
}

json cmd_bound(const ExperimentConfig& cfg, const fs::path& dir) {
  const DeviationReport report = run_deviation_experiment(cfg);
  write_deviation_files((dir / "deviation_report.csv").string(), report,
                        config_hash(cfg));
  json rows = json::array();
  for (const DeviationRow& r : report.rows) {
    rows.push_back(json{{"rho_th", r.rho_th},
                        {"span", r.span},
                        {"empirical_mean", r.empirical_mean},
                        {"empirical_stderr", r.empirical_stderr},
                        {"bound", r.bound},
                        {"epsilon_h", r.epsilon_h}});
  }
  return json{{"outputs", json::array({"deviation_report.csv", "deviation_report.dat"})},
              {"e_h_norm_sq", report.e_h_norm_sq},
              {"e_h_norm_sq_stderr", report.e_h_norm_sq_stderr},
              {"r_x_norm", report.r_x_norm},
              {"rows", rows}};
}

json cmd_report(const ExperimentConfig& cfg, const fs::path& dir) {
  json outputs = json::array();
  json sections = json::object();
  const auto merge = [&](const char* key, json section) {
    for (const auto& f : section.at("outputs")) outputs.push_back(f);
    section.erase("outputs");
    sections[key] = std::move(section);
  };
  merge("corr_curve", cmd_corr_curve(cfg, dir));
  merge("deviation", cmd_bound(cfg, dir));
  merge("snr_sweep", cmd_sweep(cfg, dir, true));
  merge("kt_sweep", cmd_sweep(cfg, dir, false));
  return json{{"outputs", outputs}, {"sections", sections}};
}

void print_human_summary(std::ostream& out, const json& summary, const fs::path& dir) {
  out << summary.at("command").get<std::string>() << " run "
      << summary.at("run_id").get<std::string>() << " (seed "
      << summary.at("root_seed").get<std::uint64_t>() << ")\n";
  for (const auto& f : summary.at("outputs")) {
    out << "  wrote " << (dir / f.get<std::string>()).string() << "\n";
  }
  if (summary.contains("validation_accuracy")) {
    for (const auto& item : summary.at("validation_accuracy").items()) {
      char line[96];
      std::snprintf(line, sizeof(line), "  %-12s best validation accuracy %.4f",
                    item.key().c_str(), item.value().get<double>());
      out << line << "\n";
    }
  }
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out,
                 std::ostream& err) {
  CLI::App app{"user-stream sensing via covariance differencing"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  CommonOpts opts;
  struct Command {
    const char* name;
    const char* help;
    bool models_dir;
  };
  const Command commands[] = {
      {"gen-data", "generate train/val/test feature CSVs for the configured scenario",
       false},
      {"train", "train the classifier variants and calibrate the threshold", false},
      {"eval", "evaluate trained schemes on a fresh test set", true},
      {"sweep-snr", "accuracy-versus-SNR comparison of the configured schemes", false},
      {"sweep-kt", "accuracy versus the number of pre-existing streams", false},
      {"corr-curve", "frequency-correlation curve, Monte-Carlo and closed form", false},
      {"bound", "covariance deviation bound versus the empirical deviation", false},
      {"report", "corr-curve + bound + both sweeps in one output directory", false},
  };
  for (const Command& c : commands) {
    add_common_options(app.add_subcommand(c.name, c.help), opts, c.models_dir);
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 1;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const ExperimentConfig cfg = resolve_config(opts);
    const std::string id =
        command + "-" + hash_hex(config_hash(cfg)).substr(0, 8) + "-s" +
        std::to_string(cfg.root_seed);
    const fs::path dir = opts.out_dir.empty() ? fs::path("results") / id
                                              : fs::path(opts.out_dir);
    fs::create_directories(dir);

    json summary{{"artifact_version", kArtifactVersion},
                 {"tool_version", kVersion},
                 {"command", command},
                 {"run_id", id},
                 {"config_hash", hash_hex(config_hash(cfg))},
                 {"root_seed", cfg.root_seed}};
    json body;
    if (command == "gen-data") {
      body = cmd_gen_data(cfg, dir);
    } else if (command == "train") {
      body = cmd_train(cfg, dir);
    } else if (command == "eval") {
      const fs::path models_dir =
          opts.models_dir.empty() ? dir : fs::path(opts.models_dir);
      body = cmd_eval(cfg, dir, models_dir);
    } else if (command == "sweep-snr") {
      body = cmd_sweep(cfg, dir, true);
    } else if (command == "sweep-kt") {
      body = cmd_sweep(cfg, dir, false);
    } else if (command == "corr-curve") {
      body = cmd_corr_curve(cfg, dir);
    } else if (command == "bound") {
      body = cmd_bound(cfg, dir);
    } else {
      body = cmd_report(cfg, dir);
    }
    summary.update(body);
    summary["outputs"].push_back("config.json");
    write_text_atomic((dir / "config.json").string(), experiment_config_to_json(cfg));
    write_text_atomic((dir / "summary.json").string(), summary.dump(2) + "\n");

    if (opts.json_out) {
      out << summary.dump(2) << "\n";
    } else {
      print_human_summary(out, summary, dir);
      if (body.contains("rows") && (command == "sweep-snr" || command == "sweep-kt" ||
                                    command == "eval")) {
        ResultTable table;
        table.sweep_name = command == "sweep-kt" ? "k_pre" : "snr_db";
        for (const auto& row : body.at("rows")) {
          table.rows.push_back({scheme_from_string(row.at("scheme").get<std::string>()),
                                row.at(table.sweep_name).get<double>(),
                                row.at("accuracy").get<double>(),
                                row.at("n_test").get<std::size_t>(),
                                row.at("wilson_low").get<double>(),
                                row.at("wilson_high").get<double>()});
        }
        print_result_rows(out, table);
      }
    }
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace covdiff

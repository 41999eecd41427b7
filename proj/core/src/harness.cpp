#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include "covdiff/harness.hpp"
#include "covdiff/parallel.hpp"
#include "covdiff/rng.hpp"

namespace covdiff {

namespace {

using namespace seed_streams;

// Pair i of a mixed set draws its scenario from variant(i % n_variants), so
// the grid coverage is exact up to remainder and independent of n_pairs.
template <typename Variant>
FeatureDataset build_mixed_features(const ScenarioConfig& base, std::size_t n_pairs,
                                    std::uint64_t root_seed, std::size_t n_variants,
                                    const Variant& variant, unsigned n_workers) {
  if (n_variants == 0) throw std::invalid_argument("mixed features: empty grid");
  for (std::size_t v = 0; v < n_variants; ++v) {
    ScenarioConfig cfg = base;
    variant(cfg, v);
    cfg.validate();
  }
  FeatureDataset dataset;
  dataset.n_rx = static_cast<std::size_t>(base.n_rx);
  dataset.features.resize(n_pairs);
  dataset.labels.resize(n_pairs);
  parallel_for(
      n_pairs,
      [&](std::size_t i) {
        ScenarioConfig cfg = base;
        variant(cfg, i % n_variants);
        Rng rng(derive_seed(root_seed, i));
        const int d = static_cast<int>(
            rng.uniform_int(static_cast<std::uint64_t>(cfg.k_gf_max) + 1));
        const SensingWindowPair pair = generate_pair(cfg, d, rng);
        dataset.features[i] = sense_features(pair);
        dataset.labels[i] = pair.label_d;
      },
      n_workers);
  return dataset;
}

bool scheme_requested(const ExperimentConfig& cfg, Scheme s) {
  return std::find(cfg.schemes.begin(), cfg.schemes.end(), s) != cfg.schemes.end();
}

const TwoStreamMlp& require_model(const std::optional<TrainResult>& trained,
                                  const char* name) {
  if (!trained) {
    throw std::invalid_argument(std::string("predict_scheme: the ") + name +
                                " network was not trained");
  }
  return trained->model;
}

void append_num(std::string& line, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  line += buf;
}

std::string stamp_line(const char* kind, std::uint64_t config_hash, char comment) {
  std::string line(1, comment);
  line += " covdiff-";
  line += kind;
  line += " v";
  line += std::to_string(kArtifactVersion);
  line += " config=";
  line += hash_hex(config_hash);
  line += "\n";
  return line;
}

std::string dat_twin_path(const std::string& csv_path) {
  std::filesystem::path p(csv_path);
  p.replace_extension(".dat");
  return p.string();
}

// Emits the same rows twice: comma-separated with a header row (CSV), and
// space-separated with commented headers (gnuplot .dat).
void write_table_pair(const std::string& csv_path, const char* kind,
                      std::uint64_t config_hash,
                      const std::vector<std::string>& extra_comments,
                      const std::string& header,
                      const std::vector<std::vector<std::string>>& rows) {
  std::string csv = stamp_line(kind, config_hash, '#');
  std::string dat = csv;
  for (const std::string& comment : extra_comments) {
    csv += "# " + comment + "\n";
    dat += "# " + comment + "\n";
  }
  csv += header;
  csv += "\n";
  dat += "# " + header + "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) {
        csv += ',';
        dat += ' ';
      }
      csv += row[i];
      dat += row[i];
    }
    csv += '\n';
    dat += '\n';
  }
  write_text_atomic(csv_path, csv);
  write_text_atomic(dat_twin_path(csv_path), dat);
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

ResultTable run_sweep(const ExperimentConfig& cfg, bool sweep_snr) {
  cfg.validate();
  ResultTable table;
  table.sweep_name = sweep_snr ? "snr_db" : "k_pre";

  const int k_max = cfg.scenario.k_gf_max;
  const auto window = static_cast<std::size_t>(cfg.scenario.window_samples());
  const std::size_t n_points =
      sweep_snr ? cfg.sweep.snr_grid_db.size() : cfg.sweep.kt_grid.size();
  const auto apply_point = [&](ScenarioConfig& sc, std::size_t p) {
    if (sweep_snr) {
      sc.snr_db = cfg.sweep.snr_grid_db[p];
    } else {
      sc.k_pre = cfg.sweep.kt_grid[p];
    }
  };

  // One model set spanning the sweep, trained on grid-mixed data, unless
  // per-point retraining was requested.
  SchemeModels shared;
  if (!cfg.sweep.retrain_per_point) {
    const auto build = [&](std::size_t n, std::uint64_t stream) {
      return build_mixed_features(cfg.scenario, n, derive_seed(cfg.root_seed, stream),
                                  n_points, apply_point, 0);
    };
    shared = train_schemes(cfg, build(cfg.n_train, kTrain),
                           build(cfg.n_val, kVal));
  }

  for (std::size_t p = 0; p < n_points; ++p) {
    ScenarioConfig point = cfg.scenario;
    apply_point(point, p);
    const double sweep_value =
        sweep_snr ? cfg.sweep.snr_grid_db[p] : static_cast<double>(cfg.sweep.kt_grid[p]);

    const FeatureDataset test_set =
        build_feature_dataset(point, cfg.n_test, LabelDistribution::uniform(),
                              derive_seed(cfg.root_seed, kTestBase + p));

    SchemeModels local;
    const SchemeModels* models = &shared;
    if (cfg.sweep.retrain_per_point) {
      ExperimentConfig point_cfg = cfg;
      point_cfg.scenario = point;
      local = train_schemes(
          point_cfg,
          build_feature_dataset(point, cfg.n_train, LabelDistribution::uniform(),
                                derive_seed(cfg.root_seed, kTrain)),
          build_feature_dataset(point, cfg.n_val, LabelDistribution::uniform(),
                                derive_seed(cfg.root_seed, kVal)));
      models = &local;
    }

    for (Scheme scheme : cfg.schemes) {
      const std::vector<int> predicted =
          predict_scheme(scheme, *models, test_set, window, k_max);
      const AccuracyResult acc = evaluate_accuracy(predicted, test_set.labels);
      table.rows.push_back({scheme, sweep_value, acc.accuracy, acc.n, acc.wilson_low,
                            acc.wilson_high});
    }
  }
  return table;
}

}  // namespace

void write_text_atomic(const std::string& path, const std::string& content) {
  // Write-temp-then-rename so readers never observe a half-written artifact.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open output file: " + tmp);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

AccuracyResult evaluate_accuracy(const std::vector<int>& predicted,
                                 const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) {
    throw std::invalid_argument("evaluate_accuracy: prediction/truth size mismatch");
  }
  if (truth.empty()) throw std::invalid_argument("evaluate_accuracy: empty sample");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predicted[i] == truth[i]) ++hits;
  }
  AccuracyResult r;
  r.n = truth.size();
  r.accuracy = static_cast<double>(hits) / static_cast<double>(r.n);

  // Wilson 95% score interval.
  const double z = 1.96;
  const double n = static_cast<double>(r.n);
  const double p = r.accuracy;
  const double denom = 1.0 + z * z / n;
  const double center = (p + z * z / (2.0 * n)) / denom;
  const double half =
      z / denom * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n));
  r.wilson_low = std::max(0.0, center - half);
  r.wilson_high = std::min(1.0, center + half);
  return r;
}

AccuracyResult evaluate_accuracy(const std::function<int(const FeatureVector&)>& predict,
                                 const FeatureDataset& dataset) {
  if (!predict) throw std::invalid_argument("evaluate_accuracy: null predictor");
  std::vector<int> predicted(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    predicted[i] = predict(dataset.features[i]);
  }
  return evaluate_accuracy(predicted, dataset.labels);
}

FeatureDataset build_mixed_snr_features(const ScenarioConfig& base,
                                        const std::vector<double>& snr_grid_db,
                                        std::size_t n_pairs, std::uint64_t root_seed,
                                        unsigned n_workers) {
  return build_mixed_features(
      base, n_pairs, root_seed, snr_grid_db.size(),
      [&](ScenarioConfig& cfg, std::size_t v) { cfg.snr_db = snr_grid_db[v]; },
      n_workers);
}

FeatureDataset build_mixed_kt_features(const ScenarioConfig& base,
                                       const std::vector<int>& kt_grid,
                                       std::size_t n_pairs, std::uint64_t root_seed,
                                       unsigned n_workers) {
  return build_mixed_features(
      base, n_pairs, root_seed, kt_grid.size(),
      [&](ScenarioConfig& cfg, std::size_t v) { cfg.k_pre = kt_grid[v]; }, n_workers);
}

TrainConfig variant_train_config(const ExperimentConfig& cfg, ClassifierVariant variant) {
  // Distinct weight-init/shuffle streams per variant.
  const std::uint64_t seed_base = derive_seed(cfg.root_seed, kTrainInit);
  TrainConfig tc = cfg.train;
  switch (variant) {
    case ClassifierVariant::Full: tc.seed = derive_seed(seed_base, 0); break;
    case ClassifierVariant::RawOnly: tc.seed = derive_seed(seed_base, 1); break;
    default: tc.seed = derive_seed(seed_base, 2); break;
  }
  return tc;
}

SchemeModels train_schemes(const ExperimentConfig& cfg, const FeatureDataset& train_set,
                           const FeatureDataset& val_set) {
  SchemeModels models;
  const int n_classes = cfg.scenario.k_gf_max + 1;
  if (scheme_requested(cfg, Scheme::Proposed)) {
    models.full = train_classifier(ClassifierVariant::Full, train_set, val_set,
                                   variant_train_config(cfg, ClassifierVariant::Full),
                                   n_classes);
  }
  if (scheme_requested(cfg, Scheme::RawOnly)) {
    models.raw_only =
        train_classifier(ClassifierVariant::RawOnly, train_set, val_set,
                         variant_train_config(cfg, ClassifierVariant::RawOnly),
                         n_classes);
  }
  if (scheme_requested(cfg, Scheme::DiffOnly)) {
    models.diff_only =
        train_classifier(ClassifierVariant::DiffOnly, train_set, val_set,
                         variant_train_config(cfg, ClassifierVariant::DiffOnly),
                         n_classes);
  }
  if (scheme_requested(cfg, Scheme::Thresholding)) {
    models.threshold = calibrate_threshold(train_set, cfg.scenario.k_gf_max);
  }
  return models;
}

std::vector<int> predict_scheme(Scheme scheme, const SchemeModels& models,
                                const FeatureDataset& dataset,
                                std::size_t window_samples, int k_max) {
  switch (scheme) {
    case Scheme::Proposed:
      return require_model(models.full, "full").predict(dataset);
    case Scheme::RawOnly:
      return require_model(models.raw_only, "raw-stream").predict(dataset);
    case Scheme::DiffOnly:
      return require_model(models.diff_only, "difference-stream").predict(dataset);
    case Scheme::Thresholding: {
      if (!models.threshold) {
        throw std::invalid_argument("predict_scheme: threshold was not calibrated");
      }
      std::vector<int> out(dataset.size());
      for (std::size_t i = 0; i < dataset.size(); ++i) {
        out[i] = threshold_estimate(dataset.features[i].s_d, *models.threshold);
      }
      return out;
    }
    default: {  // Scheme::Mdl
      std::vector<int> out(dataset.size());
      for (std::size_t i = 0; i < dataset.size(); ++i) {
        out[i] = mdl_activity_estimate(dataset.features[i], window_samples, k_max);
      }
      return out;
    }
  }
}

ResultTable run_snr_sweep(const ExperimentConfig& cfg) { return run_sweep(cfg, true); }

ResultTable run_kt_sweep(const ExperimentConfig& cfg) { return run_sweep(cfg, false); }

std::vector<CorrPoint> run_corr_curve(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<CorrPoint> curve;
  curve.reserve(static_cast<std::size_t>(cfg.sweep.corr_max_delta_f) + 1);
  if (cfg.scenario.channel.kind == ChannelKind::FlatRayleigh) {
    // A flat draw is the same matrix on every subcarrier, so the correlation
    // is exactly 1 at every offset; no sampling needed.
    for (int delta = 0; delta <= cfg.sweep.corr_max_delta_f; ++delta) {
      curve.push_back({delta, 1.0, 1.0});
    }
    return curve;
  }
  const TapProfile profile = TapProfile::tdl_a();
  Rng rng(derive_seed(cfg.root_seed, kCorr));
  for (int delta = 0; delta <= cfg.sweep.corr_max_delta_f; ++delta) {
    const double mc = std::abs(freq_correlation(cfg.scenario.channel, profile, delta,
                                                cfg.sweep.corr_trials, rng));
    const double closed =
        std::abs(freq_correlation_closed_form(cfg.scenario.channel, profile, delta));
    curve.push_back({delta, mc, closed});
  }
  return curve;
}

DeviationReport run_deviation_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  return scaling_experiment(cfg.scenario.channel, cfg.scenario, cfg.sweep.rho_grid,
                            cfg.sweep.deviation_trials,
                            derive_seed(cfg.root_seed, kDeviation));
}

void write_result_files(const std::string& csv_path, const ResultTable& table,
                        std::uint64_t config_hash) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(table.rows.size());
  for (const ResultRow& r : table.rows) {
    rows.push_back({to_string(r.scheme), num(r.sweep_value), num(r.accuracy),
                    std::to_string(r.n_test), num(r.wilson_low), num(r.wilson_high)});
  }
  write_table_pair(csv_path, "sweep", config_hash, {},
                   "scheme," + table.sweep_name +
                       ",accuracy,n_test,wilson_low,wilson_high",
                   rows);
}

void write_corr_files(const std::string& csv_path, const std::vector<CorrPoint>& curve,
                      std::uint64_t config_hash) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(curve.size());
  for (const CorrPoint& pt : curve) {
    rows.push_back({std::to_string(pt.delta_f), num(pt.rho_mc), num(pt.rho_closed)});
  }
  write_table_pair(csv_path, "corr-curve", config_hash, {},
                   "delta_f,rho_mc,rho_closed", rows);
}

void write_deviation_files(const std::string& csv_path, const DeviationReport& report,
                           std::uint64_t config_hash) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(report.rows.size());
  for (const DeviationRow& r : report.rows) {
    rows.push_back({num(r.rho_th), std::to_string(r.span), num(r.empirical_mean),
                    num(r.empirical_stderr), num(r.bound), num(r.epsilon_h)});
  }
  std::string ensemble = "e_h_norm_sq=";
  append_num(ensemble, report.e_h_norm_sq);
  ensemble += " stderr=";
  append_num(ensemble, report.e_h_norm_sq_stderr);
  ensemble += " r_x_norm=";
  append_num(ensemble, report.r_x_norm);
  write_table_pair(csv_path, "deviation", config_hash, {ensemble},
                   "rho_th,span,empirical_mean,empirical_stderr,bound,epsilon_h", rows);
}

}  // namespace covdiff

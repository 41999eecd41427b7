#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "covdiff/classifier.hpp"
#include "covdiff/deviation.hpp"
#include "covdiff/estimators.hpp"
#include "covdiff/scenario.hpp"
#include "covdiff/sensing.hpp"

namespace covdiff {

/// Version stamped into every emitted artifact next to the config hash.
inline constexpr int kArtifactVersion = 1;

/// Deterministic sub-stream indices hung off the experiment root seed.
/// Disjoint streams keep every dataset independent of which commands run.
namespace seed_streams {
inline constexpr std::uint64_t kTrain = 101;      // training pairs
inline constexpr std::uint64_t kVal = 102;        // validation pairs
inline constexpr std::uint64_t kTrainInit = 103;  // weight init / shuffling
inline constexpr std::uint64_t kCorr = 150;       // correlation Monte Carlo
inline constexpr std::uint64_t kDeviation = 160;  // deviation Monte Carlo
inline constexpr std::uint64_t kTestBase = 200;   // + sweep point index
}  // namespace seed_streams

/// Detection schemes compared by the experiments.
enum class Scheme { Proposed, RawOnly, DiffOnly, Thresholding, Mdl };

const char* to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);

/// Sweep grids and Monte-Carlo sizes.
struct SweepConfig {
  std::vector<double> snr_grid_db = {0.0, 5.0, 10.0, 15.0, 20.0, 25.0};
  std::vector<int> kt_grid = {4, 5, 6, 7, 8};
  std::vector<double> rho_grid = {0.90, 0.93, 0.96, 0.99};
  int corr_max_delta_f = 50;
  std::size_t corr_trials = 4000;
  std::size_t deviation_trials = 300;
  // Off: one model per sweep, trained on data mixed over the sweep grid.
  // On: per-point retraining at each grid value.
  bool retrain_per_point = false;

  void validate() const;
};

/// Top-level experiment description; round-trips losslessly through JSON.
struct ExperimentConfig {
  ScenarioConfig scenario;  // includes the channel model
  TrainConfig train;
  SweepConfig sweep;
  std::size_t n_train = 50000;
  std::size_t n_val = 10000;
  std::size_t n_test = 10000;
  std::uint64_t root_seed = 1;
  std::vector<Scheme> schemes = {Scheme::Proposed, Scheme::RawOnly, Scheme::DiffOnly,
                                 Scheme::Thresholding, Scheme::Mdl};

  void validate() const;
};

/// JSON round-trip. Parsing rejects unknown keys at every level and value
/// ranges via validate(). Missing keys keep their defaults.
ExperimentConfig experiment_config_from_json(const std::string& text);
std::string experiment_config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_experiment_config(const std::string& path);

/// FNV-1a hash of the canonical JSON serialization; identifies the data-
/// generating scenario (stamped into datasets and models) or the whole
/// experiment (stamped into result files).
std::uint64_t config_hash(const ScenarioConfig& scenario);
std::uint64_t config_hash(const ExperimentConfig& cfg);
std::string hash_hex(std::uint64_t h);

/// Exact-match accuracy with a Wilson 95% score interval.
struct AccuracyResult {
  double accuracy = 0.0;
  std::size_t n = 0;
  double wilson_low = 0.0;
  double wilson_high = 0.0;
};

AccuracyResult evaluate_accuracy(const std::vector<int>& predicted,
                                 const std::vector<int>& truth);
AccuracyResult evaluate_accuracy(const std::function<int(const FeatureVector&)>& predict,
                                 const FeatureDataset& dataset);

struct ResultRow {
  Scheme scheme = Scheme::Proposed;
  double sweep_value = 0.0;
  double accuracy = 0.0;
  std::size_t n_test = 0;
  double wilson_low = 0.0;
  double wilson_high = 0.0;
};

struct ResultTable {
  std::string sweep_name;  // "snr_db" or "k_pre"
  std::vector<ResultRow> rows;
};

/// Everything trainable the schemes need; entries are only populated for the
/// schemes requested in the config.
struct SchemeModels {
  std::optional<TrainResult> full, raw_only, diff_only;
  std::optional<ThresholdModel> threshold;
};

/// Feature sets whose pairs draw the per-pair parameter from a grid,
/// round-robin by pair index (grid[i % grid.size()]); used to train one
/// model covering a whole sweep.
FeatureDataset build_mixed_snr_features(const ScenarioConfig& base,
                                        const std::vector<double>& snr_grid_db,
                                        std::size_t n_pairs, std::uint64_t root_seed,
                                        unsigned n_workers = 0);
FeatureDataset build_mixed_kt_features(const ScenarioConfig& base,
                                       const std::vector<int>& kt_grid,
                                       std::size_t n_pairs, std::uint64_t root_seed,
                                       unsigned n_workers = 0);

/// The exact TrainConfig a variant is trained under for this experiment:
/// cfg.train with the deterministic per-variant seed filled in.
TrainConfig variant_train_config(const ExperimentConfig& cfg, ClassifierVariant variant);

/// Trains the networks and calibrates the threshold needed by cfg.schemes
/// on the given feature sets.
SchemeModels train_schemes(const ExperimentConfig& cfg, const FeatureDataset& train_set,
                           const FeatureDataset& val_set);

/// Predictions of one scheme over a feature set. window_samples is the L the
/// covariance estimates were averaged over (used by the MDL baseline).
std::vector<int> predict_scheme(Scheme scheme, const SchemeModels& models,
                                const FeatureDataset& dataset,
                                std::size_t window_samples, int k_max);

/// Accuracy-versus-SNR comparison at fixed k_pre. Deterministic given
/// cfg.root_seed.
ResultTable run_snr_sweep(const ExperimentConfig& cfg);

/// Accuracy versus the number of pre-existing streams at fixed SNR.
ResultTable run_kt_sweep(const ExperimentConfig& cfg);

struct CorrPoint {
  int delta_f = 0;
  double rho_mc = 0.0;      // Monte-Carlo |rho|
  double rho_closed = 0.0;  // closed-form |rho|
};

/// Frequency-correlation magnitude over offsets 0..corr_max_delta_f,
/// Monte-Carlo next to the closed form.
std::vector<CorrPoint> run_corr_curve(const ExperimentConfig& cfg);

/// Covariance-deviation scaling study over cfg.sweep.rho_grid.
DeviationReport run_deviation_experiment(const ExperimentConfig& cfg);

/// Atomically writes a text file (write-temp-then-rename).
void write_text_atomic(const std::string& path, const std::string& content);

/// Atomic CSV emission with a "# covdiff-<kind> v<N> config=<hash>" stamp
/// and a gnuplot-ready .dat twin next to it.
void write_result_files(const std::string& csv_path, const ResultTable& table,
                        std::uint64_t config_hash);
void write_corr_files(const std::string& csv_path, const std::vector<CorrPoint>& curve,
                      std::uint64_t config_hash);
void write_deviation_files(const std::string& csv_path, const DeviationReport& report,
                           std::uint64_t config_hash);

/// Command-line front end. Returns the process exit code: 0 success,
/// 1 usage/configuration error, 2 runtime failure.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out,
                 std::ostream& err);

}  // namespace covdiff

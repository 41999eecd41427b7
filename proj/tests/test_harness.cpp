#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "covdiff/harness.hpp"
#include "covdiff/rng.hpp"
#include "support/test_util.hpp"

using namespace covdiff;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Small, fast experiment: short windows, few pairs, few epochs.
ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.scenario.n_ofdm = 20;
  cfg.scenario.n_subc = 7;
  cfg.n_train = 300;
  cfg.n_val = 100;
  cfg.n_test = 200;
  cfg.train.epochs = 2;
  cfg.sweep.snr_grid_db = {10.0, 20.0};
  cfg.sweep.kt_grid = {2, 4};
  cfg.sweep.corr_trials = 1000;
  cfg.sweep.deviation_trials = 5;
  cfg.root_seed = 5;
  return cfg;
}

int dispatch(const std::vector<std::string>& args, std::string* out_text = nullptr,
             std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int code = cli_dispatch(args, out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

}  // namespace

TEST_CASE("experiment config round-trips losslessly through json") {
  const ExperimentConfig defaults;
  const std::string first = experiment_config_to_json(defaults);
  const ExperimentConfig back = experiment_config_from_json(first);
  CHECK(experiment_config_to_json(back) == first);

  ExperimentConfig custom;
  custom.scenario.channel.kind = ChannelKind::TdlA;
  custom.scenario.snr_db = 12.5;
  custom.scenario.constellation = Constellation::Qpsk;
  custom.scenario.noise_var_delta = 0.125;
  custom.train.epochs = 17;
  custom.train.shuffle = false;
  custom.sweep.retrain_per_point = true;
  custom.sweep.snr_grid_db = {-5.0, 2.5};
  custom.schemes = {Scheme::Mdl, Scheme::Thresholding};
  custom.root_seed = 99;
  const std::string text = experiment_config_to_json(custom);
  const ExperimentConfig parsed = experiment_config_from_json(text);
  CHECK(experiment_config_to_json(parsed) == text);
  CHECK(parsed.scenario.channel.kind == ChannelKind::TdlA);
  CHECK(parsed.schemes.size() == 2);
  CHECK(parsed.sweep.retrain_per_point);

  // Missing keys keep their defaults.
  const ExperimentConfig sparse = experiment_config_from_json(
      R"({"scenario": {"snr_db": 3.0}})");
  CHECK(sparse.scenario.snr_db == 3.0);
  CHECK(sparse.scenario.n_rx == 4);
  CHECK(sparse.n_train == 50000);
}

TEST_CASE("config files load from disk") {
  const ExperimentConfig cfg = tiny_config();
  const std::string path = covdiff::testing::temp_path("config.json");
  write_text_atomic(path, experiment_config_to_json(cfg));
  const ExperimentConfig back = load_experiment_config(path);
  CHECK(experiment_config_to_json(back) == experiment_config_to_json(cfg));
  CHECK_THROWS_AS(load_experiment_config("no_such_config.json"), std::runtime_error);
}

TEST_CASE("unknown config keys are rejected by name at every level") {
  CHECK_THROWS_WITH_AS(experiment_config_from_json(R"({"bogus": 1})"),
                       doctest::Contains("bogus"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(experiment_config_from_json(R"({"scenario": {"bogus": 1}})"),
                       doctest::Contains("bogus"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      experiment_config_from_json(R"({"scenario": {"channel": {"bogus": 1}}})"),
      doctest::Contains("bogus"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(experiment_config_from_json(R"({"train": {"bogus": 1}})"),
                       doctest::Contains("bogus"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(experiment_config_from_json(R"({"sweep": {"bogus": 1}})"),
                       doctest::Contains("bogus"), std::invalid_argument);
}

TEST_CASE("config parsing enforces value ranges") {
  CHECK_THROWS_AS(experiment_config_from_json(R"({"n_train": 0})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(experiment_config_from_json(R"({"schemes": []})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(experiment_config_from_json(R"({"schemes": ["mdl", "mdl"]})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(experiment_config_from_json(R"({"schemes": ["nonsense"]})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(experiment_config_from_json(R"({"sweep": {"corr_trials": 10}})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(experiment_config_from_json(R"({"sweep": {"deviation_trials": 1}})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(experiment_config_from_json(R"({"sweep": {"rho_grid": [1.5]}})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(experiment_config_from_json(R"({"sweep": {"snr_grid_db": []}})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      experiment_config_from_json(R"({"scenario": {"constellation": "pam"}})"),
      std::invalid_argument);
  CHECK_THROWS_AS(experiment_config_from_json("{invalid"), std::invalid_argument);
}

TEST_CASE("scheme names round-trip") {
  for (Scheme s : {Scheme::Proposed, Scheme::RawOnly, Scheme::DiffOnly,
                   Scheme::Thresholding, Scheme::Mdl}) {
    CHECK(scheme_from_string(to_string(s)) == s);
  }
  CHECK_THROWS_AS(scheme_from_string("votes"), std::invalid_argument);
}

TEST_CASE("config hashing separates configurations") {
  const ExperimentConfig a = tiny_config();
  ExperimentConfig b = tiny_config();
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a.scenario) == config_hash(b.scenario));

  b.scenario.snr_db = 21.0;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(config_hash(a.scenario) != config_hash(b.scenario));

  b = tiny_config();
  b.root_seed = 6;  // experiment-level field, not part of the scenario
  CHECK(config_hash(a) != config_hash(b));
  CHECK(config_hash(a.scenario) == config_hash(b.scenario));

  CHECK(hash_hex(0) == "0000000000000000");
  CHECK(hash_hex(config_hash(a)).size() == 16);
}

TEST_CASE("accuracy evaluation: worked wilson intervals") {
  // 3 of 4 correct. Wilson 95% bounds computed separately at z = 1.96.
  const AccuracyResult r = evaluate_accuracy({1, 1, 0, 2}, {1, 0, 0, 2});
  CHECK(r.accuracy == 0.75);
  CHECK(r.n == 4);
  CHECK(r.wilson_low == doctest::Approx(0.300636052442637).epsilon(1e-12));
  CHECK(r.wilson_high == doctest::Approx(0.954413937355364).epsilon(1e-12));

  // Larger sample with a 30% hit rate: 1200 matches out of 4000.
  std::vector<int> predicted(4000, 1), truth(4000, 0);
  for (int i = 0; i < 1200; ++i) predicted[static_cast<std::size_t>(i)] = 0;
  const AccuracyResult big = evaluate_accuracy(predicted, truth);
  CHECK(big.accuracy == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(big.wilson_low == doctest::Approx(0.285995864127754).epsilon(1e-12));
  CHECK(big.wilson_high == doctest::Approx(0.314387927278979).epsilon(1e-12));
  CHECK(big.wilson_low < big.accuracy);
  CHECK(big.accuracy < big.wilson_high);
}

TEST_CASE("accuracy evaluation: edge cases and validation") {
  const AccuracyResult perfect = evaluate_accuracy({2, 1}, {2, 1});
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.wilson_high == 1.0);
  CHECK(perfect.wilson_low < 1.0);
  CHECK(perfect.wilson_low >= 0.0);

  const AccuracyResult zero = evaluate_accuracy({0, 0}, {1, 2});
  CHECK(zero.accuracy == 0.0);
  CHECK(zero.wilson_low == 0.0);
  CHECK(zero.wilson_high > 0.0);

  CHECK_THROWS_AS(evaluate_accuracy({1}, {1, 2}), std::invalid_argument);
  CHECK_THROWS_AS(evaluate_accuracy(std::vector<int>{}, std::vector<int>{}),
                  std::invalid_argument);
}

TEST_CASE("functional accuracy overload walks the dataset in order") {
  FeatureDataset ds;
  ds.n_rx = 1;
  for (int i = 0; i < 10; ++i) {
    FeatureVector f;
    f.s_t = {1.0};
    f.s_t1 = {1.0};
    f.s_d = {static_cast<double>(i % 3)};
    ds.features.push_back(f);
    ds.labels.push_back(i % 3);
  }
  const AccuracyResult echo = evaluate_accuracy(
      [](const FeatureVector& f) { return static_cast<int>(f.s_d[0]); }, ds);
  CHECK(echo.accuracy == 1.0);
  CHECK(echo.n == 10);
  CHECK_THROWS_AS(evaluate_accuracy(std::function<int(const FeatureVector&)>{}, ds),
                  std::invalid_argument);
}

TEST_CASE("mixed-grid features reproduce the per-pair protocol exactly") {
  // Pair i must come from derive_seed(root, i): the label first, then the
  // generation, under the grid value at index i mod grid size.
  ScenarioConfig base;
  base.n_ofdm = 4;
  base.n_subc = 2;
  base.k_pre = 1;

  const std::vector<double> snr_grid = {0.0, 300.0};
  const std::uint64_t root = 77;
  const FeatureDataset ds = build_mixed_snr_features(base, snr_grid, 6, root);
  REQUIRE(ds.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    ScenarioConfig cfg = base;
    cfg.snr_db = snr_grid[i % snr_grid.size()];
    Rng rng(derive_seed(root, i));
    const int d = static_cast<int>(
        rng.uniform_int(static_cast<std::uint64_t>(cfg.k_gf_max) + 1));
    const FeatureVector expected = sense_features(generate_pair(cfg, d, rng));
    CHECK(ds.labels[i] == d);
    CHECK(ds.features[i].s_t == expected.s_t);
    CHECK(ds.features[i].s_t1 == expected.s_t1);
    CHECK(ds.features[i].s_d == expected.s_d);
  }

  const std::vector<int> kt_grid = {1, 2};
  const FeatureDataset kt_ds = build_mixed_kt_features(base, kt_grid, 4, root);
  for (std::size_t i = 0; i < 4; ++i) {
    ScenarioConfig cfg = base;
    cfg.k_pre = kt_grid[i % kt_grid.size()];
    Rng rng(derive_seed(root, i));
    const int d = static_cast<int>(
        rng.uniform_int(static_cast<std::uint64_t>(cfg.k_gf_max) + 1));
    const FeatureVector expected = sense_features(generate_pair(cfg, d, rng));
    CHECK(kt_ds.labels[i] == d);
    CHECK(kt_ds.features[i].s_d == expected.s_d);
  }

  CHECK_THROWS_AS(build_mixed_snr_features(base, {}, 4, root), std::invalid_argument);
}

TEST_CASE("per-variant training configs differ only in their seeds") {
  const ExperimentConfig cfg = tiny_config();
  const TrainConfig full = variant_train_config(cfg, ClassifierVariant::Full);
  const TrainConfig raw = variant_train_config(cfg, ClassifierVariant::RawOnly);
  const TrainConfig diff = variant_train_config(cfg, ClassifierVariant::DiffOnly);
  CHECK(full.epochs == cfg.train.epochs);
  CHECK(raw.batch_size == cfg.train.batch_size);
  CHECK(full.seed != raw.seed);
  CHECK(raw.seed != diff.seed);
  CHECK(full.seed != diff.seed);
  // Deterministic in the root seed.
  CHECK(full.seed == variant_train_config(cfg, ClassifierVariant::Full).seed);
  ExperimentConfig other = cfg;
  other.root_seed = 123;
  CHECK(full.seed != variant_train_config(other, ClassifierVariant::Full).seed);
}

TEST_CASE("flat-fading correlation curve is identically one") {
  ExperimentConfig cfg = tiny_config();
  cfg.sweep.corr_max_delta_f = 10;
  const std::vector<CorrPoint> curve = run_corr_curve(cfg);
  REQUIRE(curve.size() == 11);
  for (std::size_t i = 0; i < curve.size(); ++i) {
    CHECK(curve[i].delta_f == static_cast<int>(i));
    CHECK(curve[i].rho_mc == 1.0);
    CHECK(curve[i].rho_closed == 1.0);
  }
}

TEST_CASE("dispersive correlation curve: monte carlo tracks the closed form") {
  ExperimentConfig cfg = tiny_config();
  cfg.scenario.channel.kind = ChannelKind::TdlA;
  cfg.sweep.corr_max_delta_f = 8;
  cfg.sweep.corr_trials = 1000;
  const std::vector<CorrPoint> curve = run_corr_curve(cfg);
  REQUIRE(curve.size() == 9);
  CHECK(curve[0].rho_closed == doctest::Approx(1.0).epsilon(1e-12));
  const double tol = 3.0 / std::sqrt(1000.0);
  for (const CorrPoint& pt : curve) {
    if (pt.delta_f <= 6) CHECK(pt.rho_closed >= 0.99);
    CHECK(std::abs(pt.rho_mc - pt.rho_closed) <= tol);
  }
}

TEST_CASE("deviation experiment wiring honours the sweep grid") {
  ExperimentConfig cfg = tiny_config();
  cfg.sweep.rho_grid = {0.9};
  const DeviationReport report = run_deviation_experiment(cfg);
  REQUIRE(report.rows.size() == 1);
  CHECK(report.rows[0].rho_th == 0.9);
  CHECK(report.rows[0].span == cfg.scenario.channel.fft_size - 1);  // flat
  CHECK(report.rows[0].empirical_mean < 1e-10);
}

TEST_CASE("buried in noise, every scheme falls to chance level") {
  // At -300 dB SNR the observations are pure noise, so the label is
  // unrecoverable and every scheme should sit near 1/4 for four classes.
  ExperimentConfig cfg = tiny_config();
  cfg.scenario.snr_db = -300.0;
  cfg.scenario.k_pre = 2;
  cfg.sweep.snr_grid_db = {-300.0};
  cfg.n_train = 1200;
  cfg.n_val = 400;
  cfg.n_test = 2000;
  cfg.train.epochs = 5;
  cfg.root_seed = 31;
  const ResultTable table = run_snr_sweep(cfg);
  REQUIRE(table.rows.size() == 5);  // all schemes, one grid point
  for (const ResultRow& row : table.rows) {
    INFO(std::string(to_string(row.scheme)));
    CHECK(row.accuracy > 0.20);
    CHECK(row.accuracy < 0.30);
  }
}

TEST_CASE("with no interference and no noise every scheme is near perfect") {
  // k_pre = 0 and 300 dB SNR: the difference spectrum has exactly d strong
  // values against a ~1e-30 floor. The analytic baselines must be exact;
  // the trained networks are allowed two misses in a thousand.
  ExperimentConfig cfg = tiny_config();
  cfg.scenario.snr_db = 300.0;
  cfg.scenario.k_pre = 0;
  cfg.sweep.snr_grid_db = {300.0};
  cfg.n_train = 2400;
  cfg.n_val = 400;
  cfg.n_test = 1000;
  cfg.train.epochs = 60;
  cfg.root_seed = 32;
  const ResultTable table = run_snr_sweep(cfg);
  REQUIRE(table.rows.size() == 5);
  for (const ResultRow& row : table.rows) {
    INFO(std::string(to_string(row.scheme)));
    if (row.scheme == Scheme::Thresholding || row.scheme == Scheme::Mdl) {
      CHECK(row.accuracy == 1.0);
    } else {
      CHECK(row.accuracy >= 0.99);
    }
  }
}

TEST_CASE("sweeps are deterministic and ordered point-major") {
  ExperimentConfig cfg = tiny_config();
  cfg.schemes = {Scheme::Proposed, Scheme::Mdl};
  const ResultTable a = run_snr_sweep(cfg);
  const ResultTable b = run_snr_sweep(cfg);
  CHECK(a.sweep_name == "snr_db");
  REQUIRE(a.rows.size() == 4);  // 2 grid points x 2 schemes
  CHECK(a.rows[0].scheme == Scheme::Proposed);
  CHECK(a.rows[0].sweep_value == 10.0);
  CHECK(a.rows[1].scheme == Scheme::Mdl);
  CHECK(a.rows[1].sweep_value == 10.0);
  CHECK(a.rows[2].sweep_value == 20.0);
  CHECK(a.rows[3].sweep_value == 20.0);
  REQUIRE(b.rows.size() == a.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].scheme == b.rows[i].scheme);
    CHECK(a.rows[i].sweep_value == b.rows[i].sweep_value);
    CHECK(a.rows[i].accuracy == b.rows[i].accuracy);
    CHECK(a.rows[i].wilson_low == b.rows[i].wilson_low);
    CHECK(a.rows[i].wilson_high == b.rows[i].wilson_high);
  }
}

TEST_CASE("stream-count sweep reports the grid under the k_pre name") {
  ExperimentConfig cfg = tiny_config();
  cfg.schemes = {Scheme::Thresholding, Scheme::Mdl};
  cfg.n_train = 400;
  cfg.n_val = 100;
  cfg.n_test = 300;
  const ResultTable table = run_kt_sweep(cfg);
  CHECK(table.sweep_name == "k_pre");
  REQUIRE(table.rows.size() == 4);
  CHECK(table.rows[0].sweep_value == 2.0);
  CHECK(table.rows[2].sweep_value == 4.0);
  for (const ResultRow& row : table.rows) {
    CHECK(row.n_test == 300);
    CHECK(row.wilson_low <= row.accuracy);
    CHECK(row.accuracy <= row.wilson_high);
  }
}

TEST_CASE("result files carry a stamp, full precision, and a plot twin") {
  ResultTable table;
  table.sweep_name = "snr_db";
  table.rows.push_back(
      {Scheme::Proposed, 10.0, 1.0 / 3.0, 300, 0.28124999999999989, 0.39});
  const std::string csv = covdiff::testing::temp_path("results.csv");
  write_result_files(csv, table, 0xdeadbeefull);
  const std::string text = slurp(csv);
  CHECK(text.rfind("# covdiff-sweep v1 config=00000000deadbeef\n", 0) == 0);
  CHECK(text.find("scheme,snr_db,accuracy,n_test,wilson_low,wilson_high") !=
        std::string::npos);
  CHECK(text.find("proposed,10,0.33333333333333331,300,") != std::string::npos);

  const std::string dat = csv.substr(0, csv.size() - 4) + ".dat";
  const std::string twin = slurp(dat);
  CHECK(twin.rfind("# covdiff-sweep", 0) == 0);
  for (const char c : std::string("\n") + twin) (void)c;
  // Every line of the twin is either a comment or whitespace-separated data.
  std::istringstream lines(twin);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    CHECK((line[0] == '#' || line.find(',') == std::string::npos));
  }

  // Writing the same table again produces identical bytes.
  const std::string csv2 = covdiff::testing::temp_path("results_again.csv");
  write_result_files(csv2, table, 0xdeadbeefull);
  CHECK(slurp(csv2) == text);
}

TEST_CASE("atomic text writes replace existing files whole") {
  const std::string path = covdiff::testing::temp_path("atomic.txt");
  write_text_atomic(path, "first\n");
  CHECK(slurp(path) == "first\n");
  write_text_atomic(path, "second\n");
  CHECK(slurp(path) == "second\n");
  CHECK(!fs::exists(path + ".tmp"));
}

TEST_CASE("cli: version, help, and usage errors") {
  std::string out, err;
  CHECK(dispatch({"--version"}, &out, &err) == 0);
  CHECK(out.find("0.1.0") != std::string::npos);

  CHECK(dispatch({"--help"}, &out, &err) == 0);
  CHECK(out.find("sweep-snr") != std::string::npos);
  CHECK(out.find("corr-curve") != std::string::npos);

  CHECK(dispatch({}, &out, &err) == 1);
  CHECK(dispatch({"frobnicate"}, &out, &err) == 1);
  CHECK(dispatch({"corr-curve", "--frobnicate"}, &out, &err) == 1);
  CHECK(dispatch({"corr-curve", "--config", "no_such_config.json"}, &out, &err) == 2);
  CHECK(err.find("cannot open") != std::string::npos);
}

TEST_CASE("cli: gen-data writes loadable feature files and a summary") {
  ExperimentConfig cfg = tiny_config();
  cfg.scenario.n_ofdm = 4;
  cfg.scenario.n_subc = 2;
  cfg.n_train = 20;
  cfg.n_val = 10;
  cfg.n_test = 10;
  const std::string config_path = covdiff::testing::temp_path("gen_config.json");
  write_text_atomic(config_path, experiment_config_to_json(cfg));
  const std::string dir = covdiff::testing::temp_path("gen_run");

  std::string out, err;
  const int code =
      dispatch({"gen-data", "--config", config_path, "--out-dir", dir}, &out, &err);
  INFO(err);
  CHECK(code == 0);
  CHECK(out.find("gen-data run gen-data-") != std::string::npos);

  const FeatureDataset train_set = read_features_csv(dir + "/features_train.csv",
                                                     config_hash(cfg.scenario));
  CHECK(train_set.size() == 20);
  const FeatureDataset val_set =
      read_features_csv(dir + "/features_val.csv", config_hash(cfg.scenario));
  CHECK(val_set.size() == 10);
  CHECK(fs::exists(dir + "/features_test.csv"));
  CHECK(fs::exists(dir + "/summary.json"));

  // The emitted config reproduces the run's configuration byte for byte.
  CHECK(slurp(dir + "/config.json") == experiment_config_to_json(cfg));

  const nlohmann::json summary = nlohmann::json::parse(slurp(dir + "/summary.json"));
  CHECK(summary.at("command") == "gen-data");
  CHECK(summary.at("config_hash") == hash_hex(config_hash(cfg)));
  CHECK(summary.at("root_seed").get<std::uint64_t>() == cfg.root_seed);
}

TEST_CASE("cli: train then eval round-trips models through disk") {
  ExperimentConfig cfg = tiny_config();
  cfg.scenario.n_ofdm = 4;
  cfg.scenario.n_subc = 2;
  cfg.scenario.snr_db = 300.0;
  cfg.scenario.k_pre = 0;
  cfg.n_train = 60;
  cfg.n_val = 20;
  cfg.n_test = 30;
  cfg.train.epochs = 3;
  const std::string config_path = covdiff::testing::temp_path("train_config.json");
  write_text_atomic(config_path, experiment_config_to_json(cfg));
  const std::string train_dir = covdiff::testing::temp_path("train_run");

  std::string out, err;
  int code =
      dispatch({"train", "--config", config_path, "--out-dir", train_dir}, &out, &err);
  INFO(err);
  CHECK(code == 0);
  CHECK(out.find("best validation accuracy") != std::string::npos);
  for (const char* f : {"model_full.json", "model_raw_only.json",
                        "model_diff_only.json", "threshold.json"}) {
    CHECK(fs::exists(train_dir + "/" + f));
  }

  const std::string eval_dir = covdiff::testing::temp_path("eval_run");
  code = dispatch({"eval", "--config", config_path, "--out-dir", eval_dir,
                   "--models-dir", train_dir},
                  &out, &err);
  INFO(err);
  CHECK(code == 0);
  CHECK(fs::exists(eval_dir + "/eval.csv"));
  const std::string eval_csv = slurp(eval_dir + "/eval.csv");
  CHECK(eval_csv.find("proposed") != std::string::npos);
  CHECK(eval_csv.find("mdl") != std::string::npos);

  // Evaluating under a different scenario must fail with both hashes named.
  ExperimentConfig other = cfg;
  other.scenario.snr_db = 0.0;
  const std::string other_path = covdiff::testing::temp_path("other_config.json");
  write_text_atomic(other_path, experiment_config_to_json(other));
  code = dispatch({"eval", "--config", other_path, "--out-dir", eval_dir,
                   "--models-dir", train_dir},
                  &out, &err);
  CHECK(code == 2);
  CHECK(err.find(hash_hex(config_hash(cfg.scenario))) != std::string::npos);
  CHECK(err.find(hash_hex(config_hash(other.scenario))) != std::string::npos);

  // Missing models directory: runtime failure, not a usage error.
  code = dispatch({"eval", "--config", config_path, "--out-dir", eval_dir,
                   "--models-dir", covdiff::testing::temp_path("absent_models")},
                  &out, &err);
  CHECK(code == 2);
  CHECK(err.find("cannot open") != std::string::npos);
}

TEST_CASE("cli: scheme restriction lets the analytic scheme run without models") {
  ExperimentConfig cfg = tiny_config();
  cfg.scenario.n_ofdm = 4;
  cfg.scenario.n_subc = 2;
  cfg.n_test = 40;
  const std::string config_path = covdiff::testing::temp_path("scheme_config.json");
  write_text_atomic(config_path, experiment_config_to_json(cfg));
  const std::string dir = covdiff::testing::temp_path("scheme_run");

  std::string out, err;
  const int code = dispatch({"eval", "--config", config_path, "--out-dir", dir,
                             "--scheme", "mdl"},
                            &out, &err);
  INFO(err);
  CHECK(code == 0);
  const std::string csv = slurp(dir + "/eval.csv");
  CHECK(csv.find("mdl") != std::string::npos);
  CHECK(csv.find("proposed") == std::string::npos);

  // An unknown scheme name is a usage error.
  CHECK(dispatch({"eval", "--config", config_path, "--out-dir", dir, "--scheme",
                  "votes"},
                 &out, &err) == 1);
}

TEST_CASE("cli: seed precedence is flag over environment over config") {
  ExperimentConfig cfg = tiny_config();
  cfg.sweep.corr_max_delta_f = 3;
  cfg.root_seed = 5;
  const std::string config_path = covdiff::testing::temp_path("seed_config.json");
  write_text_atomic(config_path, experiment_config_to_json(cfg));
  const std::string dir = covdiff::testing::temp_path("seed_run");

  std::string out, err;
  CHECK(dispatch({"corr-curve", "--config", config_path, "--out-dir", dir}, &out,
                 &err) == 0);
  CHECK(out.find("-s5") != std::string::npos);

  ::setenv("COVDIFF_SEED", "99", 1);
  CHECK(dispatch({"corr-curve", "--config", config_path, "--out-dir", dir}, &out,
                 &err) == 0);
  CHECK(out.find("-s99") != std::string::npos);

  CHECK(dispatch({"corr-curve", "--config", config_path, "--out-dir", dir, "--seed",
                  "7"},
                 &out, &err) == 0);
  CHECK(out.find("-s7") != std::string::npos);

  ::setenv("COVDIFF_SEED", "notanumber", 1);
  CHECK(dispatch({"corr-curve", "--config", config_path, "--out-dir", dir}, &out,
                 &err) == 1);
  CHECK(err.find("COVDIFF_SEED") != std::string::npos);
  ::unsetenv("COVDIFF_SEED");
}

TEST_CASE("cli: json output carries the machine-readable summary") {
  ExperimentConfig cfg = tiny_config();
  cfg.sweep.corr_max_delta_f = 2;
  const std::string config_path = covdiff::testing::temp_path("json_config.json");
  write_text_atomic(config_path, experiment_config_to_json(cfg));
  const std::string dir = covdiff::testing::temp_path("json_run");

  std::string out, err;
  CHECK(dispatch({"corr-curve", "--config", config_path, "--out-dir", dir, "--json"},
                 &out, &err) == 0);
  const nlohmann::json summary = nlohmann::json::parse(out);
  CHECK(summary.at("command") == "corr-curve");
  CHECK(summary.at("config_hash") == hash_hex(config_hash(cfg)));
  CHECK(summary.at("outputs").is_array());
  bool has_csv = false;
  for (const auto& f : summary.at("outputs"))
    if (f.get<std::string>() == "corr_curve.csv") has_csv = true;
  CHECK(has_csv);
}

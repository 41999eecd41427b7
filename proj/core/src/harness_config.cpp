#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "covdiff/harness.hpp"

namespace covdiff {

using nlohmann::json;

namespace {

// Fails loudly on typos instead of silently ignoring a misspelled option.
void reject_unknown_keys(const json& j, const char* object_name,
                         std::initializer_list<const char*> allowed) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw std::invalid_argument(std::string("config: unknown key \"") + item.key() +
                                  "\" in " + object_name);
    }
  }
}

void expect_object(const json& j, const char* object_name) {
  if (!j.is_object()) {
    throw std::invalid_argument(std::string("config: ") + object_name +
                                " must be a JSON object");
  }
}

json channel_to_json(const ChannelModelSpec& ch) {
  return json{{"kind", to_string(ch.kind)},
              {"carrier_frequency_hz", ch.carrier_frequency_hz},
              {"subcarrier_spacing_hz", ch.subcarrier_spacing_hz},
              {"fft_size", ch.fft_size},
              {"delay_spread_s", ch.delay_spread_s}};
}

ChannelModelSpec channel_from_json(const json& j) {
  expect_object(j, "channel");
  reject_unknown_keys(j, "channel",
                      {"kind", "carrier_frequency_hz", "subcarrier_spacing_hz",
                       "fft_size", "delay_spread_s"});
  ChannelModelSpec ch;
  if (j.contains("kind")) ch.kind = channel_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("carrier_frequency_hz")) ch.carrier_frequency_hz = j.at("carrier_frequency_hz").get<double>();
  if (j.contains("subcarrier_spacing_hz")) ch.subcarrier_spacing_hz = j.at("subcarrier_spacing_hz").get<double>();
  if (j.contains("fft_size")) ch.fft_size = j.at("fft_size").get<int>();
  if (j.contains("delay_spread_s")) ch.delay_spread_s = j.at("delay_spread_s").get<double>();
  return ch;
}

json scenario_to_json(const ScenarioConfig& sc) {
  return json{{"n_rx", sc.n_rx},
              {"k_pre", sc.k_pre},
              {"k_gf_max", sc.k_gf_max},
              {"snr_db", sc.snr_db},
              {"n_ofdm", sc.n_ofdm},
              {"n_subc", sc.n_subc},
              {"constellation", to_string(sc.constellation)},
              {"noise_var_delta", sc.noise_var_delta},
              {"channel", channel_to_json(sc.channel)}};
}

ScenarioConfig scenario_from_json(const json& j) {
  expect_object(j, "scenario");
  reject_unknown_keys(j, "scenario",
                      {"n_rx", "k_pre", "k_gf_max", "snr_db", "n_ofdm", "n_subc",
                       "constellation", "noise_var_delta", "channel"});
  ScenarioConfig sc;
  if (j.contains("n_rx")) sc.n_rx = j.at("n_rx").get<int>();
  if (j.contains("k_pre")) sc.k_pre = j.at("k_pre").get<int>();
  if (j.contains("k_gf_max")) sc.k_gf_max = j.at("k_gf_max").get<int>();
  if (j.contains("snr_db")) sc.snr_db = j.at("snr_db").get<double>();
  if (j.contains("n_ofdm")) sc.n_ofdm = j.at("n_ofdm").get<int>();
  if (j.contains("n_subc")) sc.n_subc = j.at("n_subc").get<int>();
  if (j.contains("constellation")) {
    sc.constellation = constellation_from_string(j.at("constellation").get<std::string>());
  }
  if (j.contains("noise_var_delta")) sc.noise_var_delta = j.at("noise_var_delta").get<double>();
  if (j.contains("channel")) sc.channel = channel_from_json(j.at("channel"));
  return sc;
}

json train_to_json(const TrainConfig& tr) {
  return json{{"epochs", tr.epochs},
              {"batch_size", tr.batch_size},
              {"learning_rate", tr.learning_rate},
              {"beta1", tr.beta1},
              {"beta2", tr.beta2},
              {"adam_epsilon", tr.adam_epsilon},
              {"bn_momentum", tr.bn_momentum},
              {"shuffle", tr.shuffle},
              {"standardize", tr.standardize}};
}

TrainConfig train_from_json(const json& j) {
  expect_object(j, "train");
  // The training seed is derived from root_seed, so it is not configurable
  // here; everything else mirrors TrainConfig.
  reject_unknown_keys(j, "train",
                      {"epochs", "batch_size", "learning_rate", "beta1", "beta2",
                       "adam_epsilon", "bn_momentum", "shuffle", "standardize"});
  TrainConfig tr;
  if (j.contains("epochs")) tr.epochs = j.at("epochs").get<int>();
  if (j.contains("batch_size")) tr.batch_size = j.at("batch_size").get<int>();
  if (j.contains("learning_rate")) tr.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("beta1")) tr.beta1 = j.at("beta1").get<double>();
  if (j.contains("beta2")) tr.beta2 = j.at("beta2").get<double>();
  if (j.contains("adam_epsilon")) tr.adam_epsilon = j.at("adam_epsilon").get<double>();
  if (j.contains("bn_momentum")) tr.bn_momentum = j.at("bn_momentum").get<double>();
  if (j.contains("shuffle")) tr.shuffle = j.at("shuffle").get<bool>();
  if (j.contains("standardize")) tr.standardize = j.at("standardize").get<bool>();
  return tr;
}

json sweep_to_json(const SweepConfig& sw) {
  return json{{"snr_grid_db", sw.snr_grid_db},
              {"kt_grid", sw.kt_grid},
              {"rho_grid", sw.rho_grid},
              {"corr_max_delta_f", sw.corr_max_delta_f},
              {"corr_trials", sw.corr_trials},
              {"deviation_trials", sw.deviation_trials},
              {"retrain_per_point", sw.retrain_per_point}};
}

SweepConfig sweep_from_json(const json& j) {
  expect_object(j, "sweep");
  reject_unknown_keys(j, "sweep",
                      {"snr_grid_db", "kt_grid", "rho_grid", "corr_max_delta_f",
                       "corr_trials", "deviation_trials", "retrain_per_point"});
  SweepConfig sw;
  if (j.contains("snr_grid_db")) sw.snr_grid_db = j.at("snr_grid_db").get<std::vector<double>>();
  if (j.contains("kt_grid")) sw.kt_grid = j.at("kt_grid").get<std::vector<int>>();
  if (j.contains("rho_grid")) sw.rho_grid = j.at("rho_grid").get<std::vector<double>>();
  if (j.contains("corr_max_delta_f")) sw.corr_max_delta_f = j.at("corr_max_delta_f").get<int>();
  if (j.contains("corr_trials")) sw.corr_trials = j.at("corr_trials").get<std::size_t>();
  if (j.contains("deviation_trials")) sw.deviation_trials = j.at("deviation_trials").get<std::size_t>();
  if (j.contains("retrain_per_point")) sw.retrain_per_point = j.at("retrain_per_point").get<bool>();
  return sw;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= static_cast<std::uint64_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::Proposed: return "proposed";
    case Scheme::RawOnly: return "raw_only";
    case Scheme::DiffOnly: return "diff_only";
    case Scheme::Thresholding: return "thresholding";
    default: return "mdl";
  }
}

Scheme scheme_from_string(const std::string& s) {
  if (s == "proposed") return Scheme::Proposed;
  if (s == "raw_only") return Scheme::RawOnly;
  if (s == "diff_only") return Scheme::DiffOnly;
  if (s == "thresholding") return Scheme::Thresholding;
  if (s == "mdl") return Scheme::Mdl;
  throw std::invalid_argument("unknown scheme \"" + s +
                              "\" (expected proposed, raw_only, diff_only, "
                              "thresholding, or mdl)");
}

void SweepConfig::validate() const {
  if (snr_grid_db.empty()) throw std::invalid_argument("sweep: snr_grid_db must be nonempty");
  if (kt_grid.empty()) throw std::invalid_argument("sweep: kt_grid must be nonempty");
  for (int kt : kt_grid) {
    if (kt < 0) throw std::invalid_argument("sweep: kt_grid entries must be >= 0");
  }
  if (rho_grid.empty()) throw std::invalid_argument("sweep: rho_grid must be nonempty");
  for (double rho : rho_grid) {
    if (!(rho > 0.0 && rho < 1.0)) {
      throw std::invalid_argument("sweep: rho_grid entries must lie in (0, 1)");
    }
  }
  if (corr_max_delta_f < 1) throw std::invalid_argument("sweep: corr_max_delta_f must be >= 1");
  if (corr_trials < 1000) throw std::invalid_argument("sweep: corr_trials must be >= 1000");
  if (deviation_trials < 2) throw std::invalid_argument("sweep: deviation_trials must be >= 2");
}

void ExperimentConfig::validate() const {
  scenario.validate();
  train.validate();
  sweep.validate();
  if (n_train < 1) throw std::invalid_argument("config: n_train must be >= 1");
  if (n_val < 1) throw std::invalid_argument("config: n_val must be >= 1");
  if (n_test < 1) throw std::invalid_argument("config: n_test must be >= 1");
  if (schemes.empty()) throw std::invalid_argument("config: schemes must be nonempty");
  for (std::size_t i = 0; i < schemes.size(); ++i) {
    for (std::size_t j = i + 1; j < schemes.size(); ++j) {
      if (schemes[i] == schemes[j]) {
        throw std::invalid_argument(std::string("config: duplicate scheme \"") +
                                    to_string(schemes[i]) + "\"");
      }
    }
  }
}

ExperimentConfig experiment_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  expect_object(j, "config");
  reject_unknown_keys(j, "config",
                      {"scenario", "train", "sweep", "n_train", "n_val", "n_test",
                       "root_seed", "schemes"});
  ExperimentConfig cfg;
  try {
    if (j.contains("scenario")) cfg.scenario = scenario_from_json(j.at("scenario"));
    if (j.contains("train")) cfg.train = train_from_json(j.at("train"));
    if (j.contains("sweep")) cfg.sweep = sweep_from_json(j.at("sweep"));
    if (j.contains("n_train")) cfg.n_train = j.at("n_train").get<std::size_t>();
    if (j.contains("n_val")) cfg.n_val = j.at("n_val").get<std::size_t>();
    if (j.contains("n_test")) cfg.n_test = j.at("n_test").get<std::size_t>();
    if (j.contains("root_seed")) cfg.root_seed = j.at("root_seed").get<std::uint64_t>();
    if (j.contains("schemes")) {
      cfg.schemes.clear();
      for (const auto& s : j.at("schemes")) {
        cfg.schemes.push_back(scheme_from_string(s.get<std::string>()));
      }
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string experiment_config_to_json(const ExperimentConfig& cfg) {
  json schemes = json::array();
  for (Scheme s : cfg.schemes) schemes.push_back(to_string(s));
  json j{{"scenario", scenario_to_json(cfg.scenario)},
         {"train", train_to_json(cfg.train)},
         {"sweep", sweep_to_json(cfg.sweep)},
         {"n_train", cfg.n_train},
         {"n_val", cfg.n_val},
         {"n_test", cfg.n_test},
         {"root_seed", cfg.root_seed},
         {"schemes", schemes}};
  return j.dump(2) + "\n";
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return experiment_config_from_json(buf.str());
}

std::uint64_t config_hash(const ScenarioConfig& scenario) {
  // nlohmann objects serialize with sorted keys, so dump() is canonical.
  return fnv1a(scenario_to_json(scenario).dump());
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  return fnv1a(experiment_config_to_json(cfg));
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

}  // namespace covdiff

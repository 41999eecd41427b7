#include "covdiff/estimators.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace covdiff {

namespace {
constexpr double kSpectrumFloor = 1e-12;
}

int mdl_estimate(const std::vector<double>& spectrum, std::size_t n_samples) {
  const std::size_t n = spectrum.size();
  if (n == 0) throw std::invalid_argument("mdl_estimate: empty spectrum");
  if (n_samples < n)
    throw std::invalid_argument("mdl_estimate: need at least as many samples as "
                                "spectrum entries");
  for (std::size_t i = 0; i < n; ++i) {
    if (spectrum[i] < 0.0)
      throw std::invalid_argument("mdl_estimate: spectrum entries must be >= 0");
    if (i > 0 && spectrum[i] > spectrum[i - 1] + 1e-12)
      throw std::invalid_argument("mdl_estimate: spectrum must be descending");
  }

  const double l = static_cast<double>(n_samples);
  int best_k = 0;
  double best_score = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t tail = n - k;
    double log_geo = 0.0, arith = 0.0;
    for (std::size_t i = k; i < n; ++i) {
      const double v = std::max(spectrum[i], kSpectrumFloor);
      log_geo += std::log(v);
      arith += v;
    }
    log_geo /= static_cast<double>(tail);
    arith /= static_cast<double>(tail);
    const double ratio = log_geo - std::log(std::max(arith, kSpectrumFloor));
    const double score = -l * static_cast<double>(tail) * ratio +
                         0.5 * static_cast<double>(k) *
                             static_cast<double>(2 * n - k) * std::log(l);
    if (k == 0 || score < best_score) {
      best_score = score;
      best_k = static_cast<int>(k);
    }
  }
  return best_k;
}

int mdl_activity_estimate(const FeatureVector& f, std::size_t n_samples, int k_max) {
  if (k_max < 0) throw std::invalid_argument("mdl_activity_estimate: k_max must be >= 0");
  const int k = mdl_estimate(f.s_d, n_samples);
  return std::clamp(k, 0, k_max);
}

int threshold_estimate(const std::vector<double>& s_d, const ThresholdModel& model) {
  int count = 0;
  for (double v : s_d)
    if (v > model.tau) ++count;
  return std::min(count, model.k_max);
}

ThresholdModel calibrate_threshold(const FeatureDataset& calibration, int k_max) {
  if (calibration.size() == 0)
    throw std::invalid_argument("calibrate_threshold: empty calibration set");
  if (k_max < 1) throw std::invalid_argument("calibrate_threshold: k_max must be >= 1");

  double s_max = 0.0;
  for (const FeatureVector& f : calibration.features)
    for (double v : f.s_d) s_max = std::max(s_max, v);
  if (!(s_max > 0.0))
    throw std::invalid_argument(
        "calibrate_threshold: no positive difference singular values");

  constexpr int kGridPoints = 200;
  ThresholdModel best;
  best.k_max = k_max;
  best.grid_points = kGridPoints;
  std::size_t best_hits = 0;
  bool first = true;
  for (int i = 0; i < kGridPoints; ++i) {
    // Log-spaced from 1e-3 * s_max up to s_max inclusive.
    const double exponent =
        -3.0 * (1.0 - static_cast<double>(i) / static_cast<double>(kGridPoints - 1));
    ThresholdModel candidate;
    candidate.tau = s_max * std::pow(10.0, exponent);
    candidate.k_max = k_max;
    candidate.grid_points = kGridPoints;
    std::size_t hits = 0;
    for (std::size_t r = 0; r < calibration.size(); ++r)
      if (threshold_estimate(calibration.features[r].s_d, candidate) ==
          calibration.labels[r])
        ++hits;
    if (first || hits > best_hits) {  // strict: ties keep the smaller threshold
      best = candidate;
      best_hits = hits;
      first = false;
    }
  }
  best.calibration_accuracy =
      static_cast<double>(best_hits) / static_cast<double>(calibration.size());
  return best;
}

std::vector<double> slice_features(const FeatureVector& v, ClassifierVariant variant) {
  switch (variant) {
    case ClassifierVariant::Full:
      return v.concatenated();
    case ClassifierVariant::RawOnly: {
      std::vector<double> out;
      out.reserve(v.s_t.size() + v.s_t1.size());
      out.insert(out.end(), v.s_t.begin(), v.s_t.end());
      out.insert(out.end(), v.s_t1.begin(), v.s_t1.end());
      return out;
    }
    default:
      return v.s_d;
  }
}

namespace {

using nlohmann::json;

constexpr int kThresholdSchemaVersion = 1;

std::string hash_to_hex(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

}  // namespace

void save_threshold(const std::string& path, const ThresholdModel& model,
                    std::uint64_t config_hash) {
  const json doc{{"schema_version", kThresholdSchemaVersion},
                 {"dataset_config_hash", hash_to_hex(config_hash)},
                 {"tau", model.tau},
                 {"k_max", model.k_max},
                 {"calibration_accuracy", model.calibration_accuracy},
                 {"grid_points", model.grid_points}};
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("save_threshold: cannot open " + tmp);
    out << doc.dump(2) << "\n";
    if (!out.good()) throw std::runtime_error("save_threshold: write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("save_threshold: cannot move " + tmp + " to " + path);
}

ThresholdModel load_threshold(const std::string& path,
                              std::uint64_t expected_config_hash) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_threshold: cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw std::runtime_error("load_threshold: bad JSON in " + path + ": " + e.what());
  }
  try {
    const int version = doc.at("schema_version").get<int>();
    if (version != kThresholdSchemaVersion)
      throw std::runtime_error("load_threshold: " + path + " has schema version " +
                               std::to_string(version) + ", expected " +
                               std::to_string(kThresholdSchemaVersion));
    const std::string hex = doc.at("dataset_config_hash").get<std::string>();
    char* end = nullptr;
    const std::uint64_t hash = std::strtoull(hex.c_str(), &end, 16);
    if (end == hex.c_str() || *end != '\0')
      throw std::runtime_error("load_threshold: malformed hash in " + path);
    if (hash != expected_config_hash) {
      char msg[160];
      std::snprintf(msg, sizeof(msg),
                    "load_threshold: %s was calibrated under config %016" PRIx64
                    ", expected %016" PRIx64,
                    path.c_str(), hash, expected_config_hash);
      throw std::runtime_error(msg);
    }
    ThresholdModel model;
    model.tau = doc.at("tau").get<double>();
    model.k_max = doc.at("k_max").get<int>();
    model.calibration_accuracy = doc.at("calibration_accuracy").get<double>();
    model.grid_points = doc.at("grid_points").get<int>();
    return model;
  } catch (const json::exception& e) {
    throw std::runtime_error("load_threshold: malformed file " + path + ": " +
                             e.what());
  }
}

}  // namespace covdiff

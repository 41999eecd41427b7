#include "covdiff/sensing.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace covdiff {

std::vector<double> FeatureVector::concatenated() const {
  std::vector<double> v;
  v.reserve(s_t.size() + s_t1.size() + s_d.size());
  v.insert(v.end(), s_t.begin(), s_t.end());
  v.insert(v.end(), s_t1.begin(), s_t1.end());
  v.insert(v.end(), s_d.begin(), s_d.end());
  return v;
}

FeatureVector sense_features(const ComplexMatrix& y_t, const ComplexMatrix& y_t1,
                             std::size_t n_samples) {
  if (y_t.rows() != y_t1.rows() || y_t.cols() != y_t1.cols())
    throw std::invalid_argument("sense_features: window shape mismatch");
  const ComplexMatrix r_t = scm(y_t, n_samples);
  const ComplexMatrix r_t1 = scm(y_t1, n_samples);
  FeatureVector f;
  f.s_t = singular_values_hermitian(r_t);
  f.s_t1 = singular_values_hermitian(r_t1);
  f.s_d = singular_values_hermitian(r_t1 - r_t);
  return f;
}

FeatureVector sense_features(const SensingWindowPair& pair) {
  return sense_features(pair.y_t, pair.y_t1, pair.y_t.cols());
}

ComplexMatrix ideal_difference(const ComplexMatrix& h_new, double noise_delta) {
  ComplexMatrix diff(h_new.rows(), h_new.rows());
  if (h_new.cols() > 0) diff = h_new * h_new.adjoint();
  for (std::size_t i = 0; i < diff.rows(); ++i) diff(i, i) += noise_delta;
  return diff;
}

FeatureDataset build_feature_dataset(const ScenarioConfig& cfg, std::size_t n_pairs,
                                     const LabelDistribution& labels,
                                     std::uint64_t root_seed, unsigned n_workers) {
  FeatureDataset dataset;
  dataset.n_rx = static_cast<std::size_t>(cfg.n_rx);
  dataset.features.resize(n_pairs);
  dataset.labels.resize(n_pairs);
  for_each_pair(
      cfg, n_pairs, labels, root_seed,
      [&](std::size_t i, SensingWindowPair&& pair) {
        dataset.features[i] = sense_features(pair);
        dataset.labels[i] = pair.label_d;
      },
      n_workers);
  return dataset;
}

namespace {

constexpr int kFeatureCsvVersion = 1;

void append_value(std::string& line, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), ",%.17g", v);
  line += buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

}  // namespace

void write_features_csv(const std::string& path, const FeatureDataset& dataset,
                        std::uint64_t config_hash) {
  if (dataset.features.size() != dataset.labels.size())
    throw std::invalid_argument("write_features_csv: feature/label count mismatch");
  const std::string tmp = path + ".tmp";
  std::ofstream out(tmp, std::ios::trunc);
  if (!out) throw std::runtime_error("write_features_csv: cannot open " + tmp);

  char head[96];
  std::snprintf(head, sizeof(head), "# covdiff-features v%d config=%016" PRIx64 "\n",
                kFeatureCsvVersion, config_hash);
  out << head;
  out << "label";
  const std::size_t n = dataset.n_rx;
  for (std::size_t i = 0; i < n; ++i) out << ",s_t_" << i;
  for (std::size_t i = 0; i < n; ++i) out << ",s_t1_" << i;
  for (std::size_t i = 0; i < n; ++i) out << ",s_d_" << i;
  out << "\n";
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    const FeatureVector& f = dataset.features[r];
    if (f.s_t.size() != n || f.s_t1.size() != n || f.s_d.size() != n)
      throw std::invalid_argument("write_features_csv: feature width mismatch");
    std::string line = std::to_string(dataset.labels[r]);
    for (double v : f.s_t) append_value(line, v);
    for (double v : f.s_t1) append_value(line, v);
    for (double v : f.s_d) append_value(line, v);
    line += '\n';
    out << line;
  }
  out.close();
  if (!out) throw std::runtime_error("write_features_csv: write failed for " + tmp);
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("write_features_csv: cannot move " + tmp + " to " + path);
}

FeatureDataset read_features_csv(const std::string& path,
                                 std::uint64_t expected_config_hash) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_features_csv: cannot open " + path);

  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("read_features_csv: empty file " + path);
  int version = 0;
  std::uint64_t config_hash = 0;
  if (std::sscanf(line.c_str(), "# covdiff-features v%d config=%" SCNx64, &version,
                  &config_hash) != 2)
    throw std::runtime_error("read_features_csv: " + path + " is not a feature CSV");
  if (version != kFeatureCsvVersion)
    throw std::runtime_error("read_features_csv: " + path + " has version " +
                             std::to_string(version) + ", expected " +
                             std::to_string(kFeatureCsvVersion));
  if (config_hash != expected_config_hash)
    throw std::runtime_error("read_features_csv: " + path +
                             " was generated under a different configuration");

  if (!std::getline(in, line))
    throw std::runtime_error("read_features_csv: missing header in " + path);
  const std::size_t columns = split_csv(line).size();
  if (columns < 4 || (columns - 1) % 3 != 0)
    throw std::runtime_error("read_features_csv: malformed header in " + path);
  const std::size_t n = (columns - 1) / 3;

  FeatureDataset dataset;
  dataset.n_rx = n;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv(line);
    if (cells.size() != columns)
      throw std::runtime_error("read_features_csv: ragged row in " + path);
    dataset.labels.push_back(std::stoi(cells[0]));
    FeatureVector f;
    f.s_t.resize(n);
    f.s_t1.resize(n);
    f.s_d.resize(n);
    for (std::size_t i = 0; i < n; ++i) f.s_t[i] = std::stod(cells[1 + i]);
    for (std::size_t i = 0; i < n; ++i) f.s_t1[i] = std::stod(cells[1 + n + i]);
    for (std::size_t i = 0; i < n; ++i) f.s_d[i] = std::stod(cells[1 + 2 * n + i]);
    dataset.features.push_back(std::move(f));
  }
  return dataset;
}

}  // namespace covdiff

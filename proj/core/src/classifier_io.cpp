#include "covdiff/classifier_io.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace covdiff {

namespace {

using nlohmann::json;

constexpr int kModelSchemaVersion = 1;

std::string hash_to_hex(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

std::uint64_t hex_to_hash(const std::string& s) {
  char* end = nullptr;
  const std::uint64_t v = std::strtoull(s.c_str(), &end, 16);
  if (end == s.c_str() || *end != '\0')
    throw std::runtime_error("model file: malformed hash '" + s + "'");
  return v;
}

json dense_to_json(const DenseLayer& l) {
  return json{{"in", l.in}, {"out", l.out}, {"w", l.w.value}, {"b", l.b.value}};
}

void dense_from_json(const json& j, DenseLayer& l, const std::string& name) {
  const std::size_t in = j.at("in").get<std::size_t>();
  const std::size_t out = j.at("out").get<std::size_t>();
  if (in != l.in || out != l.out)
    throw std::runtime_error("model file: " + name + " dimension mismatch");
  const auto w = j.at("w").get<std::vector<double>>();
  const auto b = j.at("b").get<std::vector<double>>();
  if (w.size() != l.w.size() || b.size() != l.b.size())
    throw std::runtime_error("model file: " + name + " tensor size mismatch");
  l.w.value = w;
  l.b.value = b;
}

json bn_to_json(const BatchNormLayer& l) {
  return json{{"gamma", l.gamma.value},
              {"beta", l.beta.value},
              {"running_mean", l.running_mean},
              {"running_var", l.running_var}};
}

void bn_from_json(const json& j, BatchNormLayer& l, const std::string& name) {
  const auto gamma = j.at("gamma").get<std::vector<double>>();
  const auto beta = j.at("beta").get<std::vector<double>>();
  const auto mean = j.at("running_mean").get<std::vector<double>>();
  const auto var = j.at("running_var").get<std::vector<double>>();
  if (gamma.size() != l.dim || beta.size() != l.dim || mean.size() != l.dim ||
      var.size() != l.dim)
    throw std::runtime_error("model file: " + name + " dimension mismatch");
  l.gamma.value = gamma;
  l.beta.value = beta;
  l.running_mean = mean;
  l.running_var = var;
}

}  // namespace

void save_classifier(const std::string& path, const ClassifierBundle& bundle) {
  const TwoStreamMlp& m = bundle.model;
  json layers;
  if (m.has_raw_stream()) {
    layers["fc_raw"] = dense_to_json(m.fc_raw);
    layers["bn_raw"] = bn_to_json(m.bn_raw);
  }
  if (m.has_diff_stream()) {
    layers["fc_diff"] = dense_to_json(m.fc_diff);
    layers["bn_diff"] = bn_to_json(m.bn_diff);
  }
  layers["fc_fuse"] = dense_to_json(m.fc_fuse);
  layers["bn_fuse"] = bn_to_json(m.bn_fuse);
  layers["fc_out"] = dense_to_json(m.fc_out);

  json history = json::array();
  for (const EpochStats& e : bundle.history)
    history.push_back({{"epoch", e.epoch},
                       {"train_loss", e.train_loss},
                       {"val_accuracy", e.val_accuracy}});

  const TrainConfig& t = bundle.train_config;
  const json doc{
      {"schema_version", kModelSchemaVersion},
      {"variant", to_string(m.variant)},
      {"n_rx", m.n_rx},
      {"n_classes", m.n_classes},
      {"dataset_config_hash", hash_to_hex(bundle.dataset_config_hash)},
      {"train_config",
       {{"epochs", t.epochs},
        {"batch_size", t.batch_size},
        {"learning_rate", t.learning_rate},
        {"beta1", t.beta1},
        {"beta2", t.beta2},
        {"adam_epsilon", t.adam_epsilon},
        {"bn_momentum", t.bn_momentum},
        {"shuffle", t.shuffle},
        {"seed", hash_to_hex(t.seed)}}},
      {"standardization", {{"mean", m.input_mean}, {"std", m.input_std}}},
      {"layers", layers},
      {"history", history}};

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("save_classifier: cannot open " + tmp);
    out << doc.dump(2) << "\n";
    if (!out.good()) throw std::runtime_error("save_classifier: write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("save_classifier: cannot move " + tmp + " to " + path);
}

ClassifierBundle load_classifier(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_classifier: cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw std::runtime_error("load_classifier: bad JSON in " + path + ": " + e.what());
  }

  try {
    const int version = doc.at("schema_version").get<int>();
    if (version != kModelSchemaVersion)
      throw std::runtime_error("load_classifier: " + path + " has schema version " +
                               std::to_string(version) + ", expected " +
                               std::to_string(kModelSchemaVersion));

    ClassifierBundle bundle;
    const auto variant =
        classifier_variant_from_string(doc.at("variant").get<std::string>());
    const int n_rx = doc.at("n_rx").get<int>();
    const int n_classes = doc.at("n_classes").get<int>();
    bundle.model = TwoStreamMlp(variant, n_rx, n_classes, 0);
    bundle.dataset_config_hash =
        hex_to_hash(doc.at("dataset_config_hash").get<std::string>());

    const json& t = doc.at("train_config");
    bundle.train_config.epochs = t.at("epochs").get<int>();
    bundle.train_config.batch_size = t.at("batch_size").get<int>();
    bundle.train_config.learning_rate = t.at("learning_rate").get<double>();
    bundle.train_config.beta1 = t.at("beta1").get<double>();
    bundle.train_config.beta2 = t.at("beta2").get<double>();
    bundle.train_config.adam_epsilon = t.at("adam_epsilon").get<double>();
    bundle.train_config.bn_momentum = t.at("bn_momentum").get<double>();
    bundle.train_config.shuffle = t.at("shuffle").get<bool>();
    bundle.train_config.seed = hex_to_hash(t.at("seed").get<std::string>());

    const json& std_block = doc.at("standardization");
    const auto mean = std_block.at("mean").get<std::vector<double>>();
    const auto sd = std_block.at("std").get<std::vector<double>>();
    if (mean.size() != bundle.model.input_width() ||
        sd.size() != bundle.model.input_width())
      throw std::runtime_error("model file: standardization width mismatch");
    bundle.model.input_mean = mean;
    bundle.model.input_std = sd;

    const json& layers = doc.at("layers");
    if (bundle.model.has_raw_stream()) {
      dense_from_json(layers.at("fc_raw"), bundle.model.fc_raw, "fc_raw");
      bn_from_json(layers.at("bn_raw"), bundle.model.bn_raw, "bn_raw");
    }
    if (bundle.model.has_diff_stream()) {
      dense_from_json(layers.at("fc_diff"), bundle.model.fc_diff, "fc_diff");
      bn_from_json(layers.at("bn_diff"), bundle.model.bn_diff, "bn_diff");
    }
    dense_from_json(layers.at("fc_fuse"), bundle.model.fc_fuse, "fc_fuse");
    bn_from_json(layers.at("bn_fuse"), bundle.model.bn_fuse, "bn_fuse");
    dense_from_json(layers.at("fc_out"), bundle.model.fc_out, "fc_out");

    for (const json& e : doc.at("history")) {
      EpochStats stats;
      stats.epoch = e.at("epoch").get<int>();
      stats.train_loss = e.at("train_loss").get<double>();
      stats.val_accuracy = e.at("val_accuracy").get<double>();
      bundle.history.push_back(stats);
    }
    return bundle;
  } catch (const json::exception& e) {
    throw std::runtime_error("load_classifier: malformed model file " + path + ": " +
                             e.what());
  }
}

}  // namespace covdiff

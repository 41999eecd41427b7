#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "covdiff/classifier.hpp"

namespace covdiff {

/// Trained model plus the context it was produced under.
struct ClassifierBundle {
  TwoStreamMlp model;
  TrainConfig train_config;
  std::uint64_t dataset_config_hash = 0;  // hash of the generating scenario
  std::vector<EpochStats> history;
};

/// Versioned JSON model file (written atomically). load refuses a schema
/// version mismatch or inconsistent layer dimensions.
void save_classifier(const std::string& path, const ClassifierBundle& bundle);
ClassifierBundle load_classifier(const std::string& path);

}  // namespace covdiff

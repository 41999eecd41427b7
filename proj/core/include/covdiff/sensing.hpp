#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "covdiff/matkit.hpp"
#include "covdiff/scenario.hpp"

namespace covdiff {

/// Singular-value features of one window pair: spectra of the two sample
/// covariance matrices and of their difference, each sorted descending.
struct FeatureVector {
  std::vector<double> s_t;
  std::vector<double> s_t1;
  std::vector<double> s_d;

  /// [s_t; s_t1; s_d], length 3 * n_rx.
  std::vector<double> concatenated() const;
};

/// R_t = (1/l) Y_t Y_t^H, R_{t+1} likewise, difference D = R_{t+1} - R_t;
/// features are the singular values of the three Hermitian matrices.
FeatureVector sense_features(const ComplexMatrix& y_t, const ComplexMatrix& y_t1,
                             std::size_t n_samples);
FeatureVector sense_features(const SensingWindowPair& pair);

/// Expected covariance difference when the pre-existing streams are static:
/// they cancel, leaving the Gram matrix of the newly activated channel
/// columns plus the noise-variance change,
///   H_new H_new^H + noise_delta * I.
/// Its rank equals the number of new streams when the noise is stationary.
/// h_new may have zero columns (no new streams).
ComplexMatrix ideal_difference(const ComplexMatrix& h_new, double noise_delta);

/// Labeled feature set, ordered by pair index.
struct FeatureDataset {
  std::size_t n_rx = 0;
  std::vector<FeatureVector> features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

/// Fused generate-then-featurize pipeline: window pairs are synthesized from
/// derive_seed(root_seed, i), reduced to features, and discarded, so memory
/// stays O(n_pairs * 3 * n_rx) rather than O(n_pairs * window).
FeatureDataset build_feature_dataset(const ScenarioConfig& cfg, std::size_t n_pairs,
                                     const LabelDistribution& labels,
                                     std::uint64_t root_seed, unsigned n_workers = 0);

/// CSV with a "# covdiff-features v<N> config=<hash>" comment line, a header
/// row, then one row per pair: label plus the concatenated feature values at
/// full precision. read refuses a version or config-hash mismatch.
void write_features_csv(const std::string& path, const FeatureDataset& dataset,
                        std::uint64_t config_hash);
FeatureDataset read_features_csv(const std::string& path,
                                 std::uint64_t expected_config_hash);

}  // namespace covdiff

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "covdiff/classifier.hpp"
#include "covdiff/sensing.hpp"

namespace covdiff {

/// Minimum-description-length source enumeration over a descending
/// nonnegative spectrum of n values observed across l samples (l >= n):
/// argmin over k in [0, n-1] of
///   -l (n-k) log(geometric/arithmetic mean of the trailing n-k values)
///   + k (2n - k) / 2 * log l.
/// Values are floored at 1e-12 before the log-mean ratio, so an all-zero
/// spectrum returns 0.
int mdl_estimate(const std::vector<double>& spectrum, std::size_t n_samples);

/// MDL on the difference spectrum, clamped to the label range [0, k_max].
int mdl_activity_estimate(const FeatureVector& f, std::size_t n_samples, int k_max);

struct ThresholdModel {
  double tau = 0.0;  // power-units decision threshold, > 0 once calibrated
  int k_max = 0;     // estimates clamped to [0, k_max]
  double calibration_accuracy = 0.0;  // exact-match score on the calibration set
  int grid_points = 0;                // candidates searched
};

/// Number of spectrum values strictly above tau, capped at k_max.
int threshold_estimate(const std::vector<double>& s_d, const ThresholdModel& model);

/// Grid calibration: 200 log-spaced candidates between 1e-3 and 1 times the
/// largest difference singular value in the calibration set, scored by
/// exact-match accuracy of the count against the label; ties resolve to the
/// smallest threshold.
ThresholdModel calibrate_threshold(const FeatureDataset& calibration, int k_max);

/// Input slice consumed by a classifier variant: the full 3 n_rx vector, the
/// per-window spectra [s_t; s_t1] (first 2 n_rx), or the difference spectrum
/// s_d (last n_rx).
std::vector<double> slice_features(const FeatureVector& v, ClassifierVariant variant);

/// Versioned JSON persistence (atomic write); load refuses a config-hash or
/// version mismatch.
void save_threshold(const std::string& path, const ThresholdModel& model,
                    std::uint64_t config_hash);
ThresholdModel load_threshold(const std::string& path,
                              std::uint64_t expected_config_hash);

}  // namespace covdiff

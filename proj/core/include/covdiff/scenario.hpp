#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "covdiff/channel.hpp"
#include "covdiff/matkit.hpp"
#include "covdiff/rng.hpp"

namespace covdiff {

enum class Constellation { Gaussian, Qpsk };

const char* to_string(Constellation c);
Constellation constellation_from_string(const std::string& s);

/// Scenario parameters for one operating point. L = n_ofdm * n_subc samples
/// per sensing window; the regime is overloaded when k_pre >= n_rx.
struct ScenarioConfig {
  int n_rx = 4;        // receive antennas at the sensing side
  int k_pre = 4;       // pre-existing streams, static across both windows
  int k_gf_max = 3;    // largest number of newly activated streams
  double snr_db = 20.0;
  int n_ofdm = 140;    // OFDM symbols per window
  int n_subc = 7;      // subcarriers per window
  Constellation constellation = Constellation::Gaussian;
  // Additive change of the noise variance in window t+1 (linear power);
  // 0 keeps the noise stationary across the pair.
  double noise_var_delta = 0.0;
  ChannelModelSpec channel;

  int window_samples() const { return n_ofdm * n_subc; }
  double noise_var() const { return std::pow(10.0, -snr_db / 10.0); }
  bool overloaded() const { return k_pre >= n_rx; }

  void validate() const;
};

/// Ground truth attached to a generated pair.
struct PairTruth {
  int k_pre = 0;
  double noise_var = 0.0;       // window t
  double noise_var_next = 0.0;  // window t+1
  ChannelRealization h_pre;     // shared by both windows
  ChannelRealization h_new;     // d newly activated streams (may be empty)
};

/// Two consecutive observed windows plus the label (number of newly
/// activated streams) and generation truth.
struct SensingWindowPair {
  ComplexMatrix y_t;
  ComplexMatrix y_t1;
  int label_d = 0;
  PairTruth truth;
};

/// How batch_generate assigns labels.
struct LabelDistribution {
  static LabelDistribution uniform() { return {}; }
  static LabelDistribution fixed(int d) { return {d}; }
  std::optional<int> fixed_d;
};

/// Zero-mean unit-power i.i.d. symbol block (k x l). Gaussian entries are
/// CN(0,1); QPSK entries are drawn from {(+-1 +-j)/sqrt(2)}.
ComplexMatrix draw_symbols(std::size_t k, std::size_t l, Constellation constellation,
                           Rng& rng);

/// Draws channels internally, then synthesizes the pair: Y_t over the k_pre
/// streams, Y_{t+1} over k_pre + d streams with the pre-existing channel
/// columns reused bit-identically. d must lie in [0, k_gf_max].
SensingWindowPair generate_pair(const ScenarioConfig& cfg, int d, Rng& rng);

/// Same, but with caller-supplied channel realizations (h_new may have zero
/// streams when d = 0). Used for conditional-ensemble studies and tests.
SensingWindowPair generate_pair_with_channels(const ScenarioConfig& cfg,
                                              const ChannelRealization& h_pre,
                                              const ChannelRealization& h_new,
                                              Rng& rng);

/// Streams n_pairs generated pairs to consume(index, pair), fanning out over
/// worker threads; pair index i is always generated from derive_seed(root,i)
/// so the dataset is reproducible regardless of scheduling. consume may be
/// called concurrently from different workers.
void for_each_pair(const ScenarioConfig& cfg, std::size_t n_pairs,
                   const LabelDistribution& labels, std::uint64_t root_seed,
                   const std::function<void(std::size_t, SensingWindowPair&&)>& consume,
                   unsigned n_workers = 0);

/// Materialized dataset, ordered by pair index.
std::vector<SensingWindowPair> batch_generate(const ScenarioConfig& cfg,
                                              std::size_t n_pairs,
                                              const LabelDistribution& labels,
                                              std::uint64_t root_seed,
                                              unsigned n_workers = 0);

/// Binary dataset file: versioned header (magic, version, config hash,
/// dimensions) followed by {label, k_pre, noise_var, y_t, y_t1} records.
/// load refuses files whose version or config hash does not match.
void save_pairs(const std::string& path, const std::vector<SensingWindowPair>& pairs,
                std::uint64_t config_hash);
std::vector<SensingWindowPair> load_pairs(const std::string& path,
                                          std::uint64_t expected_config_hash);

}  // namespace covdiff

#pragma once

#include <complex>
#include <string>
#include <vector>

#include "covdiff/matkit.hpp"
#include "covdiff/rng.hpp"

namespace covdiff {

enum class ChannelKind { FlatRayleigh, TdlA };

const char* to_string(ChannelKind kind);
ChannelKind channel_kind_from_string(const std::string& s);

/// Propagation-model parameters. The defaults are the 3.5 GHz / 30 kHz /
/// 2048-FFT / 100 ns operating point used throughout the experiments.
struct ChannelModelSpec {
  ChannelKind kind = ChannelKind::FlatRayleigh;
  double carrier_frequency_hz = 3.5e9;
  double subcarrier_spacing_hz = 30e3;
  int fft_size = 2048;
  double delay_spread_s = 100e-9;

  void validate() const;
};

/// Tapped-delay-line power-delay profile. Delays are unitless (scaled by the
/// model delay spread at draw time); powers are per-tap mean powers in dB.
struct TapProfile {
  std::string name;
  std::vector<double> normalized_delays;  // nonnegative, nondecreasing
  std::vector<double> powers_db;

  std::size_t tap_count() const { return normalized_delays.size(); }

  /// Linear tap powers normalized to sum to 1.
  std::vector<double> linear_powers() const;

  void validate() const;

  /// Loads a {"name", "delays", "powers_db"} JSON profile file.
  static TapProfile load(const std::string& path);

  /// Packaged TDL-A profile (data/tdl_a.json). Search order: explicit
  /// COVDIFF_DATA_DIR environment variable, then the packaged data
  /// directory, then ./data.
  static TapProfile tdl_a();
};

/// One channel draw: per-subcarrier n_rx x n_streams coefficient matrices.
/// A flat realization stores one matrix valid for every subcarrier.
struct ChannelRealization {
  std::vector<int> subcarriers;      // empty for flat realizations
  std::vector<ComplexMatrix> coeff;  // one per subcarrier (one total if flat)
  bool flat = false;

  const ComplexMatrix& at(int subcarrier) const;
  std::size_t n_rx() const { return coeff.empty() ? 0 : coeff.front().rows(); }
  std::size_t n_streams() const { return coeff.empty() ? 0 : coeff.front().cols(); }
};

/// I.i.d. flat Rayleigh draw: entries CN(0,1), identical on every subcarrier.
ChannelRealization draw_flat_rayleigh(std::size_t n_rx, std::size_t n_streams, Rng& rng);

/// Frequency response of a tapped-delay-line draw on the given subcarriers:
/// per (rx, stream) entry, independent tap gains a_p ~ CN(0, P_p) and
/// H(f_l) = sum_p a_p * exp(-j 2 pi f_l tau_p), with tau_p the tap delay
/// scaled by the delay spread and f_l = l * subcarrier_spacing. One draw per
/// frame; no time variation.
ChannelRealization draw_tdl_a(const ChannelModelSpec& spec, const TapProfile& profile,
                              std::size_t n_rx, std::size_t n_streams,
                              const std::vector<int>& subcarriers, Rng& rng);

/// Monte-Carlo estimate of the frequency-domain correlation coefficient at
/// subcarrier offset delta_f, averaged over reference subcarriers and matrix
/// entries. trials must be >= 1000.
std::complex<double> freq_correlation(const ChannelModelSpec& spec,
                                      const TapProfile& profile, int delta_f,
                                      std::size_t trials, Rng& rng);

/// Closed-form counterpart: the correlation of a tapped-delay-line channel
/// at offset delta_f is the (phase-conjugated) discrete transform of the
/// normalized power-delay profile, sum_p P_p * exp(j 2 pi delta_f scs tau_p).
std::complex<double> freq_correlation_closed_form(const ChannelModelSpec& spec,
                                                  const TapProfile& profile,
                                                  int delta_f);

/// Largest offset span such that |rho(delta)| >= rho_th for every delta <=
/// span (so a window of span+1 consecutive subcarriers stays coherent).
/// Flat channels return the full grid span. rho_th must lie in (0,1).
int max_coherent_span(const ChannelModelSpec& spec, const TapProfile& profile,
                      double rho_th);

}  // namespace covdiff

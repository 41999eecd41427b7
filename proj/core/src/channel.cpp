#include "covdiff/channel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>

#include <nlohmann/json.hpp>

#ifndef COVDIFF_PACKAGED_DATA_DIR
#define COVDIFF_PACKAGED_DATA_DIR "data"
#endif

namespace covdiff {

const char* to_string(ChannelKind kind) {
  return kind == ChannelKind::FlatRayleigh ? "flat_rayleigh" : "tdl_a";
}

ChannelKind channel_kind_from_string(const std::string& s) {
  if (s == "flat_rayleigh") return ChannelKind::FlatRayleigh;
  if (s == "tdl_a") return ChannelKind::TdlA;
  throw std::invalid_argument("unknown channel kind: " + s);
}

void ChannelModelSpec::validate() const {
  if (subcarrier_spacing_hz <= 0.0)
    throw std::invalid_argument("channel spec: subcarrier spacing must be > 0");
  if (fft_size <= 0 || (fft_size & (fft_size - 1)) != 0)
    throw std::invalid_argument("channel spec: fft size must be a power of two");
  if (kind == ChannelKind::TdlA && delay_spread_s <= 0.0)
    throw std::invalid_argument("channel spec: delay spread must be > 0 for TDL");
}

std::vector<double> TapProfile::linear_powers() const {
  std::vector<double> p(powers_db.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::pow(10.0, powers_db[i] / 10.0);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

void TapProfile::validate() const {
  if (normalized_delays.empty())
    throw std::invalid_argument("tap profile: no taps");
  if (normalized_delays.size() != powers_db.size())
    throw std::invalid_argument("tap profile: delay/power count mismatch");
  double prev = 0.0;
  for (double d : normalized_delays) {
    if (!(d >= 0.0)) throw std::invalid_argument("tap profile: negative delay");
    if (d < prev) throw std::invalid_argument("tap profile: delays not nondecreasing");
    prev = d;
  }
  for (double p : powers_db)
    if (!std::isfinite(p)) throw std::invalid_argument("tap profile: non-finite power");
}

TapProfile TapProfile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("tap profile: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("tap profile: bad JSON in " + path + ": " + e.what());
  }
  if (!j.contains("name") || !j.contains("delays") || !j.contains("powers_db"))
    throw std::invalid_argument("tap profile: missing name/delays/powers_db in " + path);
  TapProfile p;
  p.name = j.at("name").get<std::string>();
  p.normalized_delays = j.at("delays").get<std::vector<double>>();
  p.powers_db = j.at("powers_db").get<std::vector<double>>();
  p.validate();
  return p;
}

TapProfile TapProfile::tdl_a() {
  static TapProfile cached = [] {
    namespace fs = std::filesystem;
    std::vector<fs::path> candidates;
    if (const char* env = std::getenv("COVDIFF_DATA_DIR"))
      candidates.emplace_back(fs::path(env) / "tdl_a.json");
    candidates.emplace_back(fs::path(COVDIFF_PACKAGED_DATA_DIR) / "tdl_a.json");
    candidates.emplace_back(fs::path("data") / "tdl_a.json");
    for (const auto& c : candidates)
      if (fs::exists(c)) return load(c.string());
    throw std::invalid_argument("tap profile: tdl_a.json not found (set COVDIFF_DATA_DIR)");
  }();
  return cached;
}

const ComplexMatrix& ChannelRealization::at(int subcarrier) const {
  if (flat) return coeff.front();
  for (std::size_t i = 0; i < subcarriers.size(); ++i)
    if (subcarriers[i] == subcarrier) return coeff[i];
  throw std::invalid_argument("channel realization: subcarrier not drawn");
}

ChannelRealization draw_flat_rayleigh(std::size_t n_rx, std::size_t n_streams, Rng& rng) {
  if (n_rx < 1 || n_streams < 1)
    throw std::invalid_argument("draw_flat_rayleigh: dimensions must be >= 1");
  ChannelRealization real;
  real.flat = true;
  ComplexMatrix h(n_rx, n_streams);
  for (auto& e : h.entries()) e = rng.cnormal();
  real.coeff.push_back(std::move(h));
  return real;
}

ChannelRealization draw_tdl_a(const ChannelModelSpec& spec, const TapProfile& profile,
                              std::size_t n_rx, std::size_t n_streams,
                              const std::vector<int>& subcarriers, Rng& rng) {
  spec.validate();
  profile.validate();
  if (subcarriers.empty())
    throw std::invalid_argument("draw_tdl_a: empty subcarrier list");
  for (int sc : subcarriers)
    if (sc < 0 || sc >= spec.fft_size)
      throw std::invalid_argument("draw_tdl_a: subcarrier index outside FFT grid");

  const auto powers = profile.linear_powers();
  const std::size_t n_taps = profile.tap_count();

  // Per-tap phasor table exp(-j 2 pi f_l tau_p), shared by all entries.
  std::vector<cxd> phasor(subcarriers.size() * n_taps);
  for (std::size_t s = 0; s < subcarriers.size(); ++s) {
    const double f = subcarriers[s] * spec.subcarrier_spacing_hz;
    for (std::size_t p = 0; p < n_taps; ++p) {
      const double tau = profile.normalized_delays[p] * spec.delay_spread_s;
      const double phase = -2.0 * M_PI * f * tau;
      phasor[s * n_taps + p] = {std::cos(phase), std::sin(phase)};
    }
  }

  std::vector<double> amp(n_taps);
  for (std::size_t p = 0; p < n_taps; ++p) amp[p] = std::sqrt(powers[p]);

  ChannelRealization real;
  real.subcarriers = subcarriers;
  real.coeff.assign(subcarriers.size(), ComplexMatrix(n_rx, n_streams));

  std::vector<cxd> gains(n_taps);
  for (std::size_t i = 0; i < n_rx; ++i) {
    for (std::size_t k = 0; k < n_streams; ++k) {
      for (std::size_t p = 0; p < n_taps; ++p) gains[p] = amp[p] * rng.cnormal();
      for (std::size_t s = 0; s < subcarriers.size(); ++s) {
        cxd h = 0.0;
        const cxd* ph = &phasor[s * n_taps];
        for (std::size_t p = 0; p < n_taps; ++p) h += gains[p] * ph[p];
        real.coeff[s](i, k) = h;
      }
    }
  }
  return real;
}

std::complex<double> freq_correlation(const ChannelModelSpec& spec,
                                      const TapProfile& profile, int delta_f,
                                      std::size_t trials, Rng& rng) {
  if (trials < 1000)
    throw std::invalid_argument("freq_correlation: need at least 1000 trials");
  if (delta_f < 0) throw std::invalid_argument("freq_correlation: negative offset");

  if (spec.kind == ChannelKind::FlatRayleigh || delta_f == 0) return {1.0, 0.0};

  // Average E[h(l) conj(h(l+delta))] over trials and a block of reference
  // subcarriers; the l-average matches the curve's definition and reduces
  // variance. One (rx, stream) entry per draw is enough: entries are i.i.d.
  constexpr int kReferenceBlock = 8;
  std::vector<int> subcarriers;
  for (int l = 0; l < kReferenceBlock; ++l) {
    subcarriers.push_back(l);
    subcarriers.push_back(l + delta_f);
  }
  std::sort(subcarriers.begin(), subcarriers.end());
  subcarriers.erase(std::unique(subcarriers.begin(), subcarriers.end()),
                    subcarriers.end());

  cxd cross = 0.0;
  double pow_ref = 0.0, pow_off = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    auto h = draw_tdl_a(spec, profile, 1, 1, subcarriers, rng);
    for (int l = 0; l < kReferenceBlock; ++l) {
      const cxd a = h.at(l)(0, 0);
      const cxd b = h.at(l + delta_f)(0, 0);
      cross += a * std::conj(b);
      pow_ref += std::norm(a);
      pow_off += std::norm(b);
    }
  }
  return cross / std::sqrt(pow_ref * pow_off);
}

std::complex<double> freq_correlation_closed_form(const ChannelModelSpec& spec,
                                                  const TapProfile& profile,
                                                  int delta_f) {
  if (spec.kind == ChannelKind::FlatRayleigh) return {1.0, 0.0};
  const auto powers = profile.linear_powers();
  cxd acc = 0.0;
  for (std::size_t p = 0; p < powers.size(); ++p) {
    const double tau = profile.normalized_delays[p] * spec.delay_spread_s;
    const double phase = 2.0 * M_PI * delta_f * spec.subcarrier_spacing_hz * tau;
    acc += powers[p] * cxd{std::cos(phase), std::sin(phase)};
  }
  return acc;
}

int max_coherent_span(const ChannelModelSpec& spec, const TapProfile& profile,
                      double rho_th) {
  if (!(rho_th > 0.0 && rho_th < 1.0))
    throw std::invalid_argument("max_coherent_span: rho_th must be in (0,1)");
  if (spec.kind == ChannelKind::FlatRayleigh) return spec.fft_size - 1;
  int span = 0;
  while (span + 1 < spec.fft_size &&
         std::abs(freq_correlation_closed_form(spec, profile, span + 1)) >= rho_th)
    ++span;
  return span;
}

}  // namespace covdiff

#include "covdiff/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "covdiff/parallel.hpp"

namespace covdiff {

const char* to_string(Constellation c) {
  return c == Constellation::Gaussian ? "gaussian" : "qpsk";
}

Constellation constellation_from_string(const std::string& s) {
  if (s == "gaussian") return Constellation::Gaussian;
  if (s == "qpsk") return Constellation::Qpsk;
  throw std::invalid_argument("unknown constellation: " + s);
}

void ScenarioConfig::validate() const {
  if (n_rx < 1) throw std::invalid_argument("scenario: n_rx must be >= 1");
  if (k_pre < 0) throw std::invalid_argument("scenario: k_pre must be >= 0");
  if (k_gf_max < 0) throw std::invalid_argument("scenario: k_gf_max must be >= 0");
  if (n_ofdm < 1) throw std::invalid_argument("scenario: n_ofdm must be >= 1");
  if (n_subc < 1) throw std::invalid_argument("scenario: n_subc must be >= 1");
  if (!std::isfinite(snr_db)) throw std::invalid_argument("scenario: snr_db not finite");
  if (!std::isfinite(noise_var_delta) || noise_var() + noise_var_delta <= 0.0)
    throw std::invalid_argument("scenario: noise_var + noise_var_delta must be > 0");
  channel.validate();
  if (channel.kind == ChannelKind::TdlA && n_subc > channel.fft_size)
    throw std::invalid_argument("scenario: n_subc exceeds the FFT grid");
}

ComplexMatrix draw_symbols(std::size_t k, std::size_t l, Constellation constellation,
                           Rng& rng) {
  if (k < 1 || l < 1)
    throw std::invalid_argument("draw_symbols: dimensions must be >= 1");
  ComplexMatrix x(k, l);
  if (constellation == Constellation::Gaussian) {
    for (auto& e : x.entries()) e = rng.cnormal();
  } else {
    for (auto& e : x.entries()) {
      const double re = rng.uniform_int(2) ? M_SQRT1_2 : -M_SQRT1_2;
      const double im = rng.uniform_int(2) ? M_SQRT1_2 : -M_SQRT1_2;
      e = cxd(re, im);
    }
  }
  return x;
}

namespace {

/// y[:, l] += H(subcarrier of l) * x[:, l], column subcarrier = l mod n_subc.
void mix_into(ComplexMatrix& y, const ChannelRealization& h, const ComplexMatrix& x,
              int n_subc) {
  const std::size_t n_rx = y.rows();
  const std::size_t k = x.rows();
  const std::size_t l_total = y.cols();
  for (std::size_t l = 0; l < l_total; ++l) {
    const ComplexMatrix& hm = h.at(static_cast<int>(l % n_subc));
    for (std::size_t i = 0; i < n_rx; ++i) {
      cxd acc = y(i, l);
      for (std::size_t s = 0; s < k; ++s) acc += hm(i, s) * x(s, l);
      y(i, l) = acc;
    }
  }
}

void add_noise(ComplexMatrix& y, double noise_var, Rng& rng) {
  const double sigma = std::sqrt(noise_var);
  for (auto& e : y.entries()) e += sigma * rng.cnormal();
}

ChannelRealization draw_channel(const ScenarioConfig& cfg, std::size_t n_streams,
                                Rng& rng) {
  if (n_streams == 0) return {};
  if (cfg.channel.kind == ChannelKind::FlatRayleigh)
    return draw_flat_rayleigh(cfg.n_rx, n_streams, rng);
  std::vector<int> subcarriers(cfg.n_subc);
  std::iota(subcarriers.begin(), subcarriers.end(), 0);
  return draw_tdl_a(cfg.channel, TapProfile::tdl_a(), cfg.n_rx, n_streams, subcarriers,
                    rng);
}

}  // namespace

SensingWindowPair generate_pair(const ScenarioConfig& cfg, int d, Rng& rng) {
  cfg.validate();
  if (d < 0 || d > cfg.k_gf_max)
    throw std::invalid_argument("generate_pair: d outside [0, k_gf_max]");
  const ChannelRealization h_pre = draw_channel(cfg, cfg.k_pre, rng);
  const ChannelRealization h_new = draw_channel(cfg, d, rng);
  return generate_pair_with_channels(cfg, h_pre, h_new, rng);
}

SensingWindowPair generate_pair_with_channels(const ScenarioConfig& cfg,
                                              const ChannelRealization& h_pre,
                                              const ChannelRealization& h_new,
                                              Rng& rng) {
  cfg.validate();
  const int d = static_cast<int>(h_new.n_streams());
  if (cfg.k_pre > 0 && static_cast<int>(h_pre.n_rx()) != cfg.n_rx)
    throw std::invalid_argument("generate_pair: h_pre antenna count mismatch");
  if (static_cast<int>(h_pre.n_streams()) != cfg.k_pre)
    throw std::invalid_argument("generate_pair: h_pre stream count mismatch");
  if (d > 0 && static_cast<int>(h_new.n_rx()) != cfg.n_rx)
    throw std::invalid_argument("generate_pair: h_new antenna count mismatch");
  if (d > cfg.k_gf_max)
    throw std::invalid_argument("generate_pair: h_new exceeds k_gf_max streams");

  const std::size_t l = static_cast<std::size_t>(cfg.window_samples());
  const double var_t = cfg.noise_var();
  const double var_t1 = var_t + cfg.noise_var_delta;

  SensingWindowPair pair;
  pair.label_d = d;
  pair.truth.k_pre = cfg.k_pre;
  pair.truth.noise_var = var_t;
  pair.truth.noise_var_next = var_t1;
  pair.truth.h_pre = h_pre;
  pair.truth.h_new = h_new;

  // Window t: pre-existing streams only.
  pair.y_t = ComplexMatrix(cfg.n_rx, l);
  if (cfg.k_pre > 0) {
    const ComplexMatrix x = draw_symbols(cfg.k_pre, l, cfg.constellation, rng);
    mix_into(pair.y_t, h_pre, x, cfg.n_subc);
  }
  add_noise(pair.y_t, var_t, rng);

  // Window t+1: same pre-existing channels carrying fresh symbols, plus the
  // newly activated streams.
  pair.y_t1 = ComplexMatrix(cfg.n_rx, l);
  if (cfg.k_pre > 0) {
    const ComplexMatrix x = draw_symbols(cfg.k_pre, l, cfg.constellation, rng);
    mix_into(pair.y_t1, h_pre, x, cfg.n_subc);
  }
  if (d > 0) {
    const ComplexMatrix x = draw_symbols(d, l, cfg.constellation, rng);
    mix_into(pair.y_t1, h_new, x, cfg.n_subc);
  }
  add_noise(pair.y_t1, var_t1, rng);
  return pair;
}

void for_each_pair(const ScenarioConfig& cfg, std::size_t n_pairs,
                   const LabelDistribution& labels, std::uint64_t root_seed,
                   const std::function<void(std::size_t, SensingWindowPair&&)>& consume,
                   unsigned n_workers) {
  cfg.validate();
  if (labels.fixed_d && (*labels.fixed_d < 0 || *labels.fixed_d > cfg.k_gf_max))
    throw std::invalid_argument("for_each_pair: fixed label outside [0, k_gf_max]");
  parallel_for(
      n_pairs,
      [&](std::size_t i) {
        Rng rng(derive_seed(root_seed, i));
        const int d = labels.fixed_d
                          ? *labels.fixed_d
                          : static_cast<int>(rng.uniform_int(
                                static_cast<std::uint64_t>(cfg.k_gf_max) + 1));
        consume(i, generate_pair(cfg, d, rng));
      },
      n_workers);
}

std::vector<SensingWindowPair> batch_generate(const ScenarioConfig& cfg,
                                              std::size_t n_pairs,
                                              const LabelDistribution& labels,
                                              std::uint64_t root_seed,
                                              unsigned n_workers) {
  std::vector<SensingWindowPair> out(n_pairs);
  for_each_pair(
      cfg, n_pairs, labels, root_seed,
      [&](std::size_t i, SensingWindowPair&& p) { out[i] = std::move(p); }, n_workers);
  return out;
}

namespace {

constexpr char kPairMagic[8] = {'C', 'V', 'D', 'F', 'P', 'A', 'I', 'R'};
constexpr std::uint32_t kPairFormatVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
}

void write_block(std::ofstream& out, const ComplexMatrix& m) {
  out.write(reinterpret_cast<const char*>(m.entries().data()),
            static_cast<std::streamsize>(m.entries().size() * sizeof(cxd)));
}

void read_block(std::ifstream& in, ComplexMatrix& m) {
  in.read(reinterpret_cast<char*>(m.entries().data()),
          static_cast<std::streamsize>(m.entries().size() * sizeof(cxd)));
}

}  // namespace

void save_pairs(const std::string& path, const std::vector<SensingWindowPair>& pairs,
                std::uint64_t config_hash) {
  if (pairs.empty()) throw std::invalid_argument("save_pairs: empty dataset");
  const std::uint32_t n_rx = static_cast<std::uint32_t>(pairs.front().y_t.rows());
  const std::uint32_t l = static_cast<std::uint32_t>(pairs.front().y_t.cols());
  for (const auto& p : pairs)
    if (p.y_t.rows() != n_rx || p.y_t.cols() != l || p.y_t1.rows() != n_rx ||
        p.y_t1.cols() != l)
      throw std::invalid_argument("save_pairs: inconsistent pair dimensions");

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("save_pairs: cannot open " + tmp);
    out.write(kPairMagic, sizeof(kPairMagic));
    write_pod(out, kPairFormatVersion);
    write_pod(out, config_hash);
    write_pod(out, n_rx);
    write_pod(out, l);
    write_pod(out, static_cast<std::uint64_t>(pairs.size()));
    for (const auto& p : pairs) {
      write_pod(out, static_cast<std::int32_t>(p.label_d));
      write_pod(out, static_cast<std::int32_t>(p.truth.k_pre));
      write_pod(out, p.truth.noise_var);
      write_pod(out, p.truth.noise_var_next);
      write_block(out, p.y_t);
      write_block(out, p.y_t1);
    }
    if (!out) throw std::runtime_error("save_pairs: write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("save_pairs: cannot move " + tmp + " to " + path);
}

std::vector<SensingWindowPair> load_pairs(const std::string& path,
                                          std::uint64_t expected_config_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_pairs: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kPairMagic, sizeof(magic)) != 0)
    throw std::runtime_error("load_pairs: " + path + " is not a pair dataset");
  std::uint32_t version = 0;
  std::uint64_t config_hash = 0;
  std::uint32_t n_rx = 0, l = 0;
  std::uint64_t n_pairs = 0;
  read_pod(in, version);
  read_pod(in, config_hash);
  read_pod(in, n_rx);
  read_pod(in, l);
  read_pod(in, n_pairs);
  if (version != kPairFormatVersion)
    throw std::runtime_error("load_pairs: " + path + " has format version " +
                             std::to_string(version) + ", expected " +
                             std::to_string(kPairFormatVersion));
  if (config_hash != expected_config_hash)
    throw std::runtime_error("load_pairs: " + path +
                             " was generated under a different configuration");
  std::vector<SensingWindowPair> pairs(n_pairs);
  for (auto& p : pairs) {
    std::int32_t label = 0, k_pre = 0;
    read_pod(in, label);
    read_pod(in, k_pre);
    read_pod(in, p.truth.noise_var);
    read_pod(in, p.truth.noise_var_next);
    p.label_d = label;
    p.truth.k_pre = k_pre;
    p.y_t = ComplexMatrix(n_rx, l);
    p.y_t1 = ComplexMatrix(n_rx, l);
    read_block(in, p.y_t);
    read_block(in, p.y_t1);
    if (!in) throw std::runtime_error("load_pairs: truncated file " + path);
  }
  return pairs;
}

}  // namespace covdiff

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "covdiff/matkit.hpp"
#include "covdiff/rng.hpp"
#include "covdiff/scenario.hpp"
#include "support/test_util.hpp"

using namespace covdiff;

namespace {

double real_trace(const ComplexMatrix& m) {
  double t = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) t += m(i, i).real();
  return t;
}

ComplexMatrix mean_difference(const ScenarioConfig& cfg, std::size_t n_pairs,
                              int d, std::uint64_t seed) {
  ComplexMatrix acc(static_cast<std::size_t>(cfg.n_rx),
                    static_cast<std::size_t>(cfg.n_rx));
  Rng rng(seed);
  for (std::size_t t = 0; t < n_pairs; ++t) {
    const SensingWindowPair pair = generate_pair(cfg, d, rng);
    const ComplexMatrix diff = scm(pair.y_t1, pair.y_t1.cols());
    const ComplexMatrix base = scm(pair.y_t, pair.y_t.cols());
    for (std::size_t i = 0; i < acc.entries().size(); ++i)
      acc.entries()[i] += (diff.entries()[i] - base.entries()[i]) /
                          static_cast<double>(n_pairs);
  }
  return acc;
}

bool same_entries(const ComplexMatrix& a, const ComplexMatrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a.entries() == b.entries();
}

}  // namespace

TEST_CASE("scenario config validation") {
  ScenarioConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.window_samples() == 980);  // 140 symbols x 7 subcarriers
  CHECK(cfg.noise_var() == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(cfg.overloaded());  // k_pre = n_rx = 4

  ScenarioConfig bad = cfg;
  bad.n_rx = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.k_pre = -1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.n_ofdm = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.snr_db = std::nan("");
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.snr_db = 0.0;              // noise_var = 1
  bad.noise_var_delta = -1.0;   // second-window noise power would vanish
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("qpsk symbols sit on the unit circle") {
  Rng rng(1);
  const ComplexMatrix x = draw_symbols(3, 500, Constellation::Qpsk, rng);
  for (const cxd& e : x.entries()) {
    CHECK(std::abs(std::norm(e) - 1.0) < 1e-15);
    CHECK(std::abs(std::abs(e.real()) - M_SQRT1_2) < 1e-15);
    CHECK(std::abs(std::abs(e.imag()) - M_SQRT1_2) < 1e-15);
  }
}

TEST_CASE("gaussian symbols have zero mean and unit power") {
  Rng rng(2);
  const ComplexMatrix x = draw_symbols(1, 100000, Constellation::Gaussian, rng);
  cxd mean(0.0, 0.0);
  double power = 0.0;
  for (const cxd& e : x.entries()) {
    mean += e;
    power += std::norm(e);
  }
  const double n = static_cast<double>(x.entries().size());
  CHECK(std::abs(mean) / n < 0.01);
  CHECK(power / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("symbol streams are white: (1/L) X X^H approaches identity") {
  Rng rng(3);
  const std::size_t l = 100000;
  const ComplexMatrix x = draw_symbols(3, l, Constellation::Gaussian, rng);
  const ComplexMatrix r = scm(x, l);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      const cxd expected = (i == j) ? cxd(1.0, 0.0) : cxd(0.0, 0.0);
      CHECK(std::abs(r(i, j) - expected) < 0.02);
    }
}

TEST_CASE("draw_symbols rejects empty blocks") {
  Rng rng(4);
  CHECK_THROWS_AS(draw_symbols(0, 5, Constellation::Gaussian, rng),
                  std::invalid_argument);
  CHECK_THROWS_AS(draw_symbols(5, 0, Constellation::Qpsk, rng),
                  std::invalid_argument);
}

TEST_CASE("window-t covariance trace matches n_rx * (k_pre + noise_var)") {
  // Defaults: 4 * (4 + 0.01) = 16.04 in expectation.
  ScenarioConfig cfg;
  Rng rng(5);
  double mean_trace = 0.0;
  const int trials = 400;
  for (int t = 0; t < trials; ++t) {
    const SensingWindowPair pair = generate_pair(cfg, 0, rng);
    mean_trace += real_trace(scm(pair.y_t, pair.y_t.cols()));
  }
  mean_trace /= trials;
  CHECK(mean_trace == doctest::Approx(16.04).epsilon(0.02));
}

TEST_CASE("no activation means a zero-mean covariance difference") {
  ScenarioConfig cfg;
  const ComplexMatrix mean = mean_difference(cfg, 600, 0, 6);
  for (const cxd& e : mean.entries()) CHECK(std::abs(e) < 0.05);
}

TEST_CASE("at high snr the mean difference is the new-stream outer product") {
  ScenarioConfig cfg;
  cfg.k_pre = 1;
  cfg.k_gf_max = 1;
  cfg.snr_db = 300.0;  // noise power 1e-30
  Rng channel_rng(7);
  const ChannelRealization h_pre = draw_flat_rayleigh(4, 1, channel_rng);
  const ChannelRealization h_new = draw_flat_rayleigh(4, 1, channel_rng);

  ComplexMatrix acc(4, 4);
  const int trials = 800;
  Rng rng(8);
  for (int t = 0; t < trials; ++t) {
    const SensingWindowPair pair = generate_pair_with_channels(cfg, h_pre, h_new, rng);
    const ComplexMatrix rt = scm(pair.y_t, pair.y_t.cols());
    const ComplexMatrix rt1 = scm(pair.y_t1, pair.y_t1.cols());
    for (std::size_t i = 0; i < acc.entries().size(); ++i)
      acc.entries()[i] += (rt1.entries()[i] - rt.entries()[i]) /
                          static_cast<double>(trials);
  }
  const ComplexMatrix& h = h_new.coeff.front();
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      CHECK(std::abs(acc(i, j) - h(i, 0) * std::conj(h(j, 0))) < 0.05);
}

TEST_CASE("pair truth carries the supplied channels and noise powers") {
  ScenarioConfig cfg;
  cfg.k_pre = 2;
  cfg.noise_var_delta = 0.5;
  cfg.n_ofdm = 4;
  Rng channel_rng(9);
  const ChannelRealization h_pre = draw_flat_rayleigh(4, 2, channel_rng);
  const ChannelRealization h_new = draw_flat_rayleigh(4, 3, channel_rng);
  Rng rng(10);
  const SensingWindowPair pair = generate_pair_with_channels(cfg, h_pre, h_new, rng);
  CHECK(pair.label_d == 3);
  CHECK(pair.truth.k_pre == 2);
  CHECK(pair.truth.noise_var == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(pair.truth.noise_var_next == doctest::Approx(0.51).epsilon(1e-12));
  CHECK(same_entries(pair.truth.h_pre.coeff.front(), h_pre.coeff.front()));
  CHECK(same_entries(pair.truth.h_new.coeff.front(), h_new.coeff.front()));
}

TEST_CASE("generate_pair_with_channels rejects mismatched channels") {
  ScenarioConfig cfg;
  cfg.k_pre = 2;
  Rng rng(11);
  const ChannelRealization ok_pre = draw_flat_rayleigh(4, 2, rng);
  const ChannelRealization ok_new = draw_flat_rayleigh(4, 1, rng);
  CHECK_NOTHROW(generate_pair_with_channels(cfg, ok_pre, ok_new, rng));

  const ChannelRealization wrong_rx = draw_flat_rayleigh(3, 2, rng);
  CHECK_THROWS_AS(generate_pair_with_channels(cfg, wrong_rx, ok_new, rng),
                  std::invalid_argument);
  const ChannelRealization wrong_streams = draw_flat_rayleigh(4, 1, rng);
  CHECK_THROWS_AS(generate_pair_with_channels(cfg, wrong_streams, ok_new, rng),
                  std::invalid_argument);
  const ChannelRealization too_many = draw_flat_rayleigh(4, 4, rng);  // > k_gf_max
  CHECK_THROWS_AS(generate_pair_with_channels(cfg, ok_pre, too_many, rng),
                  std::invalid_argument);
}

TEST_CASE("generate_pair rejects labels outside the activation range") {
  ScenarioConfig cfg;
  Rng rng(12);
  CHECK_THROWS_AS(generate_pair(cfg, -1, rng), std::invalid_argument);
  CHECK_THROWS_AS(generate_pair(cfg, cfg.k_gf_max + 1, rng), std::invalid_argument);
}

TEST_CASE("noise power matches the configured snr") {
  // Pure-noise scenario: per-entry power is exactly the noise variance.
  ScenarioConfig cfg;
  cfg.n_rx = 2;
  cfg.k_pre = 0;
  cfg.k_gf_max = 0;
  cfg.snr_db = 7.0;
  cfg.n_ofdm = 10000;
  cfg.n_subc = 5;
  Rng rng(13);
  const SensingWindowPair pair = generate_pair(cfg, 0, rng);
  double power = 0.0;
  for (const cxd& e : pair.y_t.entries()) power += std::norm(e);
  power /= static_cast<double>(pair.y_t.entries().size());
  CHECK(power == doctest::Approx(std::pow(10.0, -0.7)).epsilon(0.03));
}

TEST_CASE("fixed label distribution pins every pair") {
  ScenarioConfig cfg;
  cfg.n_ofdm = 3;
  const auto pairs = batch_generate(cfg, 50, LabelDistribution::fixed(2), 14);
  for (const auto& p : pairs) {
    CHECK(p.label_d == 2);
    CHECK(p.truth.h_new.n_streams() == 2);
  }
  CHECK_THROWS_AS(batch_generate(cfg, 5, LabelDistribution::fixed(4), 14),
                  std::invalid_argument);
}

TEST_CASE("uniform label distribution is balanced over four classes") {
  ScenarioConfig cfg;
  cfg.n_rx = 2;
  cfg.k_pre = 1;
  cfg.n_ofdm = 2;
  cfg.n_subc = 2;
  const auto pairs = batch_generate(cfg, 4000, LabelDistribution::uniform(), 15);
  int counts[4] = {0, 0, 0, 0};
  for (const auto& p : pairs) {
    REQUIRE(p.label_d >= 0);
    REQUIRE(p.label_d <= 3);
    ++counts[p.label_d];
  }
  for (int c : counts) {
    CHECK(c >= 900);   // expectation 1000, ~9.7 sd margin
    CHECK(c <= 1100);
  }
}

TEST_CASE("datasets are reproducible from the root seed") {
  ScenarioConfig cfg;
  cfg.n_ofdm = 3;
  const auto a = batch_generate(cfg, 20, LabelDistribution::uniform(), 16);
  const auto b = batch_generate(cfg, 20, LabelDistribution::uniform(), 16);
  const auto c = batch_generate(cfg, 20, LabelDistribution::uniform(), 17);
  REQUIRE(a.size() == b.size());
  bool any_difference = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].label_d == b[i].label_d);
    CHECK(same_entries(a[i].y_t, b[i].y_t));
    CHECK(same_entries(a[i].y_t1, b[i].y_t1));
    if (!same_entries(a[i].y_t, c[i].y_t)) any_difference = true;
  }
  CHECK(any_difference);  // a different root seed changes the data
}

TEST_CASE("worker count does not change the generated dataset") {
  ScenarioConfig cfg;
  cfg.n_ofdm = 3;
  const auto serial = batch_generate(cfg, 30, LabelDistribution::uniform(), 18, 1);
  const auto threaded = batch_generate(cfg, 30, LabelDistribution::uniform(), 18, 3);
  REQUIRE(serial.size() == threaded.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].label_d == threaded[i].label_d);
    CHECK(same_entries(serial[i].y_t, threaded[i].y_t));
    CHECK(same_entries(serial[i].y_t1, threaded[i].y_t1));
  }
}

TEST_CASE("pair dataset files round-trip bit-exactly") {
  ScenarioConfig cfg;
  cfg.n_ofdm = 2;
  const auto pairs = batch_generate(cfg, 5, LabelDistribution::uniform(), 19);
  const std::string path = covdiff::testing::temp_path("pairs.bin");
  save_pairs(path, pairs, 0xabcdef12u);
  const auto loaded = load_pairs(path, 0xabcdef12u);
  REQUIRE(loaded.size() == pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CHECK(loaded[i].label_d == pairs[i].label_d);
    CHECK(loaded[i].truth.k_pre == pairs[i].truth.k_pre);
    CHECK(loaded[i].truth.noise_var == pairs[i].truth.noise_var);
    CHECK(same_entries(loaded[i].y_t, pairs[i].y_t));
    CHECK(same_entries(loaded[i].y_t1, pairs[i].y_t1));
  }
}

TEST_CASE("pair dataset files refuse a different configuration hash") {
  ScenarioConfig cfg;
  cfg.n_ofdm = 2;
  const auto pairs = batch_generate(cfg, 3, LabelDistribution::uniform(), 20);
  const std::string path = covdiff::testing::temp_path("pairs_hash.bin");
  save_pairs(path, pairs, 111);
  CHECK_THROWS_WITH_AS(load_pairs(path, 222),
                       doctest::Contains("different configuration"),
                       std::runtime_error);
  CHECK_THROWS_AS(load_pairs("no_such_pairs.bin", 111), std::runtime_error);
  CHECK_THROWS_AS(save_pairs(covdiff::testing::temp_path("empty.bin"), {}, 0),
                  std::invalid_argument);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <fstream>
#include <vector>

#include "covdiff/channel.hpp"
#include "covdiff/rng.hpp"
#include "support/test_util.hpp"

using namespace covdiff;

namespace {

ChannelModelSpec tdl_spec() {
  ChannelModelSpec spec;
  spec.kind = ChannelKind::TdlA;
  return spec;
}

}  // namespace

TEST_CASE("channel spec validation") {
  ChannelModelSpec spec;
  CHECK_NOTHROW(spec.validate());

  spec.fft_size = 1000;  // not a power of two
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.fft_size = 2048;

  spec.subcarrier_spacing_hz = 0.0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.subcarrier_spacing_hz = 30e3;

  spec.kind = ChannelKind::TdlA;
  spec.delay_spread_s = 0.0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("packaged tap profile: 23 taps, normalized linear powers") {
  const TapProfile profile = TapProfile::tdl_a();
  CHECK(profile.tap_count() == 23);
  const std::vector<double> p = profile.linear_powers();
  double sum = 0.0;
  for (double v : p) {
    CHECK(v > 0.0);
    sum += v;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t i = 1; i < profile.normalized_delays.size(); ++i) {
    CHECK(profile.normalized_delays[i] >= profile.normalized_delays[i - 1]);
  }
}

TEST_CASE("tap profile validation rejects malformed tables") {
  TapProfile p;
  p.name = "bad";
  p.normalized_delays = {0.0, 1.0};
  p.powers_db = {0.0};  // length mismatch
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);

  p.powers_db = {0.0, -3.0};
  p.normalized_delays = {1.0, 0.5};  // decreasing
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("tap profile load reports malformed files") {
  const std::string path = covdiff::testing::temp_path("bad_profile.json");
  std::ofstream(path) << "{\"name\": \"x\"}";
  CHECK_THROWS(TapProfile::load(path));
  CHECK_THROWS(TapProfile::load("no_such_file.json"));
}

TEST_CASE("flat rayleigh entries have unit power and are uncorrelated") {
  Rng rng(5);
  double power = 0.0;
  cxd cross(0.0, 0.0);
  const int trials = 100000;
  for (int t = 0; t < trials; ++t) {
    const ChannelRealization h = draw_flat_rayleigh(2, 1, rng);
    power += std::norm(h.coeff.front()(0, 0));
    cross += h.coeff.front()(0, 0) * std::conj(h.coeff.front()(1, 0));
  }
  CHECK(power / trials == doctest::Approx(1.0).epsilon(0.02));
  CHECK(std::abs(cross) / trials < 0.02);
}

TEST_CASE("flat rayleigh is flat and validates stream counts") {
  Rng rng(6);
  const ChannelRealization h = draw_flat_rayleigh(4, 2, rng);
  CHECK(h.flat);
  CHECK(h.coeff.size() == 1);
  CHECK(h.n_rx() == 4);
  CHECK(h.n_streams() == 2);
  // The single stored matrix answers for every subcarrier.
  CHECK(&h.at(0) == &h.at(1234));

  CHECK_THROWS_AS(draw_flat_rayleigh(0, 1, rng), std::invalid_argument);
  CHECK_THROWS_AS(draw_flat_rayleigh(1, 0, rng), std::invalid_argument);
}

TEST_CASE("identical seeds reproduce identical realizations") {
  const ChannelModelSpec spec = tdl_spec();
  const TapProfile profile = TapProfile::tdl_a();
  Rng a(99), b(99);
  const ChannelRealization ha = draw_tdl_a(spec, profile, 3, 2, {0, 5, 9}, a);
  const ChannelRealization hb = draw_tdl_a(spec, profile, 3, 2, {0, 5, 9}, b);
  for (std::size_t s = 0; s < ha.coeff.size(); ++s) {
    CHECK(ha.coeff[s].entries() == hb.coeff[s].entries());
  }

  Rng c(42), d(42);
  CHECK(draw_flat_rayleigh(4, 3, c).coeff.front().entries() ==
        draw_flat_rayleigh(4, 3, d).coeff.front().entries());
}

TEST_CASE("tdl draw: unit mean power per subcarrier") {
  const ChannelModelSpec spec = tdl_spec();
  const TapProfile profile = TapProfile::tdl_a();
  Rng rng(7);
  double p0 = 0.0, p1 = 0.0;
  const int trials = 100000;
  for (int t = 0; t < trials; ++t) {
    const ChannelRealization h = draw_tdl_a(spec, profile, 1, 1, {0, 40}, rng);
    p0 += std::norm(h.at(0)(0, 0));
    p1 += std::norm(h.at(40)(0, 0));
  }
  CHECK(p0 / trials == doctest::Approx(1.0).epsilon(0.02));
  CHECK(p1 / trials == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("tdl draw: repeated subcarrier index gives identical coefficients") {
  const ChannelModelSpec spec = tdl_spec();
  const TapProfile profile = TapProfile::tdl_a();
  Rng rng(8);
  const ChannelRealization h = draw_tdl_a(spec, profile, 2, 2, {12, 12}, rng);
  CHECK(h.coeff[0].entries() == h.coeff[1].entries());
}

TEST_CASE("tdl draw validates the subcarrier list") {
  const ChannelModelSpec spec = tdl_spec();
  const TapProfile profile = TapProfile::tdl_a();
  Rng rng(9);
  CHECK_THROWS_AS(draw_tdl_a(spec, profile, 2, 1, {}, rng), std::invalid_argument);
  CHECK_THROWS_AS(draw_tdl_a(spec, profile, 2, 1, {2048}, rng), std::invalid_argument);
  CHECK_THROWS_AS(draw_tdl_a(spec, profile, 2, 1, {-1}, rng), std::invalid_argument);
}

TEST_CASE("tdl marginal is gaussian: kurtosis of the real part near 3") {
  const ChannelModelSpec spec = tdl_spec();
  const TapProfile profile = TapProfile::tdl_a();
  Rng rng(10);
  double m2 = 0.0, m4 = 0.0;
  const int trials = 100000;
  for (int t = 0; t < trials; ++t) {
    const ChannelRealization h = draw_tdl_a(spec, profile, 1, 1, {17}, rng);
    const double x = h.at(17)(0, 0).real();
    m2 += x * x;
    m4 += x * x * x * x;
  }
  m2 /= trials;
  m4 /= trials;
  const double kurtosis = m4 / (m2 * m2);
  CHECK(kurtosis > 2.9);
  CHECK(kurtosis < 3.1);
}

TEST_CASE("frequency correlation at zero offset is exactly one") {
  Rng rng(11);
  const cxd rho =
      freq_correlation(tdl_spec(), TapProfile::tdl_a(), 0, 2000, rng);
  CHECK(rho.real() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(rho.imag()) < 1e-12);
}

TEST_CASE("frequency correlation requires enough trials") {
  Rng rng(12);
  CHECK_THROWS_AS(freq_correlation(tdl_spec(), TapProfile::tdl_a(), 1, 999, rng),
                  std::invalid_argument);
}

TEST_CASE("monte-carlo correlation tracks the closed form across offsets") {
  const ChannelModelSpec spec = tdl_spec();
  const TapProfile profile = TapProfile::tdl_a();
  Rng rng(13);
  const std::size_t trials = 4000;
  const double tol = 3.0 / std::sqrt(static_cast<double>(trials));
  for (int delta = 0; delta <= 50; delta += 5) {
    const double mc = std::abs(freq_correlation(spec, profile, delta, trials, rng));
    const double closed = std::abs(freq_correlation_closed_form(spec, profile, delta));
    CHECK(std::abs(mc - closed) <= tol);
  }
}

TEST_CASE("closed-form correlation: unit at zero, above 0.99 through offset 6") {
  const ChannelModelSpec spec = tdl_spec();
  const TapProfile profile = TapProfile::tdl_a();
  CHECK(std::abs(freq_correlation_closed_form(spec, profile, 0)) ==
        doctest::Approx(1.0).epsilon(1e-12));
  for (int delta = 0; delta <= 6; ++delta) {
    CHECK(std::abs(freq_correlation_closed_form(spec, profile, delta)) >= 0.99);
  }
}

TEST_CASE("closed-form correlation magnitude decays monotonically early on") {
  const ChannelModelSpec spec = tdl_spec();
  const TapProfile profile = TapProfile::tdl_a();
  double prev = 2.0;
  for (int delta = 0; delta <= 20; ++delta) {
    const double mag = std::abs(freq_correlation_closed_form(spec, profile, delta));
    CHECK(mag <= prev + 1e-12);
    prev = mag;
  }
}

TEST_CASE("coherent span covers a window of at least seven subcarriers") {
  const int span = max_coherent_span(tdl_spec(), TapProfile::tdl_a(), 0.99);
  CHECK(span >= 6);
}

TEST_CASE("coherent span collapses as the threshold approaches one") {
  const int span = max_coherent_span(tdl_spec(), TapProfile::tdl_a(), 0.9999999);
  CHECK(span >= 0);
  CHECK(span <= 1);
}

TEST_CASE("flat channels are coherent across the whole grid") {
  ChannelModelSpec spec;  // FlatRayleigh
  CHECK(max_coherent_span(spec, TapProfile::tdl_a(), 0.5) == spec.fft_size - 1);
  CHECK(max_coherent_span(spec, TapProfile::tdl_a(), 0.999) == spec.fft_size - 1);
}

TEST_CASE("coherent span validates the threshold range") {
  CHECK_THROWS_AS(max_coherent_span(tdl_spec(), TapProfile::tdl_a(), 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(max_coherent_span(tdl_spec(), TapProfile::tdl_a(), 1.0),
                  std::invalid_argument);
}

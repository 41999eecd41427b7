#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "covdiff/rng.hpp"

using namespace covdiff;

TEST_CASE("derive_seed is deterministic and separates streams") {
  CHECK(derive_seed(1, 0) == derive_seed(1, 0));
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));

  // No collisions across a block of streams from one root.
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 10000; ++s) seen.insert(derive_seed(42, s));
  CHECK(seen.size() == 10000);
}

TEST_CASE("identical seeds replay identical draws") {
  Rng a(7), b(7);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.next_u64() == b.next_u64());
    CHECK(a.uniform() == b.uniform());
    CHECK(a.normal() == b.normal());
    CHECK(a.cnormal() == b.cnormal());
  }
  Rng c(8);
  bool any_different = false;
  Rng a2(7);
  for (int i = 0; i < 10; ++i) any_different |= (a2.next_u64() != c.next_u64());
  CHECK(any_different);
}

TEST_CASE("uniform stays in [0,1) and fills the interval") {
  Rng rng(3);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  CHECK(lo < 0.001);
  CHECK(hi > 0.999);
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("uniform_int covers [0,bound) roughly evenly") {
  Rng rng(11);
  std::vector<int> counts(5, 0);
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    const std::uint64_t v = rng.uniform_int(5);
    REQUIRE(v < 5);
    ++counts[static_cast<std::size_t>(v)];
  }
  for (const int c : counts) {
    CHECK(c > n / 5 - 600);  // ~6.7 sigma band for p = 1/5
    CHECK(c < n / 5 + 600);
  }
  // bound 1 always yields zero.
  for (int i = 0; i < 10; ++i) CHECK(rng.uniform_int(1) == 0);
}

TEST_CASE("normal has unit variance and vanishing mean") {
  Rng rng(17);
  const int n = 200000;
  double mean = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    mean += x / n;
    sq += x * x / n;
  }
  CHECK(std::abs(mean) < 0.01);
  CHECK(sq == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("complex normal has unit power split over both components") {
  Rng rng(23);
  const int n = 100000;
  double re_sq = 0.0, im_sq = 0.0, cross = 0.0;
  std::complex<double> mean{0.0, 0.0};
  for (int i = 0; i < n; ++i) {
    const std::complex<double> z = rng.cnormal();
    mean += z / static_cast<double>(n);
    re_sq += z.real() * z.real() / n;
    im_sq += z.imag() * z.imag() / n;
    cross += z.real() * z.imag() / n;
  }
  CHECK(std::abs(mean) < 0.01);
  CHECK(re_sq == doctest::Approx(0.5).epsilon(0.03));
  CHECK(im_sq == doctest::Approx(0.5).epsilon(0.03));
  CHECK(std::abs(cross) < 0.01);  // components uncorrelated
}

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "mslu/errors.hpp"
#include "mslu/rng.hpp"
#include "support.hpp"

using mslu::Rng;
using mslu::Stream;

TEST_CASE("same seed, same stream") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.bits() == b.bits());
  auto s1 = Rng::substream(7, Stream::ChmcW, 3);
  auto s2 = Rng::substream(7, Stream::ChmcW, 3);
  CHECK(s1.normal() == s2.normal());
}

TEST_CASE("substreams differ across block, index and sub") {
  const auto base = Rng::substream(7, Stream::RandomWalkB, 10, 0).bits();
  CHECK(Rng::substream(7, Stream::RandomWalkB, 10, 1).bits() != base);
  CHECK(Rng::substream(7, Stream::RandomWalkB, 11, 0).bits() != base);
  CHECK(Rng::substream(7, Stream::RandomWalkT0, 10, 0).bits() != base);
  CHECK(Rng::substream(8, Stream::RandomWalkB, 10, 0).bits() != base);
}

TEST_CASE("uniform is inside (0, 1) with mean 1/2") {
  Rng r(1);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST_CASE("normal moments") {
  Rng r(2);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    s2 += x * x;
  }
  CHECK(std::abs(s / n) < 4.0 / std::sqrt(n));
  CHECK(std::abs(s2 / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("poisson mean and variance on both sides of the method switch") {
  for (double mean : {0.3, 4.0, 9.99, 10.0, 37.5, 3010.0}) {
    Rng r(static_cast<std::uint64_t>(mean * 100));
    const int n = 100000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double k = static_cast<double>(r.poisson(mean));
      REQUIRE(k >= 0.0);
      s += k;
      s2 += k * k;
    }
    const double m = s / n;
    const double v = s2 / n - m * m;
    CAPTURE(mean);
    CHECK(std::abs(m - mean) < 4.0 * std::sqrt(mean / n));
    CHECK(v / mean == doctest::Approx(1.0).epsilon(0.03));
  }
  Rng r(3);
  CHECK(r.poisson(0.0) == 0);
  CHECK_THROWS_AS(r.poisson(-1.0), mslu::ValidationError);
}

TEST_CASE("poisson small-mean pmf matches the exact distribution") {
  Rng r(4);
  const double mean = 2.5;
  const int n = 200000;
  std::vector<int> hist(20, 0);
  for (int i = 0; i < n; ++i) {
    const auto k = r.poisson(mean);
    if (k < 20) ++hist[static_cast<std::size_t>(k)];
  }
  for (int k = 0; k < 8; ++k) {
    const double p = std::exp(-mean + k * std::log(mean) - std::lgamma(k + 1.0));
    CAPTURE(k);
    CHECK(std::abs(hist[static_cast<std::size_t>(k)] / double(n) - p) < 4.0 * std::sqrt(p * (1 - p) / n));
  }
}

namespace {

double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

}  // namespace

TEST_CASE("truncated normal matches the truncated CDF in every regime") {
  struct Case {
    double mean, sd, lo, hi;
  };
  const double inf = std::numeric_limits<double>::infinity();
  for (const Case c : {Case{0, 1, -inf, inf}, Case{0, 1, 0, inf}, Case{5, 1, 0, inf}, Case{-3, 1, 0, inf},
                       Case{-8, 1, 0, inf}, Case{0, 1, -0.1, 0.2}, Case{0, 1, 2.0, 2.5},
                       Case{0, 1, 3.0, 10.0}, Case{1000, 50, 1, 2500}, Case{0, 1, -2.5, -2.0}}) {
    Rng r(11);
    std::vector<double> xs(40000);
    for (auto& x : xs) {
      x = r.truncated_normal(c.mean, c.sd, c.lo, c.hi);
      REQUIRE(x > c.lo);
      REQUIRE(x < c.hi);
    }
    std::sort(xs.begin(), xs.end());
    const double Flo = phi_cdf((c.lo - c.mean) / c.sd);
    const double Fhi = phi_cdf((c.hi - c.mean) / c.sd);
    // Upper-tail cases lose precision in the CDF difference; use survival
    // functions there.
    const bool upper = (c.lo - c.mean) / c.sd > 0.0;
    auto cdf = [&](double x) {
      const double z = (x - c.mean) / c.sd;
      if (upper) {
        const double Slo = phi_cdf(-(c.lo - c.mean) / c.sd);
        const double Shi = phi_cdf(-(c.hi - c.mean) / c.sd);
        return (Slo - phi_cdf(-z)) / (Slo - Shi);
      }
      return (phi_cdf(z) - Flo) / (Fhi - Flo);
    };
    CAPTURE(c.mean);
    CAPTURE(c.lo);
    CAPTURE(c.hi);
    CHECK(testing::ks_distance(xs, cdf) < 0.012);
  }
}

TEST_CASE("log_normal_mass agrees with direct evaluation and stays finite in the tails") {
  for (auto [a, b] : {std::pair{-1.0, 1.0}, {0.0, 2.0}, {-3.0, -1.0}, {1.0, 4.0}, {2.0, 2.5}}) {
    const double direct = std::log(phi_cdf(b) - phi_cdf(a));
    CHECK(mslu::log_normal_mass(a, b) == doctest::Approx(direct).epsilon(1e-10));
  }
  const double inf = std::numeric_limits<double>::infinity();
  // log Q(40) ~ -800 - log(40 sqrt(2 pi))
  const double asym = -800.0 - std::log(40.0 * std::sqrt(2.0 * std::numbers::pi));
  CHECK(mslu::log_normal_mass(40.0, inf) == doctest::Approx(asym).epsilon(1e-5));
  CHECK(mslu::log_normal_mass(-inf, -40.0) == doctest::Approx(asym).epsilon(1e-5));
  CHECK(std::isfinite(mslu::log_normal_mass(30.0, 30.5)));
  CHECK(mslu::log_normal_mass(1.0, 1.0) == -inf);
}

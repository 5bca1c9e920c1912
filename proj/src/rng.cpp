#include "mslu/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "mslu/errors.hpp"

namespace mslu {

std::uint64_t Rng::mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng Rng::substream(std::uint64_t master, Stream block, std::uint64_t index,
                   std::uint64_t sub) {
  std::uint64_t h = mix(master);
  h = mix(h ^ static_cast<std::uint64_t>(block));
  h = mix(h ^ index);
  h = mix(h ^ sub);
  return Rng(h);
}

double Rng::uniform() {
  // 53 random mantissa bits, shifted off zero.
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  // Marsaglia polar method.
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  have_spare_ = true;
  return u * f;
}

double Rng::exponential() { return -std::log(uniform()); }

std::int64_t Rng::poisson(double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) {
    throw ValidationError("poisson: mean must be finite and >= 0");
  }
  if (mean == 0.0) return 0;
  if (mean < 10.0) {
    const double u = uniform();
    double p = std::exp(-mean);
    double cdf = p;
    std::int64_t k = 0;
    while (u > cdf) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
      if (p <= 0.0 && cdf < u) break;  // round-off guard in the far tail
    }
    return k;
  }
  // Hormann's transformed rejection with squeeze (PTRS).
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double U = uniform() - 0.5;
    const double V = uniform();
    const double us = 0.5 - std::fabs(U);
    const double k = std::floor((2.0 * a / us + b) * U + mean + 0.43);
    if (us >= 0.07 && V <= vr) return static_cast<std::int64_t>(k);
    if (k < 0.0 || (us < 0.013 && V > us)) continue;
    if (std::log(V) + std::log(invalpha) - std::log(a / (us * us) + b) <=
        -mean + k * loglam - std::lgamma(k + 1.0)) {
      return static_cast<std::int64_t>(k);
    }
  }
}

namespace {

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

}  // namespace

double log_normal_mass(double a, double b) {
  if (!(a < b)) return -std::numeric_limits<double>::infinity();
  if (a < 0.0 && b > 0.0) {
    return std::log(0.5 * (std::erf(b / std::numbers::sqrt2) - std::erf(a / std::numbers::sqrt2)));
  }
  if (b <= 0.0) {
    const double t = a;
    a = -b;
    b = -t;
  }
  // Both bounds in the upper tail: difference of survival functions.
  const double sa = 0.5 * std::erfc(a / std::numbers::sqrt2);
  const double sb = std::isinf(b) ? 0.0 : 0.5 * std::erfc(b / std::numbers::sqrt2);
  if (sa > 0.0 && sa - sb > 0.0) return std::log(sa - sb);
  // Far tail: Mills-ratio asymptotics, log phi(a) - log a.
  const double log_phi_a = -0.5 * a * a - 0.5 * std::log(2.0 * std::numbers::pi);
  double log_mass = log_phi_a - std::log(a);
  if (!std::isinf(b)) {
    const double log_phi_b = -0.5 * b * b - 0.5 * std::log(2.0 * std::numbers::pi);
    log_mass += std::log1p(-std::exp(log_phi_b - std::log(b) - log_phi_a + std::log(a)));
  }
  return log_mass;
}

double Rng::standard_truncated(double a, double b) {
  if (a <= 0.0 && b >= 0.0) {
    const double mass = std_normal_cdf(b) - std_normal_cdf(a);
    if (mass >= 0.3) {
      for (;;) {
        const double x = normal();
        if (x > a && x < b) return x;
      }
    }
    // Narrow interval around the mode: uniform proposal, |a|, |b| < 0.85 here.
    for (;;) {
      const double x = a + (b - a) * uniform();
      if (uniform() <= std::exp(-0.5 * x * x)) return x;
    }
  }
  if (b < 0.0) return -standard_truncated(-b, -a);

  // 0 < a < b: one-sided tail (Robert, 1995).
  if (std_normal_cdf(-a) - std_normal_cdf(-b) >= 0.3) {
    for (;;) {
      const double x = normal();
      if (x > a && x < b) return x;
    }
  }
  const double rate = 0.5 * (a + std::sqrt(a * a + 4.0));
  const double uniform_cutoff =
      2.0 * std::sqrt(std::numbers::e) / (a + std::sqrt(a * a + 4.0)) *
      std::exp(0.25 * (a * a - a * std::sqrt(a * a + 4.0)));
  if (b - a <= uniform_cutoff) {
    for (;;) {
      const double x = a + (b - a) * uniform();
      if (uniform() <= std::exp(0.5 * (a * a - x * x))) return x;
    }
  }
  for (;;) {
    const double x = a + exponential() / rate;
    if (x >= b) continue;
    if (uniform() <= std::exp(-0.5 * (x - rate) * (x - rate))) return x;
  }
}

double Rng::truncated_normal(double mean, double sd, double lo, double hi) {
  if (!(sd > 0.0) || !(lo < hi)) {
    throw ValidationError("truncated_normal: need sd > 0 and lo < hi");
  }
  const double x = mean + sd * standard_truncated((lo - mean) / sd, (hi - mean) / sd);
  // Guard against round-off landing exactly on an open bound.
  if (x <= lo) return std::nextafter(lo, hi);
  if (x >= hi) return std::nextafter(hi, lo);
  return x;
}

}  // namespace mslu

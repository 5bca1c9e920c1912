#pragma once

#include <cstdint>
#include <random>

namespace mslu {

/// Identifiers for the independent random streams a computation draws from.
///
/// Streams are derived from a master seed with `Rng::substream(seed, block,
/// index)`. The index is the band for `Simulate`, the iteration for sampler
/// blocks and the run number for benchmark streams. Because every
/// (block, index) pair is an independent generator, blocks can be skipped,
/// reordered or executed concurrently without perturbing any other stream.
enum class Stream : std::uint64_t {
  Simulate = 1,
  ChmcW = 2,        // single-layer areas, and layer 0 of the multi-layer sampler
  RandomWalkT0 = 3,
  RandomWalkB = 4,  // index mixes (iteration, band)
  ChmcLayer = 5,    // layers d >= 1 of the multi-layer sampler
  BenchData = 6,
  BenchChain = 7,
  Synth = 8,
};

/// Seedable 64-bit generator with portable continuous and discrete draws.
///
/// The engine is std::mt19937_64; all distributions are implemented here so
/// that a seed produces the same stream with any standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Generator for stream (block, index, sub) of a master seed. The three
  /// coordinates are folded through SplitMix64 finalizers.
  static Rng substream(std::uint64_t master, Stream block, std::uint64_t index,
                       std::uint64_t sub = 0);
  static std::uint64_t mix(std::uint64_t x);

  std::uint64_t bits() { return engine_(); }
  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  double exponential();
  /// Poisson draw: sequential inversion below mean 10, PTRS above.
  std::int64_t poisson(double mean);
  /// Normal(mean, sd) restricted to (lo, hi); either bound may be infinite.
  double truncated_normal(double mean, double sd, double lo, double hi);

 private:
  double standard_truncated(double a, double b);

  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// log(Phi(b) - Phi(a)) for the standard normal, stable in both tails.
double log_normal_mass(double a, double b);

/// log of the normalizer of Normal(mean, sd) truncated to (lo, hi).
inline double log_truncation_mass(double mean, double sd, double lo, double hi) {
  return log_normal_mass((lo - mean) / sd, (hi - mean) / sd);
}

}  // namespace mslu

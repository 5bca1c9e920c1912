#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "mslu/spectral_library.hpp"

namespace mslu {

/// Instrument impulse-response parameters. Offsets, decays and variance are
/// in bins; beta is the peak amplitude in photons.
struct ImpulseParams {
  double T1 = 402.0;
  double T2 = 12.5;
  double T3 = 239.0;
  double tau1 = 395.0;
  double tau2 = 7.9;
  double tau3 = 1595.0;
  double sigma2 = 105.82;
  double beta = 3000.0;

  void validate() const;

  /// Fit to the measured instrument response (piecewise-exponential model).
  static ImpulseParams fitted_piecewise() { return {}; }
  /// Same instrument, Gaussian approximation (sigma2 = 105.68).
  static ImpulseParams fitted_gaussian() {
    ImpulseParams p;
    p.sigma2 = 105.68;
    return p;
  }
};

enum class PulseShape { Piecewise, Gaussian };

PulseShape parse_shape(const std::string& name);
std::string to_string(PulseShape shape);

/// Four-branch impulse response at bin t for a surface at t0:
///   u < -T1        rising exponential (tau1)
///   -T1 <= u < T2  Gaussian core
///   T2 <= u < T3   first decay (tau2)
///   u >= T3        second decay (tau3)
/// with u = t - t0. Continuous at every breakpoint.
double g_piecewise(double t, double t0, const ImpulseParams& phi);

/// beta * exp(-(t - t0)^2 / (2 sigma2)).
double g_gaussian(double t, double t0, double beta, double sigma2);

/// Dispatch on shape; the Gaussian uses phi.beta and phi.sigma2.
double pulse(PulseShape shape, double t, double t0, const ImpulseParams& phi);

/// Interval [lo, hi] of offsets u = t - t0 where pulse >= cutoff * beta.
/// A non-positive cutoff returns the whole real line.
std::pair<double, double> pulse_support(PulseShape shape, const ImpulseParams& phi, double cutoff);

struct SceneSingle {
  Eigen::VectorXd w;  // R relative areas, >= 0
  double t0 = 1000.0; // target position (bins), in (1, T)
  Eigen::VectorXd b;  // L background levels, >= 0

  void validate(int R, int L, int T) const;
};

struct SceneMulti {
  std::vector<double> layer_positions;  // D strictly increasing positions
  Eigen::MatrixXd W;                    // R x D; column d is layer d's areas
  Eigen::VectorXd b;

  int layers() const { return static_cast<int>(layer_positions.size()); }
  void validate(int R, int L) const;
};

/// Nonnegative integer photon counts, stored as doubles (L x T, bin t at
/// column t - 1).
struct WaveformSet {
  Eigen::MatrixXd Y;
  std::vector<double> band_wavelengths;

  int bands() const { return static_cast<int>(Y.rows()); }
  int bins() const { return static_cast<int>(Y.cols()); }
  void validate() const;
};

/// lambda(l, t) = (M.row(l) . w) g(t) + b(l) for t = 1..T.
Eigen::MatrixXd intensity_single(const SpectralLibrary& lib, const SceneSingle& scene,
                                 const ImpulseParams& phi, int T, PulseShape shape);

/// Sum over layers of single-layer returns sharing one pulse shape, plus b.
Eigen::MatrixXd intensity_multi(const SpectralLibrary& lib, const SceneMulti& scene,
                                const ImpulseParams& phi, int T, PulseShape shape);

/// Independent Poisson counts per bin. Band l draws from
/// Rng::substream(seed, Stream::Simulate, l), so bands simulate in parallel.
WaveformSet simulate(const Eigen::MatrixXd& intensity, std::uint64_t seed);

/// `band,bin,count` CSV with header; band and bin are 1-based.
void write_waveforms_csv(const std::filesystem::path& path, const WaveformSet& ws);
WaveformSet read_waveforms_csv(const std::filesystem::path& path);

/// JSON scene descriptor: {w | W, t0 | layer_positions, b, phi, T, shape, seed}.
/// `W` is a list of per-layer area vectors; `b` may be a scalar, broadcast
/// over bands. Missing phi entries default to the fitted instrument.
struct SceneConfig {
  std::optional<SceneSingle> single;
  std::optional<SceneMulti> multi;
  ImpulseParams phi;
  int T = 2500;
  PulseShape shape = PulseShape::Piecewise;
  std::uint64_t seed = 1;

  bool is_multi() const { return multi.has_value(); }
};

SceneConfig scene_from_json(const nlohmann::json& j, int L);
nlohmann::json scene_to_json(const SceneConfig& scene);
nlohmann::json impulse_to_json(const ImpulseParams& phi);
ImpulseParams impulse_from_json(const nlohmann::json& j, ImpulseParams defaults = {});

}  // namespace mslu

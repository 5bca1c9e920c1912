#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "mslu/crlb.hpp"
#include "mslu/forward_model.hpp"
#include "mslu/posterior.hpp"
#include "mslu/samplers.hpp"
#include "mslu/spectral_library.hpp"

namespace mslu {

/// Sequential estimator: position from the band-summed matched filter, then a
/// per-band Poisson fit of (amplitude, background) at that position, then
/// areas by nonnegative least squares on the amplitudes.
ParameterVector baseline_sequential(const Eigen::MatrixXd& Y, const SpectralLibrary& lib,
                                    const ImpulseParams& phi, PulseShape shape = PulseShape::Piecewise);

/// Continuous argmax over (1, T) of sum_t s_t g(t; tau) for the band-summed
/// counts s.
double matched_filter_position(const Eigen::MatrixXd& Y, const ImpulseParams& phi, PulseShape shape);

/// Poisson maximum-likelihood (A, b) >= 0 for counts y ~ Poisson(A g + b),
/// by coordinate ascent with safeguarded 1-D Newton steps.
std::pair<double, double> fit_amplitude_background(const Eigen::VectorXd& y, const Eigen::VectorXd& g,
                                                   double rel_tol = 1e-8, int max_iterations = 2000);

enum class Estimator { Bayes, Baseline };
std::string to_string(Estimator e);
Estimator parse_estimator(const std::string& name);

struct BenchConfig {
  SpectralLibrary lib;
  ImpulseParams phi;
  PulseShape shape = PulseShape::Piecewise;
  int T = 2500;
  std::optional<SceneSingle> single;
  std::optional<SceneMulti> multi;
  int n_runs = 100;
  ChainConfig chain;
  Hyperparams hyper;
  std::uint64_t seed = 1;
  std::vector<Estimator> estimators{Estimator::Bayes, Estimator::Baseline};
  double crlb_sigma2 = 105.68;  // Gaussian approximation used for the bound
  bool keep_runs = false;

  void validate() const;
};

struct EstimatorResult {
  Estimator estimator = Estimator::Bayes;
  Eigen::VectorXd mse;
  Eigen::VectorXd bias;         // mean of (estimate - truth)
  Eigen::VectorXd rel_err_pct;  // 100 sqrt(mse) / |truth|
  int failures = 0;
  std::vector<std::string> failure_messages;
  Eigen::MatrixXd estimates;  // n_runs x P when keep_runs, NaN rows for failed runs
};

struct BenchReport {
  std::vector<std::string> names;
  Eigen::VectorXd truth;
  std::optional<CrlbReport> crlb;  // single-layer scenarios
  std::vector<EstimatorResult> results;
  int n_runs = 0;
  std::uint64_t seed = 0;

  const EstimatorResult* find(Estimator e) const;
};

/// Seeds of run i: data from Stream::BenchData, chain from Stream::BenchChain,
/// both indexed by i, so results do not depend on scheduling.
std::uint64_t run_data_seed(std::uint64_t base, int run);
std::uint64_t run_chain_seed(std::uint64_t base, int run);

/// Parameter vector of a scenario in report order: single layer (w, b, t0)
/// as in the Fisher matrix; multi-layer (w of layer 1, ..., w of layer D, b).
Eigen::VectorXd flatten_truth(const BenchConfig& cfg);
std::vector<std::string> bench_parameter_names(const BenchConfig& cfg);

/// Monte-Carlo MSE of the configured estimators over cfg.n_runs simulated
/// waveform sets. A run whose estimator throws is excluded and counted.
BenchReport mse_monte_carlo(const BenchConfig& cfg);

/// Same harness with caller-supplied estimators returning a parameter
/// vector in report order.
using EstimatorFn = std::function<Eigen::VectorXd(const Eigen::MatrixXd& Y, int run)>;
BenchReport mse_monte_carlo(const BenchConfig& cfg,
                            const std::vector<std::pair<Estimator, EstimatorFn>>& estimators);

/// Writes `<path>` as CSV and the same path with extension .json.
void emit_report(const BenchReport& report, const std::filesystem::path& csv_path);
nlohmann::json bench_report_to_json(const BenchReport& report);
BenchReport bench_report_from_json(const nlohmann::json& j);

}  // namespace mslu

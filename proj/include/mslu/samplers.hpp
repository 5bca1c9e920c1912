#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "mslu/forward_model.hpp"
#include "mslu/kernels.hpp"
#include "mslu/posterior.hpp"
#include "mslu/rng.hpp"
#include "mslu/spectral_library.hpp"

// HMC-within-Gibbs samplers for the single-layer and multi-layer models.
//
// Random-number substreams, per Gibbs iteration i:
//   layer-0 areas     Stream::ChmcW,        index i
//   layer-d areas     Stream::ChmcLayer,    index i, sub d   (d >= 1)
//   position          Stream::RandomWalkT0, index i
//   background of l   Stream::RandomWalkB,  index i, sub l
// so any iteration can be replayed from its starting state alone.

namespace mslu {

struct ChmcConfig {
  int leapfrog_min = 10;
  int leapfrog_max = 50;
  double step_size = 0.0;  // 0 picks a step from the curvature at the initial state
  double adapt_target = 0.65;
};

struct RandomWalkConfig {
  double init_stddev_t0 = 1.0;  // bins
  double init_stddev_b = 1.0;   // photons
  double adapt_target = 0.45;
};

struct ChainConfig {
  int n_mc = 8000;
  int n_bi = 4000;
  std::uint64_t seed = 1;
  ChmcConfig chmc;
  RandomWalkConfig rw;
  int adapt_window = 25;      // burn-in iterations between scale updates
  double ci_level = 0.95;
  bool update_t0 = true;      // single layer only
  PulseShape shape = PulseShape::Piecewise;
  double pulse_cutoff = kDefaultPulseCutoff;

  void validate() const;
};

/// Markov-chain state: areas (R x D), surface positions, backgrounds.
struct ChainState {
  Eigen::MatrixXd W;
  std::vector<double> positions;
  Eigen::VectorXd b;
};

/// Proposal scales of every block.
struct ChainScales {
  std::vector<double> step_w;  // per layer
  double scale_t0 = 1.0;
  Eigen::VectorXd scale_b;
};

struct ParameterSummary {
  std::string name;
  double mmse = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

struct ChainOutput {
  std::vector<std::string> material_names;
  std::vector<double> layer_positions;     // fixed positions (multi-layer); empty otherwise
  std::vector<Eigen::MatrixXd> samples_w;  // one (n_mc - n_bi) x R matrix per layer
  Eigen::VectorXd samples_t0;              // empty for multi-layer chains
  Eigen::MatrixXd samples_b;               // (n_mc - n_bi) x L

  // Post-burn-in acceptance fractions.
  std::vector<double> accept_w;
  double accept_t0 = 0.0;
  Eigen::VectorXd accept_b;
  int nonfinite_rejections = 0;
  ChainScales scales;  // frozen values used after burn-in

  Eigen::MatrixXd mmse_w;  // R x D
  double mmse_t0 = 0.0;
  Eigen::VectorXd mmse_b;
  double ci_level = 0.95;
  std::vector<ParameterSummary> summary;  // w, then t0 (single layer), then b

  /// Single-layer estimate as a parameter vector (layer 0 areas).
  ParameterVector mmse() const;
};

/// Result of one constrained-HMC transition.
struct ChmcStep {
  Eigen::VectorXd w;
  bool accepted = false;
  bool nonfinite = false;
  double accept_prob = 0.0;  // min(1, exp(-dH)), 0 when non-finite
};

/// Accept with probability min(1, exp(log_ratio)). Always draws one uniform.
bool metropolis_accept(double log_ratio, Rng& rng);

/// One leapfrog trajectory of `leapfrog_steps` steps from w (w >= 0) with a
/// fresh N(0, I) momentum. Coordinates that cross zero are reflected and
/// their momentum negated.
ChmcStep chmc_transition(const AreaConditional& cond, const Eigen::VectorXd& w, double step_size,
                         int leapfrog_steps, Rng& rng);

/// CHMC update of layer d's areas. Draws the leapfrog count from `cfg`.
ChmcStep chmc_update_w(LayeredModel& model, int d, const Hyperparams& hyper, const ChmcConfig& cfg,
                       double step_size, Rng& rng);

struct RandomWalkStep {
  double value = 0.0;
  bool accepted = false;
  double accept_prob = 0.0;
};

/// Log Metropolis-Hastings ratio of moving a single-layer position from
/// `current` to `proposal` under a Gaussian proposal of width `scale`
/// truncated to (1, T).
double t0_log_ratio(const LayeredModel& model, double current, double proposal, double scale);

/// Random-walk update of the (single-layer) surface position.
RandomWalkStep rw_update_t0(LayeredModel& model, double scale, Rng& rng);

/// Log MH ratio for band l's background under a proposal truncated to (0, inf).
double b_log_ratio(const LayeredModel& model, int l, double current, double proposal, double scale,
                   double gamma2);

/// Independent random-walk updates of every background level. Band l draws
/// from Rng::substream(seed, Stream::RandomWalkB, iteration, l).
std::vector<RandomWalkStep> rw_update_b(LayeredModel& model, const Eigen::VectorXd& scales,
                                        double gamma2, std::uint64_t seed, std::uint64_t iteration);

/// scale * exp(gain * (rate - target)), clamped to [1e-8, 1e8]. The samplers
/// use gain 1/sqrt(k) at the k-th adaptation so the scales settle.
double adapt_step(double rate, double scale, double target, double gain = 1.0);

/// Starting state: backgrounds from per-band medians, areas from a
/// nonnegative least-squares fit of background-subtracted peak counts. An
/// empty `positions` picks the single surface at the argmax of the
/// band-summed counts.
ChainState initial_state(const Eigen::MatrixXd& Y, const SpectralLibrary& lib, const ImpulseParams& phi,
                         PulseShape shape, std::vector<double> positions = {});

/// Gibbs sampler driving the block updates. One sweep per call to `sweep`.
class GibbsSampler {
 public:
  GibbsSampler(const Eigen::MatrixXd& Y, const SpectralLibrary& lib, const ImpulseParams& phi,
               const Hyperparams& hyper, const ChainConfig& cfg, const ChainState& start,
               bool update_position);

  /// Runs Gibbs iteration `iteration` (0-based). Scales adapt while
  /// iteration < n_bi.
  void sweep(int iteration);

  ChainState state() const;
  const ChainScales& scales() const { return scales_; }
  void set_scales(const ChainScales& scales) { scales_ = scales; }

  // Acceptance counts since the last reset_counters().
  const std::vector<long>& accepted_w() const { return accepted_w_; }
  long accepted_t0() const { return accepted_t0_; }
  const std::vector<long>& accepted_b() const { return accepted_b_; }
  long counted_iterations() const { return counted_; }
  int nonfinite_rejections() const { return nonfinite_; }
  void reset_counters();

 private:
  void adapt();

  PoissonKernel kernel_;
  LayeredModel model_;
  Hyperparams hyper_;
  ChainConfig cfg_;
  bool update_position_;
  ChainScales scales_;

  std::vector<double> window_prob_w_;
  double window_prob_t0_ = 0.0;
  Eigen::VectorXd window_prob_b_;
  int window_count_ = 0;
  int adaptations_ = 0;

  std::vector<long> accepted_w_;
  long accepted_t0_ = 0;
  std::vector<long> accepted_b_;
  long counted_ = 0;
  int nonfinite_ = 0;
};

/// Single-layer chain (areas, position, backgrounds). `start` overrides the
/// default initialization.
ChainOutput run_single_layer(const Eigen::MatrixXd& Y, const SpectralLibrary& lib, const ImpulseParams& phi,
                             const Hyperparams& hyper, const ChainConfig& cfg,
                             const ChainState* start = nullptr);

/// Multi-layer chain with known, strictly increasing surface positions.
ChainOutput run_multi_layer(const Eigen::MatrixXd& Y, const SpectralLibrary& lib, const ImpulseParams& phi,
                            const std::vector<double>& layer_positions, const Hyperparams& hyper,
                            const ChainConfig& cfg);

/// Column means of an n x p sample matrix.
Eigen::VectorXd mmse_estimate(const Eigen::MatrixXd& samples);

/// Central interval per column between the (1 - level)/2 and (1 + level)/2
/// quantiles. Quantiles interpolate linearly between order statistics at
/// position (n - 1) p.
std::pair<Eigen::VectorXd, Eigen::VectorXd> credible_interval(const Eigen::MatrixXd& samples, double level);

double quantile(std::vector<double> values, double p);

nlohmann::json chain_summary_json(const ChainOutput& out);
void write_samples_csv(const std::filesystem::path& path, const ChainOutput& out);

}  // namespace mslu

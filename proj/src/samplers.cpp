#include "mslu/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "mslu/errors.hpp"
#include "mslu/nnls.hpp"

namespace mslu {

namespace {

double accept_probability(double log_ratio) {
  if (std::isnan(log_ratio)) return 0.0;
  return log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
}

// Log MH ratio from two log targets, treating -inf consistently.
double log_ratio_of(double target_proposal, double target_current) {
  if (target_proposal == kNegInf) return kNegInf;
  if (target_current == kNegInf) return kPosInf;
  return target_proposal - target_current;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<long>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<long>(mid));
    m = 0.5 * (m + lower);
  }
  return m;
}

void check_support(const ChainOutput& out, int T) {
  for (const auto& s : out.samples_w) {
    if ((s.array() < 0.0).any()) throw NumericalError("chain produced a negative area sample");
  }
  if ((out.samples_b.array() < 0.0).any()) throw NumericalError("chain produced a negative background sample");
  for (Eigen::Index i = 0; i < out.samples_t0.size(); ++i) {
    const double t = out.samples_t0(i);
    if (!(t > 1.0 && t < T)) throw NumericalError("chain produced a position outside (1, T)");
  }
}

ChainOutput run_chain(const Eigen::MatrixXd& Y, const SpectralLibrary& lib, const ImpulseParams& phi,
                      const Hyperparams& hyper, const ChainConfig& cfg, const ChainState& start,
                      bool single) {
  const bool update_position = single && cfg.update_t0;
  GibbsSampler sampler(Y, lib, phi, hyper, cfg, start, update_position);
  const int D = static_cast<int>(start.positions.size());
  const int R = lib.materials();
  const int L = lib.bands();
  const int n_keep = cfg.n_mc - cfg.n_bi;

  ChainOutput out;
  out.material_names = lib.material_names;
  if (!single) out.layer_positions = start.positions;
  out.samples_w.assign(static_cast<std::size_t>(D), Eigen::MatrixXd(n_keep, R));
  if (single) out.samples_t0.resize(n_keep);
  out.samples_b.resize(n_keep, L);

  for (int it = 0; it < cfg.n_mc; ++it) {
    if (it == cfg.n_bi) sampler.reset_counters();
    sampler.sweep(it);
    if (it < cfg.n_bi) continue;
    const int row = it - cfg.n_bi;
    const ChainState s = sampler.state();
    for (int d = 0; d < D; ++d) out.samples_w[static_cast<std::size_t>(d)].row(row) = s.W.col(d).transpose();
    if (single) out.samples_t0(row) = s.positions[0];
    out.samples_b.row(row) = s.b.transpose();
  }
  check_support(out, static_cast<int>(Y.cols()));

  const double n = static_cast<double>(sampler.counted_iterations());
  for (int d = 0; d < D; ++d) out.accept_w.push_back(sampler.accepted_w()[static_cast<std::size_t>(d)] / n);
  out.accept_t0 = update_position ? sampler.accepted_t0() / n : 0.0;
  out.accept_b.resize(L);
  for (int l = 0; l < L; ++l) out.accept_b(l) = sampler.accepted_b()[static_cast<std::size_t>(l)] / n;
  out.nonfinite_rejections = sampler.nonfinite_rejections();
  out.scales = sampler.scales();

  out.ci_level = cfg.ci_level;
  out.mmse_w.resize(R, D);
  for (int d = 0; d < D; ++d) {
    const auto& s = out.samples_w[static_cast<std::size_t>(d)];
    const Eigen::VectorXd mean = mmse_estimate(s);
    const auto [lo, hi] = credible_interval(s, cfg.ci_level);
    out.mmse_w.col(d) = mean;
    for (int r = 0; r < R; ++r) {
      const std::string name = single ? "w_" + lib.material_names[static_cast<std::size_t>(r)]
                                      : "w" + std::to_string(d + 1) + "_" +
                                            lib.material_names[static_cast<std::size_t>(r)];
      out.summary.push_back({name, mean(r), lo(r), hi(r)});
    }
  }
  if (single) {
    const Eigen::MatrixXd t0 = out.samples_t0;
    const auto [lo, hi] = credible_interval(t0, cfg.ci_level);
    out.mmse_t0 = mmse_estimate(t0)(0);
    out.summary.push_back({"t0", out.mmse_t0, lo(0), hi(0)});
  }
  out.mmse_b = mmse_estimate(out.samples_b);
  const auto [blo, bhi] = credible_interval(out.samples_b, cfg.ci_level);
  for (int l = 0; l < L; ++l) out.summary.push_back({"b_" + std::to_string(l + 1), out.mmse_b(l), blo(l), bhi(l)});
  return out;
}

}  // namespace

void ChainConfig::validate() const {
  if (n_mc < 1 || n_bi < 0 || n_bi >= n_mc) throw ValidationError("chain: need 0 <= n_bi < n_mc");
  if (chmc.leapfrog_min < 1 || chmc.leapfrog_max < chmc.leapfrog_min) {
    throw ValidationError("chain: leapfrog step range must satisfy 1 <= min <= max");
  }
  if (!(chmc.step_size >= 0.0) || !std::isfinite(chmc.step_size)) {
    throw ValidationError("chain: CHMC step size must be > 0 (or 0 for automatic)");
  }
  if (!(rw.init_stddev_t0 > 0.0) || !(rw.init_stddev_b > 0.0)) {
    throw ValidationError("chain: random-walk scales must be > 0");
  }
  for (double target : {chmc.adapt_target, rw.adapt_target}) {
    if (!(target > 0.0 && target < 1.0)) throw ValidationError("chain: adaptation targets must lie in (0, 1)");
  }
  if (adapt_window < 1) throw ValidationError("chain: adapt_window must be >= 1");
  if (!(ci_level > 0.0 && ci_level < 1.0)) throw ValidationError("chain: ci_level must lie in (0, 1)");
}

ParameterVector ChainOutput::mmse() const {
  ParameterVector theta;
  theta.w = mmse_w.col(0);
  theta.t0 = mmse_t0;
  theta.b = mmse_b;
  return theta;
}

bool metropolis_accept(double log_ratio, Rng& rng) {
  const double u = rng.uniform();
  if (std::isnan(log_ratio)) return false;
  return std::log(u) < log_ratio;
}

ChmcStep chmc_transition(const AreaConditional& cond, const Eigen::VectorXd& w, double step_size,
                         int leapfrog_steps, Rng& rng) {
  const Eigen::Index R = w.size();
  ChmcStep out;
  out.w = w;
  Eigen::VectorXd p(R);
  for (Eigen::Index r = 0; r < R; ++r) p(r) = rng.normal();

  const double U0 = cond.potential(w);
  if (!std::isfinite(U0)) {
    out.nonfinite = true;
    return out;
  }
  const double H0 = U0 + 0.5 * p.squaredNorm();

  Eigen::VectorXd q = w;
  Eigen::VectorXd grad(R);
  cond.gradient(q, grad);
  p -= 0.5 * step_size * grad;
  for (int i = 0; i < leapfrog_steps; ++i) {
    q += step_size * p;
    for (Eigen::Index r = 0; r < R; ++r) {
      if (q(r) < 0.0) {
        q(r) = -q(r);
        p(r) = -p(r);
      }
    }
    cond.gradient(q, grad);
    if (!grad.allFinite()) {
      out.nonfinite = true;
      return out;
    }
    p -= (i + 1 < leapfrog_steps ? 1.0 : 0.5) * step_size * grad;
  }

  const double U1 = cond.potential(q);
  const double H1 = U1 + 0.5 * p.squaredNorm();
  if (!std::isfinite(H1)) {
    out.nonfinite = true;
    return out;
  }
  const double log_ratio = H0 - H1;
  out.accept_prob = accept_probability(log_ratio);
  out.accepted = metropolis_accept(log_ratio, rng);
  if (out.accepted) out.w = q;
  return out;
}

ChmcStep chmc_update_w(LayeredModel& model, int d, const Hyperparams& hyper, const ChmcConfig& cfg,
                       double step_size, Rng& rng) {
  const int span = cfg.leapfrog_max - cfg.leapfrog_min + 1;
  const int steps = cfg.leapfrog_min + static_cast<int>(rng.bits() % static_cast<std::uint64_t>(span));
  const AreaConditional cond = model.area_conditional(d, hyper.alpha2);
  ChmcStep step = chmc_transition(cond, model.areas().col(d), step_size, steps, rng);
  if (step.accepted) model.set_areas(d, step.w);
  return step;
}

double t0_log_ratio(const LayeredModel& model, double current, double proposal, double scale) {
  const double T = model.kernel().bins();
  if (!(proposal > 1.0 && proposal < T)) return kNegInf;
  const double ratio = log_ratio_of(model.position_log_likelihood(proposal), model.position_log_likelihood(current));
  if (!std::isfinite(ratio)) return ratio;
  return ratio + log_truncation_mass(current, scale, 1.0, T) - log_truncation_mass(proposal, scale, 1.0, T);
}

RandomWalkStep rw_update_t0(LayeredModel& model, double scale, Rng& rng) {
  const double T = model.kernel().bins();
  const double current = model.position(0);
  const double proposal = rng.truncated_normal(current, scale, 1.0, T);
  const double log_ratio = t0_log_ratio(model, current, proposal, scale);
  RandomWalkStep step;
  step.accept_prob = accept_probability(log_ratio);
  step.accepted = metropolis_accept(log_ratio, rng);
  step.value = step.accepted ? proposal : current;
  if (step.accepted) model.set_position(0, proposal);
  return step;
}

double b_log_ratio(const LayeredModel& model, int l, double current, double proposal, double scale,
                   double gamma2) {
  if (!(proposal >= 0.0)) return kNegInf;
  const double ratio = log_ratio_of(model.band_log_likelihood(l, proposal), model.band_log_likelihood(l, current));
  if (!std::isfinite(ratio)) return ratio;
  const double prior = -(proposal * proposal - current * current) / (2.0 * gamma2);
  return ratio + prior + log_truncation_mass(current, scale, 0.0, kPosInf) -
         log_truncation_mass(proposal, scale, 0.0, kPosInf);
}

std::vector<RandomWalkStep> rw_update_b(LayeredModel& model, const Eigen::VectorXd& scales, double gamma2,
                                        std::uint64_t seed, std::uint64_t iteration) {
  const int L = model.kernel().bands();
  std::vector<RandomWalkStep> steps(static_cast<std::size_t>(L));
  const LayeredModel& view = model;
#pragma omp parallel for schedule(static)
  for (int l = 0; l < L; ++l) {
    Rng rng = Rng::substream(seed, Stream::RandomWalkB, iteration, static_cast<std::uint64_t>(l));
    const double current = view.background()(l);
    const double proposal = rng.truncated_normal(current, scales(l), 0.0, kPosInf);
    const double log_ratio = b_log_ratio(view, l, current, proposal, scales(l), gamma2);
    auto& step = steps[static_cast<std::size_t>(l)];
    step.accept_prob = accept_probability(log_ratio);
    step.accepted = metropolis_accept(log_ratio, rng);
    step.value = step.accepted ? proposal : current;
  }
  for (int l = 0; l < L; ++l) model.set_background(l, steps[static_cast<std::size_t>(l)].value);
  return steps;
}

double adapt_step(double rate, double scale, double target, double gain) {
  return std::clamp(scale * std::exp(gain * (rate - target)), 1e-8, 1e8);
}

ChainState initial_state(const Eigen::MatrixXd& Y, const SpectralLibrary& lib, const ImpulseParams& phi,
                         PulseShape shape, std::vector<double> positions) {
  const int L = static_cast<int>(Y.rows());
  const int T = static_cast<int>(Y.cols());
  if (L != lib.bands()) throw ValidationError("initialization: Y rows differ from library bands");
  if (T < 3) throw ValidationError("initialization: need at least 3 bins");

  if (positions.empty()) {
    Eigen::Index peak = 0;
    Y.colwise().sum().maxCoeff(&peak);
    positions.push_back(std::clamp(static_cast<double>(peak) + 1.0, 1.5, T - 0.5));
  }

  ChainState s;
  s.positions = positions;
  s.b.resize(L);
  for (int l = 0; l < L; ++l) {
    std::vector<double> row(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) row[static_cast<std::size_t>(t)] = Y(l, t);
    double level = median(row);
    // A zero median with photons elsewhere would start outside the support.
    if (level == 0.0) level = Y.row(l).mean();
    s.b(l) = level;
  }

  const int D = static_cast<int>(positions.size());
  s.W.resize(lib.materials(), D);
  for (int d = 0; d < D; ++d) {
    const double p = positions[static_cast<std::size_t>(d)];
    const int centre = static_cast<int>(std::lround(p));
    Eigen::VectorXd amplitude = Eigen::VectorXd::Zero(L);
    double g_sum = 0.0;
    for (int t = std::max(1, centre - 5); t <= std::min(T, centre + 5); ++t) {
      const double g = pulse(shape, t, p, phi);
      g_sum += g;
      amplitude += Y.col(t - 1) - s.b;
    }
    if (g_sum > 0.0) amplitude /= g_sum;
    Eigen::VectorXd w = nnls(lib.M, amplitude);
    s.W.col(d) = w.cwiseMax(1e-3);
  }
  return s;
}

GibbsSampler::GibbsSampler(const Eigen::MatrixXd& Y, const SpectralLibrary& lib, const ImpulseParams& phi,
                           const Hyperparams& hyper, const ChainConfig& cfg, const ChainState& start,
                           bool update_position)
    : kernel_(Y, lib, cfg.shape, phi, cfg.pulse_cutoff),
      model_(kernel_, start.positions, start.W, start.b),
      hyper_(hyper),
      cfg_(cfg),
      update_position_(update_position) {
  cfg.validate();
  hyper.validate();
  const int D = model_.layers();
  const int L = kernel_.bands();
  if (update_position_ && D != 1) throw ValidationError("position updates need a single layer");
  if ((start.W.array() < 0.0).any() || (start.b.array() < 0.0).any()) {
    throw ValidationError("initial state outside the support");
  }
  if (model_.log_likelihood() == kNegInf) {
    throw NumericalError("non-finite posterior at the initial state");
  }

  for (int d = 0; d < D; ++d) {
    double step = cfg.chmc.step_size;
    if (step == 0.0) {
      const Eigen::VectorXd curv = model_.area_conditional(d, hyper.alpha2).curvature_diagonal(start.W.col(d));
      step = 0.25 / std::sqrt(curv.maxCoeff());
    }
    scales_.step_w.push_back(step);
  }
  scales_.scale_t0 = cfg.rw.init_stddev_t0;
  scales_.scale_b = Eigen::VectorXd::Constant(L, cfg.rw.init_stddev_b);

  window_prob_w_.assign(static_cast<std::size_t>(D), 0.0);
  window_prob_b_ = Eigen::VectorXd::Zero(L);
  reset_counters();
}

void GibbsSampler::reset_counters() {
  accepted_w_.assign(static_cast<std::size_t>(model_.layers()), 0);
  accepted_t0_ = 0;
  accepted_b_.assign(static_cast<std::size_t>(kernel_.bands()), 0);
  counted_ = 0;
}

ChainState GibbsSampler::state() const {
  ChainState s;
  s.W = model_.areas();
  s.b = model_.background();
  for (int d = 0; d < model_.layers(); ++d) s.positions.push_back(model_.position(d));
  return s;
}

void GibbsSampler::sweep(int iteration) {
  const bool burn_in = iteration < cfg_.n_bi;
  const auto it = static_cast<std::uint64_t>(iteration);

  for (int d = 0; d < model_.layers(); ++d) {
    Rng rng = d == 0 ? Rng::substream(cfg_.seed, Stream::ChmcW, it)
                     : Rng::substream(cfg_.seed, Stream::ChmcLayer, it, static_cast<std::uint64_t>(d));
    const ChmcStep step =
        chmc_update_w(model_, d, hyper_, cfg_.chmc, scales_.step_w[static_cast<std::size_t>(d)], rng);
    if (step.nonfinite) ++nonfinite_;
    window_prob_w_[static_cast<std::size_t>(d)] += step.accept_prob;
    if (step.accepted) ++accepted_w_[static_cast<std::size_t>(d)];
  }

  if (update_position_) {
    Rng rng = Rng::substream(cfg_.seed, Stream::RandomWalkT0, it);
    const RandomWalkStep step = rw_update_t0(model_, scales_.scale_t0, rng);
    window_prob_t0_ += step.accept_prob;
    if (step.accepted) ++accepted_t0_;
  }

  const auto steps = rw_update_b(model_, scales_.scale_b, hyper_.gamma2, cfg_.seed, it);
  for (std::size_t l = 0; l < steps.size(); ++l) {
    window_prob_b_(static_cast<Eigen::Index>(l)) += steps[l].accept_prob;
    if (steps[l].accepted) ++accepted_b_[l];
  }

  ++counted_;
  if (burn_in && ++window_count_ == cfg_.adapt_window) adapt();
}

void GibbsSampler::adapt() {
  const double n = window_count_;
  const double gain = 1.0 / std::sqrt(++adaptations_);
  for (std::size_t d = 0; d < scales_.step_w.size(); ++d) {
    scales_.step_w[d] = adapt_step(window_prob_w_[d] / n, scales_.step_w[d], cfg_.chmc.adapt_target, gain);
    window_prob_w_[d] = 0.0;
  }
  if (update_position_) scales_.scale_t0 = adapt_step(window_prob_t0_ / n, scales_.scale_t0, cfg_.rw.adapt_target, gain);
  window_prob_t0_ = 0.0;
  for (Eigen::Index l = 0; l < scales_.scale_b.size(); ++l) {
    scales_.scale_b(l) = adapt_step(window_prob_b_(l) / n, scales_.scale_b(l), cfg_.rw.adapt_target, gain);
  }
  window_prob_b_.setZero();
  window_count_ = 0;
}

ChainOutput run_single_layer(const Eigen::MatrixXd& Y, const SpectralLibrary& lib, const ImpulseParams& phi,
                             const Hyperparams& hyper, const ChainConfig& cfg, const ChainState* start) {
  cfg.validate();
  lib.validate();
  const ChainState s = start ? *start : initial_state(Y, lib, phi, cfg.shape);
  if (s.positions.size() != 1) throw ValidationError("single-layer chain needs exactly one position");
  return run_chain(Y, lib, phi, hyper, cfg, s, true);
}

ChainOutput run_multi_layer(const Eigen::MatrixXd& Y, const SpectralLibrary& lib, const ImpulseParams& phi,
                            const std::vector<double>& layer_positions, const Hyperparams& hyper,
                            const ChainConfig& cfg) {
  cfg.validate();
  lib.validate();
  if (layer_positions.empty()) throw ValidationError("multi-layer chain needs at least one layer position");
  for (std::size_t d = 0; d < layer_positions.size(); ++d) {
    const double p = layer_positions[d];
    if (!(p > 1.0 && p < static_cast<double>(Y.cols()))) {
      throw ValidationError("layer position " + std::to_string(p) + " outside (1, T)");
    }
    if (d > 0 && !(p > layer_positions[d - 1])) {
      throw ValidationError("layer positions must be strictly increasing");
    }
  }
  const ChainState s = initial_state(Y, lib, phi, cfg.shape, layer_positions);
  return run_chain(Y, lib, phi, hyper, cfg, s, false);
}

Eigen::VectorXd mmse_estimate(const Eigen::MatrixXd& samples) {
  if (samples.rows() == 0) throw ValidationError("mmse_estimate: empty sample set");
  return samples.colwise().mean().transpose();
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw ValidationError("quantile: empty sample set");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - std::floor(h)) * (values[hi] - values[lo]);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> credible_interval(const Eigen::MatrixXd& samples, double level) {
  if (samples.rows() == 0) throw ValidationError("credible_interval: empty sample set");
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("credible_interval: level must lie in (0, 1)");
  Eigen::VectorXd lo(samples.cols()), hi(samples.cols());
  for (Eigen::Index c = 0; c < samples.cols(); ++c) {
    std::vector<double> col(samples.col(c).data(), samples.col(c).data() + samples.rows());
    lo(c) = quantile(col, 0.5 * (1.0 - level));
    hi(c) = quantile(col, 0.5 * (1.0 + level));
  }
  return {lo, hi};
}

nlohmann::json chain_summary_json(const ChainOutput& out) {
  nlohmann::json j;
  j["ci_level"] = out.ci_level;
  j["material_names"] = out.material_names;
  if (!out.layer_positions.empty()) j["layer_positions"] = out.layer_positions;
  j["n_samples"] = out.samples_b.rows();
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : out.summary) {
    j["mmse"][p.name] = p.mmse;
    j["ci"][p.name] = {p.ci_lo, p.ci_hi};
    params.push_back({{"name", p.name}, {"mmse", p.mmse}, {"ci_lo", p.ci_lo}, {"ci_hi", p.ci_hi}});
  }
  j["parameters"] = params;
  j["acceptance"]["w"] = out.accept_w;
  if (out.samples_t0.size() > 0) j["acceptance"]["t0"] = out.accept_t0;
  j["acceptance"]["b"] = std::vector<double>(out.accept_b.data(), out.accept_b.data() + out.accept_b.size());
  j["nonfinite_rejections"] = out.nonfinite_rejections;
  j["scales"]["step_w"] = out.scales.step_w;
  if (out.samples_t0.size() > 0) j["scales"]["t0"] = out.scales.scale_t0;
  j["scales"]["b"] =
      std::vector<double>(out.scales.scale_b.data(), out.scales.scale_b.data() + out.scales.scale_b.size());
  return j;
}

void write_samples_csv(const std::filesystem::path& path, const ChainOutput& out) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write samples file " + path.string());
  const bool single = out.layer_positions.empty();
  f << "iteration";
  for (std::size_t d = 0; d < out.samples_w.size(); ++d) {
    for (const auto& name : out.material_names) {
      f << ",w" << (single ? "" : std::to_string(d + 1)) << "_" << name;
    }
  }
  if (out.samples_t0.size() > 0) f << ",t0";
  for (Eigen::Index l = 0; l < out.samples_b.cols(); ++l) f << ",b_" << l + 1;
  f << "\n";
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, ",%.17g", v);
    f << buf;
  };
  for (Eigen::Index i = 0; i < out.samples_b.rows(); ++i) {
    f << i + 1;
    for (const auto& s : out.samples_w) {
      for (Eigen::Index r = 0; r < s.cols(); ++r) put(s(i, r));
    }
    if (out.samples_t0.size() > 0) put(out.samples_t0(i));
    for (Eigen::Index l = 0; l < out.samples_b.cols(); ++l) put(out.samples_b(i, l));
    f << "\n";
  }
  if (!f) throw IoError("failed writing samples file " + path.string());
}

}  // namespace mslu

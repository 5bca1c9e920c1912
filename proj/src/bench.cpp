#include "mslu/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "mslu/errors.hpp"
#include "mslu/kernels.hpp"
#include "mslu/nnls.hpp"
#include "mslu/rng.hpp"

namespace mslu {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double correlation_at(const Eigen::RowVectorXd& s, double tau, const ImpulseParams& phi, PulseShape shape,
                      double lo, double hi) {
  const int T = static_cast<int>(s.size());
  const int first = std::max(1, static_cast<int>(std::ceil(tau + lo)));
  const int last = std::min(T, static_cast<int>(std::floor(tau + hi)));
  double c = 0.0;
  for (int t = first; t <= last; ++t) c += s(t - 1) * pulse(shape, t, tau, phi);
  return c;
}

// One projected Newton step toward the root of a decreasing function h.
double newton_step(double x, double h, double dh) {
  if (!(dh < 0.0)) return h < 0.0 ? 0.5 * x : x;
  const double next = x - h / dh;
  return next > 0.0 ? next : 0.5 * x;
}

nlohmann::json vec_json(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    a.push_back(std::isfinite(v(i)) ? nlohmann::json(v(i)) : nlohmann::json(nullptr));
  }
  return a;
}

Eigen::VectorXd json_vec(const nlohmann::json& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = a[i].is_null() ? kNaN : a[i].get<double>();
  }
  return v;
}

std::string csv_number(double v) {
  if (!std::isfinite(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

double matched_filter_position(const Eigen::MatrixXd& Y, const ImpulseParams& phi, PulseShape shape) {
  const int T = static_cast<int>(Y.cols());
  if (T < 3) throw ValidationError("matched filter: need at least 3 bins");
  const Eigen::RowVectorXd s = Y.colwise().sum();
  if (!(s.maxCoeff() > 0.0)) throw NumericalError("matched filter: waveform has no photons, no peak to locate");
  const auto [lo, hi] = pulse_support(shape, phi, kDefaultPulseCutoff);

  // Integer scan with a shift-invariant kernel, then golden-section refinement.
  const int k_lo = static_cast<int>(std::ceil(lo));
  const int k_hi = static_cast<int>(std::floor(hi));
  std::vector<double> h;
  for (int k = k_lo; k <= k_hi; ++k) h.push_back(pulse(shape, 1000.0 + k, 1000.0, phi));
  int best_tau = 2;
  double best = -1.0;
  for (int tau = 2; tau <= T - 1; ++tau) {
    double c = 0.0;
    const int k0 = std::max(k_lo, 1 - tau);
    const int k1 = std::min(k_hi, T - tau);
    for (int k = k0; k <= k1; ++k) c += s(tau + k - 1) * h[static_cast<std::size_t>(k - k_lo)];
    if (c > best) {
      best = c;
      best_tau = tau;
    }
  }

  const double eps = 1e-9;
  double a = std::max(1.0 + eps, best_tau - 1.0);
  double b = std::min(T - eps, best_tau + 1.0);
  const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - ratio * (b - a);
  double x2 = a + ratio * (b - a);
  double f1 = correlation_at(s, x1, phi, shape, lo, hi);
  double f2 = correlation_at(s, x2, phi, shape, lo, hi);
  while (b - a > 1e-7) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + ratio * (b - a);
      f2 = correlation_at(s, x2, phi, shape, lo, hi);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - ratio * (b - a);
      f1 = correlation_at(s, x1, phi, shape, lo, hi);
    }
  }
  return 0.5 * (a + b);
}

std::pair<double, double> fit_amplitude_background(const Eigen::VectorXd& y, const Eigen::VectorXd& g,
                                                   double rel_tol, int max_iterations) {
  if (y.size() != g.size() || y.size() == 0) throw ValidationError("amplitude fit: size mismatch");
  const double G = g.sum();
  const double T = static_cast<double>(y.size());
  const double g_max = g.maxCoeff();

  double b = std::max(y.mean(), 1e-6);
  double peak_counts = 0.0, peak_g = 0.0;
  for (Eigen::Index t = 0; t < y.size(); ++t) {
    if (g(t) >= 0.5 * g_max) {
      peak_counts += y(t) - b;
      peak_g += g(t);
    }
  }
  double A = peak_g > 0.0 ? std::max(peak_counts / peak_g, 1e-6) : 1e-6;

  for (int it = 0; it < max_iterations; ++it) {
    double h = -G, dh = 0.0;
    for (Eigen::Index t = 0; t < y.size(); ++t) {
      if (y(t) == 0.0) continue;
      const double lambda = A * g(t) + b;
      h += y(t) * g(t) / lambda;
      dh -= y(t) * g(t) * g(t) / (lambda * lambda);
    }
    const double A_next = newton_step(A, h, dh);

    h = -T;
    dh = 0.0;
    for (Eigen::Index t = 0; t < y.size(); ++t) {
      if (y(t) == 0.0) continue;
      const double lambda = A_next * g(t) + b;
      h += y(t) / lambda;
      dh -= y(t) / (lambda * lambda);
    }
    const double b_next = newton_step(b, h, dh);

    const bool done = std::abs(A_next - A) <= rel_tol * std::max(A_next, 1e-12) &&
                      std::abs(b_next - b) <= rel_tol * std::max(b_next, 1e-12);
    A = A_next;
    b = b_next;
    if (done) break;
  }
  return {A, b};
}

ParameterVector baseline_sequential(const Eigen::MatrixXd& Y, const SpectralLibrary& lib, const ImpulseParams& phi,
                                    PulseShape shape) {
  if (Y.rows() != lib.bands()) throw ValidationError("baseline: Y rows differ from library bands");
  const int T = static_cast<int>(Y.cols());
  const int L = static_cast<int>(Y.rows());
  ParameterVector est;
  est.t0 = matched_filter_position(Y, phi, shape);

  Eigen::VectorXd g(T);
  for (int t = 0; t < T; ++t) g(t) = pulse(shape, t + 1.0, est.t0, phi);
  Eigen::VectorXd amplitude(L);
  est.b.resize(L);
  for (int l = 0; l < L; ++l) {
    const auto [A, b] = fit_amplitude_background(Y.row(l).transpose(), g);
    amplitude(l) = A;
    est.b(l) = b;
  }
  est.w = nnls(lib.M, amplitude);
  return est;
}

std::string to_string(Estimator e) { return e == Estimator::Bayes ? "bayes" : "baseline"; }

Estimator parse_estimator(const std::string& name) {
  if (name == "bayes") return Estimator::Bayes;
  if (name == "baseline") return Estimator::Baseline;
  throw ValidationError("unknown estimator '" + name + "' (expected bayes or baseline)");
}

void BenchConfig::validate() const {
  lib.validate();
  phi.validate();
  if (n_runs < 1) throw ValidationError("bench: n_runs must be >= 1");
  if (single.has_value() == multi.has_value()) {
    throw ValidationError("bench: exactly one of a single-layer or multi-layer scene is required");
  }
  if (single) single->validate(lib.materials(), lib.bands(), T);
  if (multi) {
    multi->validate(lib.materials(), lib.bands());
    for (Estimator e : estimators) {
      if (e == Estimator::Baseline) throw ValidationError("bench: the baseline handles single-layer scenes only");
    }
  }
  chain.validate();
  hyper.validate();
}

const EstimatorResult* BenchReport::find(Estimator e) const {
  for (const auto& r : results) {
    if (r.estimator == e) return &r;
  }
  return nullptr;
}

std::uint64_t run_data_seed(std::uint64_t base, int run) {
  return Rng::substream(base, Stream::BenchData, static_cast<std::uint64_t>(run)).bits();
}

std::uint64_t run_chain_seed(std::uint64_t base, int run) {
  return Rng::substream(base, Stream::BenchChain, static_cast<std::uint64_t>(run)).bits();
}

Eigen::VectorXd flatten_truth(const BenchConfig& cfg) {
  if (cfg.single) {
    Eigen::VectorXd v(cfg.single->w.size() + cfg.single->b.size() + 1);
    v << cfg.single->w, cfg.single->b, cfg.single->t0;
    return v;
  }
  const auto& m = *cfg.multi;
  Eigen::VectorXd v(m.W.size() + m.b.size());
  v << Eigen::Map<const Eigen::VectorXd>(m.W.data(), m.W.size()), m.b;
  return v;
}

std::vector<std::string> bench_parameter_names(const BenchConfig& cfg) {
  if (cfg.single) return parameter_names(cfg.lib);
  std::vector<std::string> names;
  for (int d = 0; d < cfg.multi->layers(); ++d) {
    for (const auto& n : cfg.lib.material_names) names.push_back("w" + std::to_string(d + 1) + "_" + n);
  }
  for (int l = 0; l < cfg.lib.bands(); ++l) names.push_back("b_" + std::to_string(l + 1));
  return names;
}

BenchReport mse_monte_carlo(const BenchConfig& cfg) {
  cfg.validate();
  std::vector<std::pair<Estimator, EstimatorFn>> fns;
  for (Estimator e : cfg.estimators) {
    if (e == Estimator::Bayes) {
      fns.emplace_back(e, [&cfg](const Eigen::MatrixXd& Y, int run) -> Eigen::VectorXd {
        ChainConfig chain = cfg.chain;
        chain.seed = run_chain_seed(cfg.seed, run);
        chain.shape = cfg.shape;
        if (cfg.single) {
          const ChainOutput out = run_single_layer(Y, cfg.lib, cfg.phi, cfg.hyper, chain);
          Eigen::VectorXd v(out.mmse_w.rows() + out.mmse_b.size() + 1);
          v << out.mmse_w.col(0), out.mmse_b, out.mmse_t0;
          return v;
        }
        const ChainOutput out = run_multi_layer(Y, cfg.lib, cfg.phi, cfg.multi->layer_positions, cfg.hyper, chain);
        Eigen::VectorXd v(out.mmse_w.size() + out.mmse_b.size());
        v << Eigen::Map<const Eigen::VectorXd>(out.mmse_w.data(), out.mmse_w.size()), out.mmse_b;
        return v;
      });
    } else {
      fns.emplace_back(e, [&cfg](const Eigen::MatrixXd& Y, int) -> Eigen::VectorXd {
        const ParameterVector est = baseline_sequential(Y, cfg.lib, cfg.phi, cfg.shape);
        Eigen::VectorXd v(est.w.size() + est.b.size() + 1);
        v << est.w, est.b, est.t0;
        return v;
      });
    }
  }
  return mse_monte_carlo(cfg, fns);
}

BenchReport mse_monte_carlo(const BenchConfig& cfg,
                            const std::vector<std::pair<Estimator, EstimatorFn>>& estimators) {
  if (cfg.n_runs < 1) throw ValidationError("bench: n_runs must be >= 1");
  BenchReport rep;
  rep.names = bench_parameter_names(cfg);
  rep.truth = flatten_truth(cfg);
  rep.n_runs = cfg.n_runs;
  rep.seed = cfg.seed;
  const auto P = rep.truth.size();

  if (cfg.single) {
    try {
      ParameterVector theta{cfg.single->w, cfg.single->b, cfg.single->t0};
      const Eigen::MatrixXd J = fisher_matrix(cfg.lib, theta, cfg.phi.beta, cfg.crlb_sigma2, cfg.T);
      rep.crlb = crlb_from_fisher(J, rep.truth, rep.names);
    } catch (const NumericalError&) {
      rep.crlb.reset();
    }
  }

  const Eigen::MatrixXd intensity = cfg.single ? intensity_single(cfg.lib, *cfg.single, cfg.phi, cfg.T, cfg.shape)
                                               : intensity_multi(cfg.lib, *cfg.multi, cfg.phi, cfg.T, cfg.shape);
  const std::size_t E = estimators.size();
  std::vector<Eigen::MatrixXd> estimates(E, Eigen::MatrixXd::Constant(cfg.n_runs, P, kNaN));
  std::vector<std::vector<std::string>> errors(E, std::vector<std::string>(static_cast<std::size_t>(cfg.n_runs)));

#pragma omp parallel for schedule(dynamic)
  for (int run = 0; run < cfg.n_runs; ++run) {
    const WaveformSet data = simulate(intensity, run_data_seed(cfg.seed, run));
    for (std::size_t e = 0; e < E; ++e) {
      try {
        const Eigen::VectorXd v = estimators[e].second(data.Y, run);
        if (v.size() != P) throw ValidationError("estimator returned a vector of the wrong length");
        if (!v.allFinite()) throw NumericalError("estimator returned a non-finite value");
        estimates[e].row(run) = v.transpose();
      } catch (const std::exception& ex) {
        errors[e][static_cast<std::size_t>(run)] = ex.what();
        if (errors[e][static_cast<std::size_t>(run)].empty()) errors[e][static_cast<std::size_t>(run)] = "failed";
      }
    }
  }

  for (std::size_t e = 0; e < E; ++e) {
    EstimatorResult res;
    res.estimator = estimators[e].first;
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(P);
    Eigen::VectorXd diff = Eigen::VectorXd::Zero(P);
    int ok = 0;
    for (int run = 0; run < cfg.n_runs; ++run) {
      const std::string& msg = errors[e][static_cast<std::size_t>(run)];
      if (!msg.empty()) {
        ++res.failures;
        res.failure_messages.push_back("run " + std::to_string(run) + ": " + msg);
        continue;
      }
      const Eigen::VectorXd d = estimates[e].row(run).transpose() - rep.truth;
      sq += d.cwiseAbs2();
      diff += d;
      ++ok;
    }
    res.mse = ok ? Eigen::VectorXd(sq / ok) : Eigen::VectorXd::Constant(P, kNaN);
    res.bias = ok ? Eigen::VectorXd(diff / ok) : Eigen::VectorXd::Constant(P, kNaN);
    res.rel_err_pct.resize(P);
    for (Eigen::Index i = 0; i < P; ++i) {
      res.rel_err_pct(i) = rep.truth(i) == 0.0 ? kNaN : 100.0 * std::sqrt(res.mse(i)) / std::abs(rep.truth(i));
    }
    if (cfg.keep_runs) res.estimates = estimates[e];
    rep.results.push_back(std::move(res));
  }
  return rep;
}

void emit_report(const BenchReport& report, const std::filesystem::path& csv_path) {
  std::ofstream f(csv_path);
  if (!f) throw IoError("cannot write bench report " + csv_path.string());
  f << "param,truth,crlb,mse_bayes,mse_baseline,rel_err_bayes_pct,rel_err_baseline_pct\n";
  const EstimatorResult* bayes = report.find(Estimator::Bayes);
  const EstimatorResult* baseline = report.find(Estimator::Baseline);
  if (bayes || baseline) {
    for (std::size_t i = 0; i < report.names.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      f << report.names[i] << "," << csv_number(report.truth(k)) << ","
        << (report.crlb ? csv_number(report.crlb->variances(k)) : "") << ","
        << (bayes ? csv_number(bayes->mse(k)) : "") << "," << (baseline ? csv_number(baseline->mse(k)) : "") << ","
        << (bayes ? csv_number(bayes->rel_err_pct(k)) : "") << ","
        << (baseline ? csv_number(baseline->rel_err_pct(k)) : "") << "\n";
    }
  }
  if (!f) throw IoError("failed writing bench report " + csv_path.string());

  std::filesystem::path json_path = csv_path;
  json_path.replace_extension(".json");
  std::ofstream j(json_path);
  if (!j) throw IoError("cannot write bench report " + json_path.string());
  j << bench_report_to_json(report).dump(2) << "\n";
  if (!j) throw IoError("failed writing bench report " + json_path.string());
}

nlohmann::json bench_report_to_json(const BenchReport& report) {
  nlohmann::json j;
  j["n_runs"] = report.n_runs;
  j["seed"] = report.seed;
  j["parameters"] = report.names;
  j["truth"] = vec_json(report.truth);
  j["crlb"] = report.crlb ? crlb_to_json(*report.crlb) : nlohmann::json(nullptr);
  j["results"] = nlohmann::json::array();
  for (const auto& r : report.results) {
    nlohmann::json e;
    e["estimator"] = to_string(r.estimator);
    e["mse"] = vec_json(r.mse);
    e["bias"] = vec_json(r.bias);
    e["rel_err_pct"] = vec_json(r.rel_err_pct);
    e["failures"] = r.failures;
    e["failure_messages"] = r.failure_messages;
    if (r.estimates.size() > 0) {
      e["estimates"] = nlohmann::json::array();
      for (Eigen::Index run = 0; run < r.estimates.rows(); ++run) {
        e["estimates"].push_back(vec_json(r.estimates.row(run).transpose()));
      }
    }
    j["results"].push_back(e);
  }
  return j;
}

BenchReport bench_report_from_json(const nlohmann::json& j) {
  BenchReport rep;
  try {
    rep.n_runs = j.at("n_runs").get<int>();
    rep.seed = j.at("seed").get<std::uint64_t>();
    rep.names = j.at("parameters").get<std::vector<std::string>>();
    rep.truth = json_vec(j.at("truth"));
    if (!j.at("crlb").is_null()) rep.crlb = crlb_from_json(j.at("crlb"));
    for (const auto& e : j.at("results")) {
      EstimatorResult r;
      r.estimator = parse_estimator(e.at("estimator").get<std::string>());
      r.mse = json_vec(e.at("mse"));
      r.bias = json_vec(e.at("bias"));
      r.rel_err_pct = json_vec(e.at("rel_err_pct"));
      r.failures = e.at("failures").get<int>();
      r.failure_messages = e.at("failure_messages").get<std::vector<std::string>>();
      if (e.contains("estimates")) {
        const auto& rows = e.at("estimates");
        r.estimates.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rep.names.size()));
        for (std::size_t run = 0; run < rows.size(); ++run) {
          r.estimates.row(static_cast<Eigen::Index>(run)) = json_vec(rows[run]).transpose();
        }
      }
      rep.results.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bench report JSON: ") + e.what());
  }
  return rep;
}

}  // namespace mslu

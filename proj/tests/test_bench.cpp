#include <algorithm>
#include <cmath>
#include <omp.h>

#include "doctest.h"
#include "mslu/bench.hpp"
#include "mslu/errors.hpp"
#include "mslu/rng.hpp"
#include "support.hpp"

using namespace mslu;

namespace {

BenchConfig small_config(int n_runs) {
  BenchConfig cfg;
  cfg.lib = testing::fixture_library(4);
  cfg.T = 600;
  cfg.single = SceneSingle{Eigen::Vector3d(0.2, 0.3, 0.4), 300.0, Eigen::VectorXd::Constant(4, 10.0)};
  cfg.n_runs = n_runs;
  cfg.seed = 77;
  cfg.chain.n_mc = 400;
  cfg.chain.n_bi = 200;
  return cfg;
}

Eigen::VectorXd gaussian_g(int T, double t0, double beta, double s2) {
  Eigen::VectorXd g(T);
  for (int t = 0; t < T; ++t) g(t) = beta * std::exp(-std::pow(t + 1.0 - t0, 2) / (2 * s2));
  return g;
}

}  // namespace

TEST_CASE("an estimator that returns the truth has zero error") {
  BenchConfig cfg = small_config(8);
  const Eigen::VectorXd truth = flatten_truth(cfg);
  const auto rep = mse_monte_carlo(cfg, {{Estimator::Bayes, [&](const Eigen::MatrixXd&, int) { return truth; }}});
  REQUIRE(rep.results.size() == 1);
  const auto& r = rep.results[0];
  CHECK(r.failures == 0);
  CHECK(r.mse.cwiseAbs().maxCoeff() == 0.0);
  CHECK(r.bias.cwiseAbs().maxCoeff() == 0.0);
  CHECK(r.rel_err_pct.cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(rep.crlb.has_value());
  CHECK(rep.crlb->variances.size() == truth.size());
  CHECK(rep.names.front() == "w_" + cfg.lib.material_names.front());
  CHECK(rep.names.back() == "t0");
}

TEST_CASE("MSE, bias and relative error of a known offset sequence") {
  BenchConfig cfg = small_config(10);
  const Eigen::VectorXd truth = flatten_truth(cfg);
  // Run i is off by (i - 3) in every coordinate.
  const auto rep = mse_monte_carlo(
      cfg, {{Estimator::Baseline, [&](const Eigen::MatrixXd&, int run) {
               return Eigen::VectorXd(truth.array() + (run - 3.0));
             }}});
  double sq = 0.0, sum = 0.0;
  for (int i = 0; i < 10; ++i) {
    sq += (i - 3.0) * (i - 3.0);
    sum += i - 3.0;
  }
  const auto& r = rep.results[0];
  for (Eigen::Index k = 0; k < truth.size(); ++k) {
    CHECK(r.mse(k) == doctest::Approx(sq / 10).epsilon(1e-12));
    CHECK(r.bias(k) == doctest::Approx(sum / 10).epsilon(1e-12));
    CHECK(r.rel_err_pct(k) == doctest::Approx(100 * std::sqrt(sq / 10) / truth(k)).epsilon(1e-12));
  }
}

TEST_CASE("failed runs are excluded and counted") {
  BenchConfig cfg = small_config(6);
  const Eigen::VectorXd truth = flatten_truth(cfg);
  const auto rep = mse_monte_carlo(cfg, {{Estimator::Bayes, [&](const Eigen::MatrixXd&, int run) -> Eigen::VectorXd {
                                          if (run % 2) throw NumericalError("odd run");
                                          return Eigen::VectorXd(truth.array() + 2.0);
                                        }}});
  const auto& r = rep.results[0];
  CHECK(r.failures == 3);
  REQUIRE(r.failure_messages.size() == 3);
  CHECK(r.failure_messages[0] == "run 1: odd run");
  CHECK(r.mse.minCoeff() == doctest::Approx(4.0));
  CHECK(r.mse.maxCoeff() == doctest::Approx(4.0));

  const auto wrong_size = mse_monte_carlo(
      cfg, {{Estimator::Bayes, [](const Eigen::MatrixXd&, int) { return Eigen::VectorXd::Zero(2).eval(); }}});
  CHECK(wrong_size.results[0].failures == 6);
  CHECK(std::isnan(wrong_size.results[0].mse(0)));
}

TEST_CASE("Poisson amplitude/background fit recovers noiseless parameters") {
  for (const auto& [A, b] : {std::pair{0.7, 3.0}, std::pair{2.5, 0.4}, std::pair{0.05, 12.0}}) {
    const Eigen::VectorXd g = gaussian_g(300, 140.3, 200.0, 30.0);
    const Eigen::VectorXd y = (A * g).array() + b;
    const auto [Ah, bh] = fit_amplitude_background(y, g);
    CHECK(Ah == doctest::Approx(A).epsilon(1e-6));
    CHECK(bh == doctest::Approx(b).epsilon(1e-6));
  }
  CHECK_THROWS_AS(fit_amplitude_background(Eigen::VectorXd::Ones(3), Eigen::VectorXd::Ones(4)), ValidationError);
}

TEST_CASE("Poisson amplitude/background fit is the likelihood maximum") {
  Rng rng(5);
  const Eigen::VectorXd g = gaussian_g(200, 90.0, 50.0, 20.0);
  Eigen::VectorXd y(200);
  for (int t = 0; t < 200; ++t) y(t) = static_cast<double>(rng.poisson(0.8 * g(t) + 4.0));
  const auto [A, b] = fit_amplitude_background(y, g);
  auto ll = [&](double a, double c) {
    double s = 0.0;
    for (int t = 0; t < 200; ++t) s += y(t) * std::log(a * g(t) + c) - (a * g(t) + c);
    return s;
  };
  const double best = ll(A, b);
  for (double da : {-1e-3, 0.0, 1e-3}) {
    for (double db : {-1e-2, 0.0, 1e-2}) CHECK(ll(A + da, b + db) <= best + 1e-9);
  }
}

TEST_CASE("matched filter locates noiseless returns") {
  const auto lib = testing::fixture_library(4);
  for (auto shape : {PulseShape::Gaussian, PulseShape::Piecewise}) {
    for (double t0 : {250.0, 431.37, 800.8}) {
      const SceneSingle scene{Eigen::Vector3d(0.2, 0.3, 0.4), t0, Eigen::VectorXd::Constant(4, 5.0)};
      const auto lam = intensity_single(lib, scene, ImpulseParams{}, 1200, shape);
      CHECK(std::abs(matched_filter_position(lam, ImpulseParams{}, shape) - t0) <= 0.5);
    }
  }
  CHECK_THROWS_AS(matched_filter_position(Eigen::MatrixXd::Zero(4, 100), ImpulseParams{}, PulseShape::Piecewise),
                  NumericalError);
}

TEST_CASE("baseline is exact on noiseless Gaussian returns without background") {
  const auto lib = testing::fixture_library(8);
  const ImpulseParams phi = ImpulseParams::fitted_gaussian();
  const SceneSingle scene{Eigen::Vector3d(0.2, 0.3, 0.4), 700.0, Eigen::VectorXd::Zero(8)};
  const auto lam = intensity_single(lib, scene, phi, 1500, PulseShape::Gaussian);
  const ParameterVector est = baseline_sequential(lam, lib, phi, PulseShape::Gaussian);
  CHECK(est.t0 == doctest::Approx(700.0).epsilon(1e-6));
  for (int r = 0; r < 3; ++r) CHECK(est.w(r) == doctest::Approx(scene.w(r)).epsilon(1e-6));
  CHECK(est.b.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("baseline on simulated data is close to the truth") {
  const auto lib = testing::fixture_library(32);
  const SceneSingle scene{Eigen::Vector3d(0.2, 0.3, 0.4), 1000.0, Eigen::VectorXd::Constant(32, 10.0)};
  const auto lam = intensity_single(lib, scene, ImpulseParams{}, 2500, PulseShape::Piecewise);
  const auto est = baseline_sequential(simulate(lam, 3).Y, lib, ImpulseParams{});
  CHECK(std::abs(est.t0 - 1000.0) < 1.0);
  CHECK((est.w - scene.w).cwiseAbs().maxCoeff() < 0.1);
  CHECK((est.b.array() - 10.0).abs().maxCoeff() < 2.0);
  CHECK_THROWS_AS(baseline_sequential(Eigen::MatrixXd::Zero(32, 2500), lib, ImpulseParams{}), NumericalError);
  CHECK_THROWS_AS(baseline_sequential(Eigen::MatrixXd::Zero(5, 2500), lib, ImpulseParams{}), ValidationError);
}

TEST_CASE("bench results do not depend on thread count or the number of runs") {
  BenchConfig cfg = small_config(6);
  cfg.keep_runs = true;
  omp_set_num_threads(1);
  const auto serial = mse_monte_carlo(cfg);
  omp_set_num_threads(4);
  const auto parallel = mse_monte_carlo(cfg);
  cfg.n_runs = 3;
  const auto shorter = mse_monte_carlo(cfg);
  for (std::size_t e = 0; e < 2; ++e) {
    CHECK(serial.results[e].failures == 0);
    CHECK(serial.results[e].estimates == parallel.results[e].estimates);
    CHECK(serial.results[e].mse == parallel.results[e].mse);
    CHECK(shorter.results[e].estimates == serial.results[e].estimates.topRows(3));
  }
  CHECK(serial.find(Estimator::Bayes) != nullptr);
  CHECK(run_data_seed(77, 0) != run_data_seed(77, 1));
  CHECK(run_data_seed(77, 0) != run_chain_seed(77, 0));
}

TEST_CASE("bench configuration validation") {
  BenchConfig cfg = small_config(0);
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.n_runs = 2;
  cfg.single.reset();
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.multi = SceneMulti{{100.0, 300.0}, Eigen::MatrixXd::Constant(3, 2, 0.1), Eigen::VectorXd::Constant(4, 1.0)};
  CHECK_THROWS_AS(cfg.validate(), ValidationError);  // baseline is single-layer only
  cfg.estimators = {Estimator::Bayes};
  CHECK_NOTHROW(cfg.validate());
  CHECK(bench_parameter_names(cfg).size() == 10);
  CHECK(bench_parameter_names(cfg)[3] == "w2_" + cfg.lib.material_names[0]);
  CHECK(parse_estimator("baseline") == Estimator::Baseline);
  CHECK_THROWS_AS(parse_estimator("mle"), ValidationError);
}

TEST_CASE("bench report CSV and JSON") {
  BenchConfig cfg = small_config(4);
  cfg.keep_runs = true;
  const auto rep = mse_monte_carlo(cfg);
  const auto dir = testing::scratch_dir("bench_report");
  emit_report(rep, dir / "report.csv");
  const std::string csv = testing::slurp(dir / "report.csv");
  const std::string header = "param,truth,crlb,mse_bayes,mse_baseline,rel_err_bayes_pct,rel_err_baseline_pct\n";
  CHECK(csv.rfind(header, 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + static_cast<long>(rep.names.size()));
  CHECK(csv.find("\nt0,300,") != std::string::npos);

  const auto back = bench_report_from_json(nlohmann::json::parse(testing::slurp(dir / "report.json")));
  CHECK(back.names == rep.names);
  CHECK(back.n_runs == 4);
  CHECK(back.seed == 77);
  REQUIRE(back.results.size() == 2);
  for (std::size_t e = 0; e < 2; ++e) {
    CHECK(back.results[e].estimator == rep.results[e].estimator);
    CHECK((back.results[e].mse - rep.results[e].mse).cwiseAbs().maxCoeff() <= 1e-12 * rep.results[e].mse.maxCoeff());
    CHECK(back.results[e].estimates.rows() == 4);
  }
  REQUIRE(back.crlb.has_value());
  CHECK(back.crlb->variances.isApprox(rep.crlb->variances, 1e-12));

  BenchReport empty;
  emit_report(empty, dir / "empty.csv");
  CHECK(testing::slurp(dir / "empty.csv") == header);
  CHECK_THROWS_AS(emit_report(rep, dir / "missing" / "r.csv"), IoError);
}

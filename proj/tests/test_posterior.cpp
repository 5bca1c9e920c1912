#include <cmath>

#include "doctest.h"
#include "mslu/posterior.hpp"
#include "small_instance.hpp"
#include "support.hpp"

using namespace mslu;

namespace {

SpectralLibrary one_by_one(double m) {
  SpectralLibrary lib;
  lib.band_wavelengths = {550.0};
  lib.material_names = {"a"};
  lib.M = Eigen::MatrixXd::Constant(1, 1, m);
  return lib;
}

// Term-by-term likelihood in long double.
long double brute_log_likelihood(const testing::SmallInstance& s, const ParameterVector& th, PulseShape shape) {
  long double total = 0.0L;
  for (int l = 0; l < s.Y.rows(); ++l) {
    long double a = 0.0L;
    for (int r = 0; r < s.lib.materials(); ++r) a += static_cast<long double>(s.lib.M(l, r)) * th.w(r);
    for (int t = 1; t <= s.Y.cols(); ++t) {
      const long double lam = a * pulse(shape, t, th.t0, s.phi) + th.b(l);
      const long double y = s.Y(l, t - 1);
      total += y * std::log(lam) - lam - std::lgamma(y + 1.0L);
    }
  }
  return total;
}

}  // namespace

TEST_CASE("log-likelihood closed forms") {
  SUBCASE("zero counts, constant intensity") {
    auto lib = testing::fixture_library(4);
    Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(4, 60);
    ParameterVector th{Eigen::Vector3d::Zero(), Eigen::VectorXd::Constant(4, 2.5), 30.0};
    CHECK(log_likelihood(Y, lib, th, ImpulseParams{}, PulseShape::Piecewise) == doctest::Approx(-4 * 60 * 2.5));
  }
  SUBCASE("single bin, y = 2, lambda = 1") {
    auto lib = one_by_one(0.5);
    Eigen::MatrixXd Y = Eigen::MatrixXd::Constant(1, 1, 2.0);
    ParameterVector th{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 1.0), 0.5};
    CHECK(log_likelihood(Y, lib, th, ImpulseParams{}, PulseShape::Piecewise) ==
          doctest::Approx(-1.0 - std::log(2.0)).epsilon(1e-14));
    CHECK(-1.0 - std::log(2.0) == doctest::Approx(-1.6931).epsilon(1e-4));
  }
  SUBCASE("zero intensity under a count is the -inf sentinel") {
    auto lib = one_by_one(0.5);
    Eigen::MatrixXd Y = Eigen::MatrixXd::Constant(1, 3, 1.0);
    ParameterVector th{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1), 2.0};
    CHECK(log_likelihood(Y, lib, th, ImpulseParams{}, PulseShape::Piecewise) == kNegInf);
    Y.setZero();
    CHECK(log_likelihood(Y, lib, th, ImpulseParams{}, PulseShape::Piecewise) == 0.0);
  }
}

TEST_CASE("log-likelihood matches brute-force summation") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    auto s = testing::random_instance(rng, 2, 2, 10);
    for (auto shape : {PulseShape::Piecewise, PulseShape::Gaussian}) {
      const double fast = log_likelihood(s.Y, s.lib, s.theta, s.phi, shape);
      const long double slow = brute_log_likelihood(s, s.theta, shape);
      CHECK(fast == doctest::Approx(static_cast<double>(slow)).epsilon(1e-12));
    }
  }
}

TEST_CASE("priors") {
  CHECK(log_prior_w(Eigen::Vector2d::Zero(), 1e6) == 0.0);
  CHECK(log_prior_w(Eigen::Vector2d(1.0, 2.0), 1e6) == doctest::Approx(-2.5e-6).epsilon(1e-14));
  CHECK(log_prior_w(Eigen::Vector2d(1.0, -1e-300), 1e6) == kNegInf);
  CHECK(log_prior_b(Eigen::Vector3d(3, 0, 4), 2.0) == doctest::Approx(-25.0 / 4.0));
  CHECK(log_prior_b(Eigen::Vector2d(-1, 0), 2.0) == kNegInf);
  CHECK(log_prior_t0(1.5, 10) == 0.0);
  CHECK(log_prior_t0(1.0, 10) == kNegInf);
  CHECK(log_prior_t0(10.0, 10) == kNegInf);

  // Ratios of exponentiated log priors equal ratios of the densities.
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    Eigen::Vector3d a(rng.uniform(), 2 * rng.uniform(), rng.uniform());
    Eigen::Vector3d b(rng.uniform(), rng.uniform(), 3 * rng.uniform());
    const double alpha2 = 0.5 + rng.uniform();
    auto density = [&](const Eigen::Vector3d& w) {
      double d = 1.0;
      for (int r = 0; r < 3; ++r) d *= std::exp(-w(r) * w(r) / (2 * alpha2));
      return d;
    };
    CHECK(std::exp(log_prior_w(a, alpha2) - log_prior_w(b, alpha2)) ==
          doctest::Approx(density(a) / density(b)).epsilon(1e-12));
  }
}

TEST_CASE("log-posterior") {
  Rng rng(8);
  auto s = testing::random_instance(rng, 3, 2, 30);
  const Hyperparams hyper{2.0, 3.0};
  const double lp = log_posterior(s.Y, s.lib, s.theta, s.phi, hyper, PulseShape::Piecewise);
  const double expected = static_cast<double>(brute_log_likelihood(s, s.theta, PulseShape::Piecewise)) -
                          s.theta.w.squaredNorm() / 4.0 - s.theta.b.squaredNorm() / 6.0;
  CHECK(lp == doctest::Approx(expected).epsilon(1e-12));

  auto out = s.theta;
  out.t0 = 0.5;
  CHECK(log_posterior(s.Y, s.lib, out, s.phi, hyper, PulseShape::Piecewise) == kNegInf);
  out = s.theta;
  out.b(1) = -0.1;
  CHECK(log_posterior(s.Y, s.lib, out, s.phi, hyper, PulseShape::Piecewise) == kNegInf);

  // Flat-prior limit: posterior differences equal likelihood differences.
  const Hyperparams flat{1e300, 1e300};
  auto other = s.theta;
  other.w *= 1.3;
  other.b.array() += 0.4;
  other.t0 += 0.7;
  const double dpost = log_posterior(s.Y, s.lib, s.theta, s.phi, flat, PulseShape::Piecewise) -
                       log_posterior(s.Y, s.lib, other, s.phi, flat, PulseShape::Piecewise);
  const double dlik = log_likelihood(s.Y, s.lib, s.theta, s.phi, PulseShape::Piecewise) -
                      log_likelihood(s.Y, s.lib, other, s.phi, PulseShape::Piecewise);
  CHECK(dpost == doctest::Approx(dlik).epsilon(1e-12));
}

TEST_CASE("potential energy") {
  Rng rng(13);
  auto s = testing::random_instance(rng, 3, 3, 40);
  const Hyperparams hyper{0.7, 1e6};
  SUBCASE("U + log posterior is constant in w") {
    double reference = 0.0;
    for (int i = 0; i < 5; ++i) {
      auto th = s.theta;
      for (int r = 0; r < 3; ++r) th.w(r) = 2.0 * rng.uniform();
      const double sum = potential_energy(th.w, s.Y, s.lib, th.t0, th.b, hyper.alpha2, s.phi, PulseShape::Piecewise) +
                         log_posterior(s.Y, s.lib, th, s.phi, hyper, PulseShape::Piecewise);
      if (i == 0) reference = sum;
      CHECK(sum == doctest::Approx(reference).epsilon(1e-11));
    }
  }
  SUBCASE("empty data and a flat prior give the summed intensity") {
    Eigen::MatrixXd Y0 = Eigen::MatrixXd::Zero(3, 40);
    double prev = -1.0;
    for (double scale : {0.0, 0.5, 1.0, 2.0}) {
      Eigen::VectorXd w = scale * s.theta.w;
      const double U = potential_energy(w, Y0, s.lib, s.theta.t0, s.theta.b, 1e300, s.phi, PulseShape::Piecewise);
      SceneSingle scene{w, s.theta.t0, s.theta.b};
      CHECK(U == doctest::Approx(intensity_single(s.lib, scene, s.phi, 40, PulseShape::Piecewise).sum()).epsilon(1e-12));
      CHECK(U > prev);
      prev = U;
    }
  }
  SUBCASE("closed form at w = 0") {
    double expected = 0.0;
    for (int l = 0; l < 3; ++l)
      for (int t = 0; t < 40; ++t) expected += s.theta.b(l) - s.Y(l, t) * std::log(s.theta.b(l));
    CHECK(potential_energy(Eigen::Vector3d::Zero(), s.Y, s.lib, s.theta.t0, s.theta.b, 1.0, s.phi,
                           PulseShape::Piecewise) == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("outside the orthant") {
    Eigen::Vector3d w(0.1, -0.01, 0.2);
    CHECK(potential_energy(w, s.Y, s.lib, s.theta.t0, s.theta.b, 1.0, s.phi, PulseShape::Piecewise) == kPosInf);
  }
}

TEST_CASE("gradient of the potential") {
  SUBCASE("central differences on random instances") {
    Rng rng(99);
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
      const int L = 1 + static_cast<int>(rng.bits() % 4);
      const int R = 1 + static_cast<int>(rng.bits() % 3);
      const int T = 10 + static_cast<int>(rng.bits() % 41);
      auto s = testing::random_instance(rng, L, R, T);
      const double alpha2 = 0.1 + 5 * rng.uniform();
      const auto shape = trial % 2 ? PulseShape::Gaussian : PulseShape::Piecewise;
      auto U = [&](const Eigen::VectorXd& w) {
        return potential_energy(w, s.Y, s.lib, s.theta.t0, s.theta.b, alpha2, s.phi, shape);
      };
      const Eigen::VectorXd g = grad_potential_w(s.theta.w, s.Y, s.lib, s.theta.t0, s.theta.b, alpha2, s.phi, shape);
      for (int r = 0; r < R; ++r) {
        // Richardson-extrapolated central difference.
        auto central = [&](double h) {
          Eigen::VectorXd p = s.theta.w, m = s.theta.w;
          p(r) += h;
          m(r) -= h;
          return (U(p) - U(m)) / (2 * h);
        };
        const double h = 1e-3 * s.theta.w(r);
        const double fd = (4.0 * central(h / 2) - central(h)) / 3.0;
        CAPTURE(trial);
        CAPTURE(r);
        CHECK(std::abs(fd - g(r)) <= 1e-5 * std::max(std::abs(g(r)), 1.0));
        ++checked;
      }
    }
    CHECK(checked >= 100);
  }
  SUBCASE("zero when counts equal intensities and the prior is flat") {
    Rng rng(4);
    auto s = testing::random_instance(rng, 3, 2, 30);
    SceneSingle scene{s.theta.w, s.theta.t0, s.theta.b};
    Eigen::MatrixXd Y = intensity_single(s.lib, scene, s.phi, 30, PulseShape::Piecewise);
    auto g = grad_potential_w(s.theta.w, Y, s.lib, s.theta.t0, s.theta.b, 1e300, s.phi, PulseShape::Piecewise);
    CHECK(g.cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("prior only when there are no bins") {
    auto lib = testing::fixture_library(4);
    Eigen::Vector3d w(0.3, 1.2, 2.0);
    auto g = grad_potential_w(w, Eigen::MatrixXd(4, 0), lib, 1.5, Eigen::VectorXd::Ones(4), 4.0, ImpulseParams{},
                              PulseShape::Piecewise);
    CHECK((g - w / 4.0).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("finite at the corner w = b = 0 thanks to the floor") {
    Rng rng(6);
    auto s = testing::random_instance(rng, 2, 2, 20);
    auto g = grad_potential_w(Eigen::Vector2d::Zero(), s.Y, s.lib, s.theta.t0, Eigen::Vector2d::Zero(), 1.0, s.phi,
                              PulseShape::Piecewise);
    CHECK(g.allFinite());
  }
}

TEST_CASE("log-likelihood is strictly concave in each background with counts") {
  Rng rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    auto s = testing::random_instance(rng, 2, 2, 25);
    for (int l = 0; l < 2; ++l) {
      if (s.Y.row(l).sum() == 0) continue;
      auto at = [&](double b) {
        auto th = s.theta;
        th.b(l) = b;
        return log_likelihood(s.Y, s.lib, th, s.phi, PulseShape::Piecewise);
      };
      const double b1 = 0.2 + 3 * rng.uniform(), b2 = b1 + 0.1 + 3 * rng.uniform();
      CHECK(at(0.5 * (b1 + b2)) > 0.5 * (at(b1) + at(b2)));
    }
  }
}

TEST_CASE("dimension mismatches are rejected") {
  auto lib = testing::fixture_library(4);
  ParameterVector th{Eigen::Vector2d::Ones(), Eigen::VectorXd::Ones(4), 5.0};
  CHECK_THROWS_AS(log_likelihood(Eigen::MatrixXd::Zero(4, 10), lib, th, ImpulseParams{}, PulseShape::Piecewise),
                  ValidationError);
  CHECK_THROWS_AS(Hyperparams({0.0, 1.0}).validate(), ValidationError);
}

#pragma once

#include <Eigen/Dense>

#include "mslu/forward_model.hpp"
#include "mslu/posterior.hpp"
#include "mslu/rng.hpp"

namespace testing {

// Random (L, R, T) problem with a narrow pulse centred inside the record.
struct SmallInstance {
  mslu::SpectralLibrary lib;
  mslu::ImpulseParams phi;
  mslu::ParameterVector theta;
  Eigen::MatrixXd Y;
  int T = 0;
};

inline SmallInstance random_instance(mslu::Rng& rng, int L, int R, int T) {
  SmallInstance s;
  s.T = T;
  s.lib.M.resize(L, R);
  for (int l = 0; l < L; ++l) {
    s.lib.band_wavelengths.push_back(500.0 + 10.0 * l);
    for (int r = 0; r < R; ++r) s.lib.M(l, r) = 0.05 + 0.9 * rng.uniform();
  }
  for (int r = 0; r < R; ++r) s.lib.material_names.push_back("m" + std::to_string(r));
  s.phi.T1 = 3 + 5 * rng.uniform();
  s.phi.T2 = 1 + 2 * rng.uniform();
  s.phi.T3 = s.phi.T2 + 2 + 5 * rng.uniform();
  s.phi.tau1 = 1 + 3 * rng.uniform();
  s.phi.tau2 = 1 + 3 * rng.uniform();
  s.phi.tau3 = 2 + 10 * rng.uniform();
  s.phi.sigma2 = 1 + 4 * rng.uniform();
  s.phi.beta = 20 + 200 * rng.uniform();
  s.theta.w.resize(R);
  for (int r = 0; r < R; ++r) s.theta.w(r) = 0.05 + rng.uniform();
  s.theta.b.resize(L);
  for (int l = 0; l < L; ++l) s.theta.b(l) = 0.5 + 5 * rng.uniform();
  s.theta.t0 = 1.0 + (T - 1.0) * (0.3 + 0.4 * rng.uniform());
  // Counts drawn at a perturbed truth so the gradient is not near zero.
  mslu::SceneSingle scene{s.theta.w * (0.5 + rng.uniform()), s.theta.t0 + rng.normal(), s.theta.b};
  const Eigen::MatrixXd lam = mslu::intensity_single(s.lib, scene, s.phi, T, mslu::PulseShape::Piecewise);
  s.Y = mslu::simulate(lam, rng.bits()).Y;
  return s;
}

}  // namespace testing

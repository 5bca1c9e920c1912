#pragma once

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "mslu/forward_model.hpp"
#include "mslu/spectral_library.hpp"

// Serial reference evaluators of the single-layer Bayesian model. Every sum
// runs over all L x T bins in a fixed order; these are the ground truth that
// the windowed kernels in kernels.hpp are tested against.

namespace mslu {

/// Intensities below this floor (but > 0) are clamped inside log terms.
inline constexpr double kLambdaFloor = 1e-12;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kPosInf = std::numeric_limits<double>::infinity();

/// Unknowns of the single-layer model.
struct ParameterVector {
  Eigen::VectorXd w;  // R areas
  Eigen::VectorXd b;  // L backgrounds
  double t0 = 0.0;
};

struct Hyperparams {
  double alpha2 = 1e6;  // area prior variance
  double gamma2 = 1e6;  // background prior variance

  void validate() const;
};

/// y log(lambda) with the floor applied; -inf when lambda == 0 < y, and 0
/// when y == 0.
inline double poisson_log_term(double y, double lambda) {
  if (y == 0.0) return 0.0;
  if (lambda <= 0.0) return kNegInf;
  return y * std::log(lambda > kLambdaFloor ? lambda : kLambdaFloor);
}

/// Sum over bins of y log(lambda) - lambda - log(y!). Returns -inf when an
/// intensity is exactly zero at a bin with a positive count.
double log_likelihood(const Eigen::MatrixXd& Y, const SpectralLibrary& lib, const ParameterVector& theta,
                      const ImpulseParams& phi, PulseShape shape);

/// -w'w / (2 alpha2) on the positive orthant, -inf outside.
double log_prior_w(const Eigen::VectorXd& w, double alpha2);
/// -b'b / (2 gamma2) on the positive orthant, -inf outside.
double log_prior_b(const Eigen::VectorXd& b, double gamma2);
/// 0 on (1, T), -inf outside.
double log_prior_t0(double t0, int T);

/// Unnormalized log posterior: likelihood plus the three log priors.
double log_posterior(const Eigen::MatrixXd& Y, const SpectralLibrary& lib, const ParameterVector& theta,
                     const ImpulseParams& phi, const Hyperparams& hyper, PulseShape shape);

/// Potential energy of the area conditional:
///   U(w) = -sum(y log lambda - lambda) + w'w / (2 alpha2).
/// +inf when w leaves the positive orthant or an intensity hits zero under a
/// positive count.
double potential_energy(const Eigen::VectorXd& w, const Eigen::MatrixXd& Y, const SpectralLibrary& lib,
                        double t0, const Eigen::VectorXd& b, double alpha2, const ImpulseParams& phi,
                        PulseShape shape);

/// dU/dw_r = -sum (y/lambda - 1) g M(l, r) + w_r / alpha2.
Eigen::VectorXd grad_potential_w(const Eigen::VectorXd& w, const Eigen::MatrixXd& Y,
                                 const SpectralLibrary& lib, double t0, const Eigen::VectorXd& b,
                                 double alpha2, const ImpulseParams& phi, PulseShape shape);

}  // namespace mslu

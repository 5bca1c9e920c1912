#include "mslu/posterior.hpp"

#include <cmath>

namespace mslu {

namespace {

void check_dims(const Eigen::MatrixXd& Y, const SpectralLibrary& lib, const Eigen::VectorXd& w,
                const Eigen::VectorXd& b) {
  if (Y.rows() != lib.bands() || w.size() != lib.materials() || b.size() != lib.bands()) {
    throw ValidationError("posterior: dimension mismatch between Y, library, w and b");
  }
}

// Data term sum(y log lambda - lambda); -inf on a zero intensity under a count.
double data_term(const Eigen::MatrixXd& Y, const SpectralLibrary& lib, const Eigen::VectorXd& w,
                 double t0, const Eigen::VectorXd& b, const ImpulseParams& phi, PulseShape shape) {
  const Eigen::VectorXd amplitude = lib.M * w;
  double total = 0.0;
  for (Eigen::Index l = 0; l < Y.rows(); ++l) {
    for (Eigen::Index t = 0; t < Y.cols(); ++t) {
      const double lambda = amplitude(l) * pulse(shape, t + 1.0, t0, phi) + b(l);
      const double term = poisson_log_term(Y(l, t), lambda);
      if (term == kNegInf) return kNegInf;
      total += term - lambda;
    }
  }
  return total;
}

}  // namespace

void Hyperparams::validate() const {
  if (!(alpha2 > 0.0) || !(gamma2 > 0.0)) {
    throw ValidationError("hyperparameters alpha2 and gamma2 must be > 0");
  }
}

double log_likelihood(const Eigen::MatrixXd& Y, const SpectralLibrary& lib, const ParameterVector& theta,
                      const ImpulseParams& phi, PulseShape shape) {
  check_dims(Y, lib, theta.w, theta.b);
  const double data = data_term(Y, lib, theta.w, theta.t0, theta.b, phi, shape);
  if (data == kNegInf) return kNegInf;
  double log_factorials = 0.0;
  for (Eigen::Index t = 0; t < Y.cols(); ++t) {
    for (Eigen::Index l = 0; l < Y.rows(); ++l) log_factorials += std::lgamma(Y(l, t) + 1.0);
  }
  return data - log_factorials;
}

double log_prior_w(const Eigen::VectorXd& w, double alpha2) {
  if ((w.array() < 0.0).any()) return kNegInf;
  return -w.squaredNorm() / (2.0 * alpha2);
}

double log_prior_b(const Eigen::VectorXd& b, double gamma2) {
  if ((b.array() < 0.0).any()) return kNegInf;
  return -b.squaredNorm() / (2.0 * gamma2);
}

double log_prior_t0(double t0, int T) { return (t0 > 1.0 && t0 < T) ? 0.0 : kNegInf; }

double log_posterior(const Eigen::MatrixXd& Y, const SpectralLibrary& lib, const ParameterVector& theta,
                     const ImpulseParams& phi, const Hyperparams& hyper, PulseShape shape) {
  const double prior = log_prior_w(theta.w, hyper.alpha2) + log_prior_b(theta.b, hyper.gamma2) +
                       log_prior_t0(theta.t0, static_cast<int>(Y.cols()));
  if (prior == kNegInf) return kNegInf;
  return log_likelihood(Y, lib, theta, phi, shape) + prior;
}

double potential_energy(const Eigen::VectorXd& w, const Eigen::MatrixXd& Y, const SpectralLibrary& lib,
                        double t0, const Eigen::VectorXd& b, double alpha2, const ImpulseParams& phi,
                        PulseShape shape) {
  check_dims(Y, lib, w, b);
  if ((w.array() < 0.0).any()) return kPosInf;
  const double data = data_term(Y, lib, w, t0, b, phi, shape);
  if (data == kNegInf) return kPosInf;
  return -data + w.squaredNorm() / (2.0 * alpha2);
}

Eigen::VectorXd grad_potential_w(const Eigen::VectorXd& w, const Eigen::MatrixXd& Y,
                                 const SpectralLibrary& lib, double t0, const Eigen::VectorXd& b,
                                 double alpha2, const ImpulseParams& phi, PulseShape shape) {
  check_dims(Y, lib, w, b);
  const Eigen::VectorXd amplitude = lib.M * w;
  Eigen::VectorXd grad = w / alpha2;
  for (Eigen::Index l = 0; l < Y.rows(); ++l) {
    double weight = 0.0;  // sum_t (y/lambda - 1) g
    for (Eigen::Index t = 0; t < Y.cols(); ++t) {
      const double g = pulse(shape, t + 1.0, t0, phi);
      const double lambda = std::max(amplitude(l) * g + b(l), kLambdaFloor);
      weight += (Y(l, t) / lambda - 1.0) * g;
    }
    grad -= weight * lib.M.row(l).transpose();
  }
  return grad;
}

}  // namespace mslu

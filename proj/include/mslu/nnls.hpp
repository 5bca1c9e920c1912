#pragma once

#include <Eigen/Dense>

namespace mslu {

/// Nonnegative least squares, argmin ||A x - b|| subject to x >= 0
/// (Lawson-Hanson active set).
Eigen::VectorXd nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double tol = 1e-12,
                     int max_iterations = 0);

}  // namespace mslu

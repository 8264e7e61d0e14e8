#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace dagprl {

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct JitteredCholesky {
  Eigen::MatrixXd lower;
  double jitter = 0.0;           // absolute value added to the diagonal
  double relative_jitter = 0.0;  // jitter / scale
};

/// Cholesky of K + jitter*I with jitter = c*scale, c = 1e-6, 1e-5, ..., 1e-2.
/// Throws NumericalError with diagnostics once the ladder is exhausted.
JitteredCholesky jittered_cholesky(const Eigen::MatrixXd& k, double scale);

/// Reverse mode of L = chol(K): given dL (only the lower triangle is read),
/// returns the symmetric dK.
Eigen::MatrixXd cholesky_backward(const Eigen::MatrixXd& lower, const Eigen::MatrixXd& d_lower);

}  // namespace dagprl

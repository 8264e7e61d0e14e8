#pragma once

#include <Eigen/Dense>

namespace dagprl {

/// ARD squared-exponential kernel, stored as unconstrained logs.
struct KernelParams {
  double log_signal_variance = 0.0;
  Eigen::VectorXd log_lengthscales;

  /// Throws ContractViolation unless all values are finite and > 0.
  static KernelParams from_positive(double signal_variance, const Eigen::VectorXd& lengthscales);

  double signal_variance() const;
  Eigen::VectorXd lengthscales() const;
  Eigen::Index dim() const { return log_lengthscales.size(); }
};

/// Gram matrix between the rows of a and the rows of b.
Eigen::MatrixXd kernel_matrix(const KernelParams& params, const Eigen::MatrixXd& a,
                              const Eigen::MatrixXd& b);

/// Accumulates the reverse-mode contribution of k_bar (same shape as k) into
/// the hyperparameter gradient and, when given, the gradients of a and b.
void kernel_backward(const KernelParams& params, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                     const Eigen::MatrixXd& k, const Eigen::MatrixXd& k_bar, double& d_log_signal_variance,
                     Eigen::Ref<Eigen::VectorXd> d_log_lengthscales, Eigen::MatrixXd* d_a,
                     Eigen::MatrixXd* d_b);

}  // namespace dagprl

#include "dagprl/kernel.hpp"

#include <cmath>

#include "dagprl/env.hpp"

namespace dagprl {

KernelParams KernelParams::from_positive(double signal_variance, const Eigen::VectorXd& lengthscales) {
  if (!(signal_variance > 0.0) || !std::isfinite(signal_variance)) {
    throw ContractViolation("signal variance must be positive and finite");
  }
  if (lengthscales.size() == 0 || !lengthscales.allFinite() || (lengthscales.array() <= 0.0).any()) {
    throw ContractViolation("lengthscales must be positive and finite");
  }
  return {std::log(signal_variance), lengthscales.array().log().matrix()};
}

double KernelParams::signal_variance() const { return std::exp(log_signal_variance); }

Eigen::VectorXd KernelParams::lengthscales() const { return log_lengthscales.array().exp().matrix(); }

Eigen::MatrixXd kernel_matrix(const KernelParams& params, const Eigen::MatrixXd& a,
                              const Eigen::MatrixXd& b) {
  if (a.cols() != params.dim() || b.cols() != params.dim()) {
    throw ContractViolation("kernel input dimension mismatch");
  }
  const Eigen::VectorXd inv_ls2 = (-2.0 * params.log_lengthscales.array()).exp().matrix();
  Eigen::MatrixXd d2(a.rows(), b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      double acc = 0.0;
      for (Eigen::Index d = 0; d < a.cols(); ++d) {
        const double diff = a(i, d) - b(j, d);
        acc += diff * diff * inv_ls2(d);
      }
      d2(i, j) = acc;
    }
  }
  const double sf2 = params.signal_variance();
  return (sf2 * (-0.5 * d2.array()).exp()).matrix();
}

void kernel_backward(const KernelParams& params, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                     const Eigen::MatrixXd& k, const Eigen::MatrixXd& k_bar, double& d_log_signal_variance,
                     Eigen::Ref<Eigen::VectorXd> d_log_lengthscales, Eigen::MatrixXd* d_a,
                     Eigen::MatrixXd* d_b) {
  const Eigen::Index dim = params.dim();
  const Eigen::MatrixXd w = k.cwiseProduct(k_bar);  // dL/dk * k
  d_log_signal_variance += w.sum();
  const Eigen::VectorXd inv_ls2 = (-2.0 * params.log_lengthscales.array()).exp().matrix();
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      const double wij = w(i, j);
      if (wij == 0.0) continue;
      for (Eigen::Index d = 0; d < dim; ++d) {
        const double diff = a(i, d) - b(j, d);
        d_log_lengthscales(d) += wij * diff * diff * inv_ls2(d);
        // dk_ij/da_id = -k_ij (a_id - b_jd) / l_d^2
        const double g = wij * diff * inv_ls2(d);
        if (d_a != nullptr) (*d_a)(i, d) -= g;
        if (d_b != nullptr) (*d_b)(j, d) += g;
      }
    }
  }
}

}  // namespace dagprl

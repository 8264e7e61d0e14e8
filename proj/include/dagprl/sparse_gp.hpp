#pragma once

#include <Eigen/Dense>

#include "dagprl/kernel.hpp"
#include "dagprl/linalg.hpp"

namespace dagprl {

/// q(u) = N(mean, factor * factor^T) in unwhitened inducing-output space.
struct VariationalGaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance_factor;  // lower triangular, positive diagonal
};

struct Prediction {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
};

inline constexpr double kMinPredictiveVariance = 1e-12;

/// One sparse variational GP latent function with an ARD squared-exponential
/// prior and a constant mean function.
///
/// q(u) is held whitened: u = mean_function + L_z v with q(v) = N(m_w, L_w L_w^T)
/// and L_z the jittered Cholesky factor of K(Z, Z). The public posterior()
/// accessors translate to and from unwhitened terms.
///
/// Flat parameter layout (used by the optimizers and the gradient routines):
///   [log_signal_variance, log_lengthscales(D), mean_function, Z (M x D row-major),
///    m_w (M), L_w lower triangle row-major with log diagonal entries]
class SparseGp {
 public:
  SparseGp() = default;
  /// q(u) starts at the prior.
  SparseGp(KernelParams kernel, Eigen::MatrixXd inducing_inputs, double mean_function = 0.0);

  const KernelParams& kernel() const { return kernel_; }
  const Eigen::MatrixXd& inducing_inputs() const { return inducing_; }
  double mean_function() const { return mean_function_; }
  Eigen::Index num_inducing() const { return inducing_.rows(); }
  Eigen::Index input_dim() const { return inducing_.cols(); }

  void set_kernel(KernelParams kernel);
  void set_inducing_inputs(Eigen::MatrixXd inducing_inputs);
  void set_mean_function(double c) { mean_function_ = c; }

  const Eigen::VectorXd& whitened_mean() const { return white_mean_; }
  const Eigen::MatrixXd& whitened_factor() const { return white_factor_; }
  void set_whitened_posterior(Eigen::VectorXd mean, Eigen::MatrixXd factor);

  VariationalGaussian posterior() const;
  void set_posterior(const VariationalGaussian& q);
  /// Resets q(u) to p(u).
  void set_posterior_to_prior();

  JitteredCholesky inducing_cholesky() const;

  Prediction predict(const Eigen::MatrixXd& x) const;
  /// Marginal reparameterized draw: mean + sqrt(variance) * eps.
  Eigen::VectorXd sample(const Eigen::MatrixXd& x, const Eigen::VectorXd& eps) const;
  /// KL(q(u) || p(u)).
  double kl_to_prior() const;

  Eigen::Index num_params() const;
  Eigen::VectorXd params() const;
  void set_params(const Eigen::VectorXd& p);

  // Offsets into the flat layout.
  Eigen::Index offset_mean_function() const { return 1 + input_dim(); }
  Eigen::Index offset_inducing() const { return 2 + input_dim(); }
  Eigen::Index offset_whitened_mean() const { return offset_inducing() + num_inducing() * input_dim(); }
  Eigen::Index offset_whitened_factor() const { return offset_whitened_mean() + num_inducing(); }

  /// Adds the gradient of scale * KL into grad (flat layout).
  void kl_backward(double scale, Eigen::Ref<Eigen::VectorXd> grad) const;

 private:
  void check_shapes() const;

  KernelParams kernel_;
  Eigen::MatrixXd inducing_;
  double mean_function_ = 0.0;
  Eigen::VectorXd white_mean_;
  Eigen::MatrixXd white_factor_;
};

/// Predictive marginals at a batch of inputs with a reverse pass into the
/// flat parameter gradient. Holds a reference to the GP, which must outlive it.
class GpBatchEvaluation {
 public:
  GpBatchEvaluation(const SparseGp& gp, const Eigen::MatrixXd& x);

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& variance() const { return variance_; }

  /// Accumulates dL/dparams into grad and, when d_x is non-null, dL/dx.
  void backward(const Eigen::VectorXd& d_mean, const Eigen::VectorXd& d_variance,
                Eigen::Ref<Eigen::VectorXd> grad, Eigen::MatrixXd* d_x = nullptr) const;

 private:
  const SparseGp& gp_;
  Eigen::MatrixXd x_;
  JitteredCholesky chol_;
  Eigen::MatrixXd kzz_;  // without jitter
  Eigen::MatrixXd kzx_;
  Eigen::MatrixXd a_;    // L_z^-1 K_zx
  Eigen::MatrixXd la_;   // L_w^T a
  Eigen::VectorXd mean_;
  Eigen::VectorXd variance_;
  Eigen::Array<bool, Eigen::Dynamic, 1> clamped_;
};

/// Single-point predictions for a frozen GP, with the input gradient.
/// mean = c + k^T alpha and variance = s_f^2 + k^T B k, both precomputed.
class PointPredictor {
 public:
  PointPredictor() = default;
  explicit PointPredictor(const SparseGp& gp);

  struct Result {
    double mean;
    double variance;
  };
  Result predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  /// d(output)/dx given upstream d_mean and d_variance at x.
  Eigen::VectorXd input_gradient(const Eigen::Ref<const Eigen::VectorXd>& x, double d_mean,
                                 double d_variance) const;

 private:
  Eigen::VectorXd kvec(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  Eigen::MatrixXd inducing_;
  Eigen::VectorXd inv_ls2_;
  double signal_variance_ = 1.0;
  double mean_function_ = 0.0;
  Eigen::VectorXd alpha_;
  Eigen::MatrixXd quad_;
};

}  // namespace dagprl

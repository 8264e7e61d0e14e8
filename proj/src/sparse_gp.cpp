#include "dagprl/sparse_gp.hpp"

#include <cmath>

#include "dagprl/env.hpp"

namespace dagprl {

namespace {


Eigen::Index packed_size(Eigen::Index m) { return m * (m + 1) / 2; }

}  // namespace

SparseGp::SparseGp(KernelParams kernel, Eigen::MatrixXd inducing_inputs, double mean_function)
    : kernel_(std::move(kernel)), inducing_(std::move(inducing_inputs)), mean_function_(mean_function) {
  if (inducing_.rows() < 1) throw ContractViolation("need at least one inducing input");
  set_posterior_to_prior();
  check_shapes();
}

void SparseGp::check_shapes() const {
  if (inducing_.cols() != kernel_.dim()) throw ContractViolation("inducing inputs / lengthscale dimension mismatch");
  if (white_mean_.size() != inducing_.rows() || white_factor_.rows() != inducing_.rows() ||
      white_factor_.cols() != inducing_.rows()) {
    throw ContractViolation("variational posterior / inducing set dimension mismatch");
  }
}

void SparseGp::set_kernel(KernelParams kernel) {
  kernel_ = std::move(kernel);
  check_shapes();
}

void SparseGp::set_inducing_inputs(Eigen::MatrixXd inducing_inputs) {
  inducing_ = std::move(inducing_inputs);
  check_shapes();
}

void SparseGp::set_whitened_posterior(Eigen::VectorXd mean, Eigen::MatrixXd factor) {
  if ((factor.diagonal().array() <= 0.0).any()) throw ContractViolation("factor diagonal must be positive");
  white_mean_ = std::move(mean);
  white_factor_ = std::move(factor);
  white_factor_.triangularView<Eigen::StrictlyUpper>().setZero();
  check_shapes();
}

void SparseGp::set_posterior_to_prior() {
  const Eigen::Index m = inducing_.rows();
  white_mean_ = Eigen::VectorXd::Zero(m);
  white_factor_ = Eigen::MatrixXd::Identity(m, m);
}

JitteredCholesky SparseGp::inducing_cholesky() const {
  return jittered_cholesky(kernel_matrix(kernel_, inducing_, inducing_), kernel_.signal_variance());
}

VariationalGaussian SparseGp::posterior() const {
  const auto chol = inducing_cholesky();
  const auto lz = chol.lower.triangularView<Eigen::Lower>();
  VariationalGaussian q;
  q.mean = (lz * white_mean_).array() + mean_function_;
  q.covariance_factor = chol.lower * white_factor_.triangularView<Eigen::Lower>();
  q.covariance_factor.triangularView<Eigen::StrictlyUpper>().setZero();
  return q;
}

void SparseGp::set_posterior(const VariationalGaussian& q) {
  const Eigen::Index m = inducing_.rows();
  if (q.mean.size() != m || q.covariance_factor.rows() != m || q.covariance_factor.cols() != m) {
    throw ContractViolation("posterior dimension mismatch");
  }
  if ((q.covariance_factor.diagonal().array() <= 0.0).any()) {
    throw ContractViolation("covariance factor must have a positive diagonal");
  }
  const auto chol = inducing_cholesky();
  const auto lz = chol.lower.triangularView<Eigen::Lower>();
  Eigen::MatrixXd lower = q.covariance_factor.triangularView<Eigen::Lower>();
  Eigen::VectorXd centered = q.mean.array() - mean_function_;
  set_whitened_posterior(lz.solve(centered), lz.solve(lower));
}

Prediction SparseGp::predict(const Eigen::MatrixXd& x) const {
  GpBatchEvaluation eval(*this, x);
  return {eval.mean(), eval.variance()};
}

Eigen::VectorXd SparseGp::sample(const Eigen::MatrixXd& x, const Eigen::VectorXd& eps) const {
  if (eps.size() != x.rows()) throw ContractViolation("eps length must equal the number of points");
  const auto pred = predict(x);
  return pred.mean + pred.variance.cwiseSqrt().cwiseProduct(eps);
}

double SparseGp::kl_to_prior() const {
  // Whitened: KL(N(m, L L^T) || N(0, I)).
  const Eigen::Index m = num_inducing();
  const double trace = white_factor_.squaredNorm();
  const double logdet = 2.0 * white_factor_.diagonal().array().log().sum();
  return 0.5 * (trace + white_mean_.squaredNorm() - static_cast<double>(m) - logdet);
}

void SparseGp::kl_backward(double scale, Eigen::Ref<Eigen::VectorXd> grad) const {
  const Eigen::Index m = num_inducing();
  grad.segment(offset_whitened_mean(), m) += scale * white_mean_;
  Eigen::Index idx = offset_whitened_factor();
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j, ++idx) {
      const double l = white_factor_(i, j);
      // d/dL_ij of 0.5 (||L||^2 - 2 sum log L_ii); diagonals are stored as logs.
      grad(idx) += i == j ? scale * (l * l - 1.0) : scale * l;
    }
  }
}

Eigen::Index SparseGp::num_params() const {
  const Eigen::Index m = num_inducing();
  const Eigen::Index d = input_dim();
  return 2 + d + m * d + m + packed_size(m);
}

Eigen::VectorXd SparseGp::params() const {
  const Eigen::Index m = num_inducing();
  const Eigen::Index d = input_dim();
  Eigen::VectorXd p(num_params());
  p(0) = kernel_.log_signal_variance;
  p.segment(1, d) = kernel_.log_lengthscales;
  p(offset_mean_function()) = mean_function_;
  Eigen::Index idx = offset_inducing();
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < d; ++j) p(idx++) = inducing_(i, j);
  p.segment(offset_whitened_mean(), m) = white_mean_;
  idx = offset_whitened_factor();
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) p(idx++) = i == j ? std::log(white_factor_(i, j)) : white_factor_(i, j);
  return p;
}

void SparseGp::set_params(const Eigen::VectorXd& p) {
  if (p.size() != num_params()) throw ContractViolation("parameter vector length mismatch");
  const Eigen::Index m = num_inducing();
  const Eigen::Index d = input_dim();
  kernel_.log_signal_variance = p(0);
  kernel_.log_lengthscales = p.segment(1, d);
  mean_function_ = p(offset_mean_function());
  Eigen::Index idx = offset_inducing();
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < d; ++j) inducing_(i, j) = p(idx++);
  white_mean_ = p.segment(offset_whitened_mean(), m);
  idx = offset_whitened_factor();
  white_factor_.setZero();
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      white_factor_(i, j) = i == j ? std::exp(p(idx)) : p(idx);
      ++idx;
    }
}

GpBatchEvaluation::GpBatchEvaluation(const SparseGp& gp, const Eigen::MatrixXd& x) : gp_(gp), x_(x) {
  if (x.cols() != gp.input_dim()) throw ContractViolation("prediction input dimension mismatch");
  const auto& kernel = gp.kernel();
  kzz_ = kernel_matrix(kernel, gp.inducing_inputs(), gp.inducing_inputs());
  chol_ = jittered_cholesky(kzz_, kernel.signal_variance());
  kzx_ = kernel_matrix(kernel, gp.inducing_inputs(), x);
  a_ = chol_.lower.triangularView<Eigen::Lower>().solve(kzx_);
  la_ = gp.whitened_factor().triangularView<Eigen::Lower>().transpose() * a_;
  mean_ = (a_.transpose() * gp.whitened_mean()).array() + gp.mean_function();
  const Eigen::VectorXd raw = kernel.signal_variance() - a_.colwise().squaredNorm().transpose().array() +
                              la_.colwise().squaredNorm().transpose().array();
  clamped_ = raw.array() < kMinPredictiveVariance;
  variance_ = raw.cwiseMax(kMinPredictiveVariance);
}

void GpBatchEvaluation::backward(const Eigen::VectorXd& d_mean, const Eigen::VectorXd& d_variance_in,
                                 Eigen::Ref<Eigen::VectorXd> grad, Eigen::MatrixXd* d_x) const {
  const SparseGp& gp = gp_;
  const Eigen::Index m = gp.num_inducing();
  const Eigen::Index dim = gp.input_dim();
  const double sf2 = gp.kernel().signal_variance();
  const Eigen::VectorXd d_var = clamped_.select(Eigen::VectorXd::Zero(d_variance_in.size()), d_variance_in);

  grad(gp.offset_mean_function()) += d_mean.sum();
  grad.segment(gp.offset_whitened_mean(), m) += a_ * d_mean;

  double d_log_sf2 = sf2 * d_var.sum();

  const Eigen::MatrixXd a_dv = a_ * d_var.asDiagonal();
  Eigen::MatrixXd d_a = gp.whitened_mean() * d_mean.transpose();
  d_a -= 2.0 * a_dv;
  const Eigen::MatrixXd lw_la = gp.whitened_factor().triangularView<Eigen::Lower>() * la_;
  d_a += 2.0 * lw_la * d_var.asDiagonal();

  // d/dL_w of sum_j c_j ||L_w^T a_j||^2 = 2 A C (L_w^T A)^T
  const Eigen::MatrixXd d_lw = 2.0 * a_dv * la_.transpose();
  Eigen::Index idx = gp.offset_whitened_factor();
  const auto& lw = gp.whitened_factor();
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j <= i; ++j, ++idx) grad(idx) += i == j ? d_lw(i, j) * lw(i, j) : d_lw(i, j);

  // a = L_z^-1 K_zx
  const auto lz = chol_.lower.triangularView<Eigen::Lower>();
  const Eigen::MatrixXd d_kzx = lz.transpose().solve(d_a);
  Eigen::MatrixXd d_lz = -d_kzx * a_.transpose();
  d_lz.triangularView<Eigen::StrictlyUpper>().setZero();
  const Eigen::MatrixXd d_kzz = cholesky_backward(chol_.lower, d_lz);
  d_log_sf2 += chol_.relative_jitter * sf2 * d_kzz.trace();

  Eigen::VectorXd d_log_ls = Eigen::VectorXd::Zero(dim);
  Eigen::MatrixXd d_z = Eigen::MatrixXd::Zero(m, dim);
  kernel_backward(gp.kernel(), gp.inducing_inputs(), gp.inducing_inputs(), kzz_, d_kzz, d_log_sf2, d_log_ls,
                  &d_z, &d_z);
  kernel_backward(gp.kernel(), gp.inducing_inputs(), x_, kzx_, d_kzx, d_log_sf2, d_log_ls, &d_z, d_x);

  grad(0) += d_log_sf2;
  grad.segment(1, dim) += d_log_ls;
  idx = gp.offset_inducing();
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) grad(idx++) += d_z(i, j);
}

PointPredictor::PointPredictor(const SparseGp& gp)
    : inducing_(gp.inducing_inputs()),
      inv_ls2_((-2.0 * gp.kernel().log_lengthscales.array()).exp().matrix()),
      signal_variance_(gp.kernel().signal_variance()),
      mean_function_(gp.mean_function()) {
  const auto chol = gp.inducing_cholesky();
  const auto lz = chol.lower.triangularView<Eigen::Lower>();
  alpha_ = lz.transpose().solve(gp.whitened_mean());
  const Eigen::Index m = gp.num_inducing();
  Eigen::MatrixXd inner = gp.whitened_factor() * gp.whitened_factor().transpose();
  inner -= Eigen::MatrixXd::Identity(m, m);
  // B = L_z^-T (L_w L_w^T - I) L_z^-1
  Eigen::MatrixXd half = lz.transpose().solve(inner);
  quad_ = lz.transpose().solve(half.transpose()).transpose();
  quad_ = 0.5 * (quad_ + quad_.transpose()).eval();
}

Eigen::VectorXd PointPredictor::kvec(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const Eigen::Index m = inducing_.rows();
  Eigen::VectorXd k(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    double acc = 0.0;
    for (Eigen::Index d = 0; d < inducing_.cols(); ++d) {
      const double diff = inducing_(i, d) - x(d);
      acc += diff * diff * inv_ls2_(d);
    }
    k(i) = signal_variance_ * std::exp(-0.5 * acc);
  }
  return k;
}

PointPredictor::Result PointPredictor::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const Eigen::VectorXd k = kvec(x);
  const double var = signal_variance_ + k.dot(quad_ * k);
  return {mean_function_ + k.dot(alpha_), std::max(var, kMinPredictiveVariance)};
}

Eigen::VectorXd PointPredictor::input_gradient(const Eigen::Ref<const Eigen::VectorXd>& x, double d_mean,
                                               double d_variance) const {
  const Eigen::VectorXd k = kvec(x);
  const Eigen::VectorXd qk = quad_ * k;
  if (signal_variance_ + k.dot(qk) < kMinPredictiveVariance) d_variance = 0.0;
  const Eigen::VectorXd dk = d_mean * alpha_ + 2.0 * d_variance * qk;
  Eigen::VectorXd dx = Eigen::VectorXd::Zero(x.size());
  for (Eigen::Index i = 0; i < inducing_.rows(); ++i) {
    const double w = dk(i) * k(i);
    for (Eigen::Index d = 0; d < x.size(); ++d) dx(d) += w * (inducing_(i, d) - x(d)) * inv_ls2_(d);
  }
  return dx;
}

}  // namespace dagprl

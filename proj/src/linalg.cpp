#include "dagprl/linalg.hpp"

#include <cmath>
#include <sstream>

namespace dagprl {

JitteredCholesky jittered_cholesky(const Eigen::MatrixXd& k, double scale) {
  const Eigen::Index n = k.rows();
  for (double c = 1e-6; c <= 1e-2 * (1.0 + 1e-9); c *= 10.0) {
    Eigen::MatrixXd kj = k;
    kj.diagonal().array() += c * scale;
    Eigen::LLT<Eigen::MatrixXd> llt(kj);
    if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().diagonal().allFinite()) {
      return {llt.matrixL(), c * scale, c};
    }
  }
  std::ostringstream msg;
  msg << "Cholesky failed after jitter escalation to 1e-2 (n=" << n << ", scale=" << scale
      << ", min diag=" << (n > 0 ? k.diagonal().minCoeff() : 0.0)
      << ", finite=" << (k.allFinite() ? "yes" : "no") << ")";
  throw NumericalError(msg.str());
}

Eigen::MatrixXd cholesky_backward(const Eigen::MatrixXd& lower, const Eigen::MatrixXd& d_lower) {
  // P = Phi(L^T dL), dK = sym(L^-T P L^-1), Phi keeps the lower triangle and
  // halves the diagonal.
  Eigen::MatrixXd p = lower.transpose() * d_lower.triangularView<Eigen::Lower>();
  p.triangularView<Eigen::StrictlyUpper>().setZero();
  p.diagonal() *= 0.5;
  const auto l = lower.triangularView<Eigen::Lower>();
  Eigen::MatrixXd x = l.transpose().solve(p);                 // L^-T P
  Eigen::MatrixXd s = l.transpose().solve(x.transpose()).transpose();  // L^-T P L^-1
  return 0.5 * (s + s.transpose());
}

}  // namespace dagprl

#pragma once

#include <cmath>

#include <Eigen/Dense>

namespace dagprl {

struct AdamConfig {
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive-moment stochastic gradient steps on a flat parameter vector.
class Adam {
 public:
  Adam(Eigen::Index n, AdamConfig config) : config_(config), m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)) {}

  /// params <- params + lr * direction, where direction follows +grad
  /// (ascent) when maximize is set.
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, bool maximize) {
    ++t_;
    m_ = config_.beta1 * m_ + (1.0 - config_.beta1) * grad;
    v_ = config_.beta2 * v_ + (1.0 - config_.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    const Eigen::VectorXd update =
        (m_.array() / c1) / ((v_.array() / c2).sqrt() + config_.epsilon) * config_.learning_rate;
    if (maximize) {
      params += update;
    } else {
      params -= update;
    }
  }

  long steps() const { return t_; }

 private:
  AdamConfig config_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  long t_ = 0;
};

}  // namespace dagprl

#pragma once

#include <array>

#include <Eigen/Dense>

#include "dagprl/env.hpp"

namespace dagprl {

inline constexpr int kMaxModes = 4;

/// Standard-normal and uniform draws consumed by one sampled transition.
struct TransitionNoise {
  std::array<double, kMaxModes> assignment{};  // one per mode, N(0, 1)
  double mode_uniform = 0.5;                   // U(0, 1), picks the mode
  Eigen::Vector2d flow = Eigen::Vector2d::Zero();
  Eigen::Vector2d log_noise = Eigen::Vector2d::Zero();
  Eigen::Vector2d observation = Eigen::Vector2d::Zero();

  static TransitionNoise draw(Rng& rng);
};

/// Learned transition sampler used for policy rollouts. States are raw
/// (unstandardized) and unclipped.
class TransitionModel {
 public:
  virtual ~TransitionModel() = default;

  virtual int modes() const = 0;

  /// Next state for fixed noise. Writes the selected mode when requested.
  virtual Eigen::Vector2d sample(const Eigen::Vector2d& state, const Eigen::Vector2d& action,
                                 const TransitionNoise& noise, int* mode = nullptr) const = 0;

  /// Reverse pass of sample() for the same noise. d_next is dJ/d(next state).
  /// score_weight multiplies grad log P(selected mode) and adds it to the
  /// result (0 disables that term). Outputs dJ/dstate and dJ/daction.
  virtual void backward(const Eigen::Vector2d& state, const Eigen::Vector2d& action, const TransitionNoise& noise,
                        const Eigen::Vector2d& d_next, double score_weight, Eigen::Vector2d& d_state,
                        Eigen::Vector2d& d_action) const = 0;
};

}  // namespace dagprl

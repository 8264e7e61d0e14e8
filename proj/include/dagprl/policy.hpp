#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dagprl/env.hpp"
#include "dagprl/mlp.hpp"
#include "dagprl/transition_model.hpp"

namespace dagprl {

/// 2 -> 20 -> 20 -> 2 network, ReLU hidden units, tanh output. All weights zero.
Mlp make_policy_net();

/// States enter the network rescaled from [0, 5]^2 to [-1, 1]^2.
Eigen::Vector2d policy_input(const Eigen::Vector2d& state);

Action act(const Mlp& policy, const State& state);
Eigen::Vector2d act(const Mlp& policy, const Eigen::Vector2d& state);

/// Reward used inside model rollouts: x clamped into [0, 5].
double model_reward(const Eigen::Vector2d& state);

struct RolloutConfig {
  int horizon = 5;
  int samples = 20;
  double gamma = 0.9;
  /// Start states; rollouts draw from these uniformly.
  std::vector<State> initial_states;
  /// Adds a score-function term for the sampled mode of every transition;
  /// when off, gradients flow through the within-mode sampling path only.
  bool mode_score_gradient = true;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

/// Every random quantity of one return estimate.
struct RolloutNoise {
  std::vector<State> starts;                 // P
  std::vector<TransitionNoise> transitions;  // P x T, rollout-major

  static RolloutNoise draw(const RolloutConfig& cfg, Rng& rng);
};

struct ReturnEstimate {
  double value = 0.0;
  std::vector<double> returns;
};

/// (1/P) sum_p sum_{t=0}^{T} gamma^t r(s_t^p). When grad is non-null it
/// receives the gradient with respect to policy.params().
ReturnEstimate estimate_return(const Mlp& policy, const TransitionModel& model, const RolloutConfig& cfg,
                               const RolloutNoise& noise, Eigen::VectorXd* grad = nullptr);
ReturnEstimate estimate_return(const Mlp& policy, const TransitionModel& model, const RolloutConfig& cfg, Rng& rng);

struct PolicyTrainConfig {
  int steps = 2000;
  double learning_rate = 1e-2;
};

struct PolicyTrainResult {
  Mlp policy;
  std::vector<double> return_curve;
  int skipped_steps = 0;
  bool aborted = false;
  std::string message;
};

/// Adam ascent on estimate_return with fresh noise every step. A step with a
/// non-finite gradient is skipped; three in a row abort training.
PolicyTrainResult train_policy(const TransitionModel& model, const RolloutConfig& cfg,
                               const PolicyTrainConfig& train_cfg, Rng& rng);

struct PolicyGridRow {
  double x;
  double y;
  double ax;
  double ay;
};
std::vector<PolicyGridRow> policy_grid(const Mlp& policy, int resolution);
std::string policy_grid_to_csv(const std::vector<PolicyGridRow>& rows);

/// Grid coordinate i of resolution points spanning [0, 5].
double grid_coordinate(int i, int resolution);

}  // namespace dagprl

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dagprl/dagp.hpp"
#include "dagprl/mlp.hpp"
#include "dagprl/transition_model.hpp"

namespace dagprl {

/// Single-mode homoscedastic dynamics model: one sparse GP per output
/// dimension plus one learned noise variance per dimension.
struct PlainGpModel {
  Standardizer standardizer;
  std::vector<SparseGp> flow;  // x', y'
  Eigen::Vector2d log_noise_variance = Eigen::Vector2d::Constant(std::log(0.1));

  Eigen::Index num_params() const;
  /// flow[0], flow[1], then the two log noise variances.
  Eigen::VectorXd params() const;
  void set_params(const Eigen::VectorXd& p);
  void validate() const;
};

/// Collapsed-likelihood bound:
///   scale * sum_t sum_d E_q log N(y_td | f_d, s2_d) - sum_d KL(q(u_d) || p(u_d)).
double plain_gp_elbo(const PlainGpModel& model, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& outputs,
                     double data_scale, Eigen::VectorXd* grad = nullptr);

struct PlainGpTrainConfig {
  int iterations = 3000;
  int minibatch = 64;
  double learning_rate = 1e-2;
  int inducing = 100;
  double initial_factor_scale = 0.1;
  std::uint64_t seed = 0;
};

struct PlainGpTrainResult {
  PlainGpModel model;
  std::vector<double> elbo_curve;
  bool aborted = false;
  std::string message;
};

PlainGpTrainResult train_plain_gp(const TransitionDataset& data, const PlainGpTrainConfig& config);

class PlainGpTransition : public TransitionModel {
 public:
  explicit PlainGpTransition(const PlainGpModel& model);

  int modes() const override { return 1; }
  Eigen::Vector2d sample(const Eigen::Vector2d& state, const Eigen::Vector2d& action, const TransitionNoise& noise,
                         int* mode = nullptr) const override;
  void backward(const Eigen::Vector2d& state, const Eigen::Vector2d& action, const TransitionNoise& noise,
                const Eigen::Vector2d& d_next, double score_weight, Eigen::Vector2d& d_state,
                Eigen::Vector2d& d_action) const override;

  /// Predictive mean of the next state (raw units).
  Eigen::Vector2d mean(const Eigen::Vector2d& state, const Eigen::Vector2d& action) const;

 private:
  PlainGpModel model_;
  std::vector<PointPredictor> flow_;
};

/// Candidate actions for NFQ's greedy maximization.
using ActionGrid = std::vector<Action>;
/// {-1, 0, 1}^2 with ax varying slowest.
ActionGrid default_action_grid();

/// Q(s, a) = value_offset + value_scale * net(x / 2.5 - 1, y / 2.5 - 1, ax, ay).
struct QNet {
  Mlp net;
  double value_scale = 50.0;
  double value_offset = 0.0;

  double value(const State& s, const Action& a) const;
  Eigen::VectorXd values(const Eigen::MatrixXd& features) const;
};

/// 4 -> 10 sigmoid -> 1 sigmoid, so Q stays inside [0, value_scale].
Mlp make_q_network();
Eigen::RowVector4d q_features(const State& s, const Action& a);

struct NfqConfig {
  int iterations = 20;
  double gamma = 0.9;
  int max_fit_steps = 2000;
  /// A fit stops once the loss improves by less than this fraction over 50 steps.
  double fit_tolerance = 1e-5;
  ActionGrid grid = default_action_grid();
  std::uint64_t seed = 0;
};

struct NfqResult {
  QNet q;
  /// Final mean squared error of each fitted-Q iteration, in target units.
  std::vector<double> fit_losses;
  bool aborted = false;
  std::string message;
};

/// r(s') + gamma * max_a' Q(s', a') for every record.
Eigen::VectorXd nfq_targets(const QNet& q, const TransitionDataset& data, const ActionGrid& grid, double gamma);

NfqResult nfq_train(const TransitionDataset& data, const NfqConfig& config);

/// Greedy action; ties go to the lowest grid index.
Action nfq_act(const QNet& q, const State& state, const ActionGrid& grid);

}  // namespace dagprl

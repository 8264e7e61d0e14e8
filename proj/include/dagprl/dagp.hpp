#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dagprl/env.hpp"
#include "dagprl/sparse_gp.hpp"
#include "dagprl/transition_model.hpp"

namespace dagprl {

/// Per-dimension affine maps between raw and standardized coordinates.
/// Inputs are (x, y, ax, ay); outputs are the absolute next state (x', y').
struct Standardizer {
  Eigen::Vector4d input_mean = Eigen::Vector4d::Zero();
  Eigen::Vector4d input_scale = Eigen::Vector4d::Ones();
  Eigen::Vector2d output_mean = Eigen::Vector2d::Zero();
  Eigen::Vector2d output_scale = Eigen::Vector2d::Ones();

  static Standardizer fit(const TransitionDataset& data);

  Eigen::Vector4d input(const Eigen::Vector2d& state, const Eigen::Vector2d& action) const;
  Eigen::Vector2d output(const Eigen::Vector2d& next_state) const;
  Eigen::Vector2d unstandardize_output(const Eigen::Vector2d& standardized) const;
};

/// Standardized design matrices (N x 4 inputs, N x 2 outputs).
struct StandardizedData {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd outputs;
};
StandardizedData standardize(const Standardizer& s, const TransitionDataset& data);

/// K-mode data-association model. Mode k has flow GPs f^(k)_d and log-noise
/// GPs g^(k)_d for each output dimension d, plus an assignment GP lambda^(k)
/// when K > 1. sigma^(k)_d = max(exp(g^(k)_d), noise_floor).
struct DagpModel {
  int modes = 2;
  double noise_floor = 1e-3;
  Standardizer standardizer;
  std::vector<SparseGp> flow;    // index 2k + d
  std::vector<SparseGp> noise;   // index 2k + d
  std::vector<SparseGp> assign;  // index k; empty when modes == 1

  static constexpr int kStay = 0;
  static constexpr int kFall = 1;

  /// All GPs in the canonical order flow, noise, assign.
  std::vector<const SparseGp*> gps() const;
  std::vector<SparseGp*> gps();

  Eigen::Index num_params() const;
  Eigen::VectorXd params() const;
  void set_params(const Eigen::VectorXd& p);

  /// Throws ContractViolation when the layout is inconsistent.
  void validate() const;
};

/// Per-point mode responsibilities q(l_t), one row per training point.
struct ModeBeliefs {
  Eigen::MatrixXd probs;  // N x K
};

/// Numerically stable softmax.
Eigen::VectorXd mode_probabilities(const Eigen::VectorXd& logits);

/// Standard-normal draws for the sampled bound, one (batch x S) block per GP
/// in DagpModel::gps() order.
struct ElboNoise {
  std::vector<Eigen::MatrixXd> draws;
  static ElboNoise draw(const DagpModel& model, Eigen::Index batch, int samples, Rng& rng);
};

/// Monte-Carlo estimate of
///   scale * sum_t sum_k q_tk [ E log N(y_t | f^(k), sigma^(k)^2) + E log softmax(lambda)_k - log q_tk ]
///   - sum_gps KL(q(u) || p(u))
/// for a batch of standardized inputs/outputs. When grad is non-null the
/// gradient with respect to DagpModel::params() is written to it.
double elbo(const DagpModel& model, const Eigen::MatrixXd& batch_beliefs, const Eigen::MatrixXd& inputs,
            const Eigen::MatrixXd& outputs, const ElboNoise& noise, double data_scale,
            Eigen::VectorXd* grad = nullptr);

/// Convenience: full-dataset sampled bound with S fresh draws.
double elbo(const DagpModel& model, const ModeBeliefs& beliefs, const TransitionDataset& data, int samples, Rng& rng);

/// Closed-form responsibilities using posterior means of every latent function.
ModeBeliefs update_beliefs(const DagpModel& model, const StandardizedData& data);
ModeBeliefs update_beliefs(const DagpModel& model, const TransitionDataset& data);

struct DagpTrainConfig {
  int iterations = 3000;
  int minibatch = 64;
  double learning_rate = 1e-2;
  int samples = 5;
  int inducing = 100;
  int belief_interval = 50;
  int modes = 2;
  double noise_floor = 1e-3;
  /// Initial whitened factor of every q(u) is this multiple of the identity.
  double initial_factor_scale = 0.1;
  /// Start fall-beliefs at 0.9 for transitions ending at (0, 0) from x > 2.
  bool heuristic_belief_init = false;
  std::uint64_t seed = 0;
};

struct DagpTrainResult {
  DagpModel model;
  ModeBeliefs beliefs;
  std::vector<double> elbo_curve;
  bool aborted = false;
  std::string message;
};

/// Initial model: random-subset inducing inputs, unit kernels, q(u) near prior.
DagpModel initial_model(const TransitionDataset& data, const DagpTrainConfig& config, Rng& rng);

DagpTrainResult train(const TransitionDataset& data, const DagpTrainConfig& config);

/// Reorders modes so that mode 0 is the one whose belief-weighted next
/// states sit furthest from the reset point (stay) and mode 1 the closest
/// (fall). No-op for a single mode.
void label_modes(DagpModel& model, ModeBeliefs& beliefs, const TransitionDataset& data);

/// Cached sampler over a frozen model.
class DagpTransition : public TransitionModel {
 public:
  explicit DagpTransition(const DagpModel& model);

  int modes() const override { return model_.modes; }
  Eigen::Vector2d sample(const Eigen::Vector2d& state, const Eigen::Vector2d& action, const TransitionNoise& noise,
                         int* mode = nullptr) const override;
  void backward(const Eigen::Vector2d& state, const Eigen::Vector2d& action, const TransitionNoise& noise,
                const Eigen::Vector2d& d_next, double score_weight, Eigen::Vector2d& d_state,
                Eigen::Vector2d& d_action) const override;

  /// Sample with the mode forced (the categorical draw is skipped).
  Eigen::Vector2d sample_in_mode(const Eigen::Vector2d& state, const Eigen::Vector2d& action,
                                 const TransitionNoise& noise, int mode) const;

  /// Sampled assignment probabilities softmax(lambda) at a standardized input.
  Eigen::VectorXd assignment_probabilities(const Eigen::Vector4d& input, const TransitionNoise& noise) const;
  /// exp(E g^(k)_d), floored, in standardized units.
  double mean_noise(const Eigen::Vector4d& input, int mode, int dim) const;

  const DagpModel& model() const { return model_; }

 private:
  int select_mode(const Eigen::Vector4d& input, const TransitionNoise& noise) const;

  DagpModel model_;
  std::vector<PointPredictor> flow_;
  std::vector<PointPredictor> noise_;
  std::vector<PointPredictor> assign_;
};

Eigen::Vector2d sample_next_state(const DagpModel& model, const State& state, const Action& action,
                                  const TransitionNoise& noise, std::optional<int> forced_mode = std::nullopt);

struct GridRow {
  double x;
  double y;
  double p_fall;
  double sigma_x_stay;
};

/// Fall probability E[softmax(lambda)]_fall (100 lambda draws) and the stay
/// mode's x-noise in raw units over a resolution x resolution grid of
/// [0, 5]^2 at action (0, 0).
std::vector<GridRow> export_grids(const DagpModel& model, int resolution, std::uint64_t seed);

std::string grids_to_csv(const std::vector<GridRow>& rows);
std::string beliefs_to_csv(const ModeBeliefs& beliefs);

}  // namespace dagprl

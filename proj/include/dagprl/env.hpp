#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dagprl/rng.hpp"

namespace dagprl {

/// Wet-Chicken river geometry.
inline constexpr double kRiverLength = 5.0;
inline constexpr double kRiverWidth = 5.0;

struct ContractViolation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct State {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const State&) const = default;
};

struct Action {
  double ax = 0.0;
  double ay = 0.0;
  bool operator==(const Action&) const = default;
};

struct Transition {
  State state;
  Action action;
  State next_state;
  bool operator==(const Transition&) const = default;
};

struct TransitionDataset {
  std::vector<Transition> records;
  std::uint64_t seed = 0;

  std::size_t size() const { return records.size(); }
};

bool is_valid(const State& s);
bool is_valid(const Action& a);

/// Unclipped next x-position as an affine function of the turbulence draw:
/// x_hat(tau) = drift + turbulence * tau.
struct ProjectedX {
  double drift;
  double turbulence;
  double at(double tau) const { return drift + turbulence * tau; }
};
ProjectedX projected_x(const State& s, const Action& a);

/// One transition of the river for a given turbulence draw tau in [-1, 1].
/// Throws ContractViolation for inputs outside their boxes.
State step(const State& s, const Action& a, double tau);

/// Same as step() with tau ~ Uniform(-1, 1) drawn from rng.
State step(const State& s, const Action& a, Rng& rng);

/// True if the transition ended in the waterfall reset, i.e. x_hat > l.
bool is_fall(const State& s, const Action& a, double tau);

inline double reward(const State& s) { return s.x; }

/// Probability over tau ~ U(-1, 1) that the projected position leaves the
/// river (x_hat > l or x_hat < 0).
double fall_probability(const State& s, const Action& a);

/// Probability over tau that x_hat > l, the waterfall alone.
double waterfall_probability(const State& s, const Action& a);

/// N uniform-random transitions. Throws std::invalid_argument when n == 0.
TransitionDataset sample_dataset(std::size_t n, std::uint64_t seed);

using PolicyFn = std::function<Action(const State&)>;

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
};

/// Mean and standard error (sample stddev / sqrt(n)) of a list of values.
MeanStderr mean_stderr(const std::vector<double>& values);

struct EnvEvaluation {
  MeanStderr avg_step_reward;
  MeanStderr discounted_return;
  std::vector<double> per_rollout_avg_step_reward;
  std::vector<double> per_rollout_discounted_return;
};

/// Roll the policy out on the true river from Uniform([0,5]^2) initial states.
/// Both metrics use the same reward terms r(s_0), ..., r(s_H): the discounted
/// return sums gamma^t r(s_t) and the average per-step reward is their plain
/// mean.
EnvEvaluation evaluate_policy_true(const PolicyFn& policy, std::size_t horizon,
                                   std::size_t n_rollouts, double gamma, Rng& rng);

PolicyFn uniform_random_policy(std::uint64_t seed);

}  // namespace dagprl

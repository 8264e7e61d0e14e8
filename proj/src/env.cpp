#include "dagprl/env.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

namespace dagprl {

namespace {

void require_valid(const State& s, const Action& a) {
  if (!is_valid(s)) {
    std::ostringstream msg;
    msg << "state out of range: (" << s.x << ", " << s.y << ")";
    throw ContractViolation(msg.str());
  }
  if (!is_valid(a)) {
    std::ostringstream msg;
    msg << "action out of range: (" << a.ax << ", " << a.ay << ")";
    throw ContractViolation(msg.str());
  }
}

// P(tau > t) for tau ~ U(-1, 1).
double upper_tail(double t) { return (1.0 - std::clamp(t, -1.0, 1.0)) / 2.0; }

}  // namespace

bool is_valid(const State& s) {
  return s.x >= 0.0 && s.x <= kRiverLength && s.y >= 0.0 && s.y <= kRiverWidth;
}

bool is_valid(const Action& a) {
  return a.ax >= -1.0 && a.ax <= 1.0 && a.ay >= -1.0 && a.ay <= 1.0;
}

ProjectedX projected_x(const State& s, const Action& a) {
  const double velocity = s.y * 3.0 / kRiverWidth;
  const double turbulence = 3.5 - velocity;
  return {s.x + (1.5 * a.ax - 0.5) + velocity, turbulence};
}

State step(const State& s, const Action& a, double tau) {
  require_valid(s, a);
  if (!(tau >= -1.0 && tau <= 1.0)) throw ContractViolation("tau out of [-1, 1]");

  const double x_hat = projected_x(s, a).at(tau);
  const double y_hat = s.y + a.ay;

  State next;
  if (x_hat > kRiverLength) return State{0.0, 0.0};
  next.x = x_hat < 0.0 ? 0.0 : x_hat;
  if (y_hat < 0.0) {
    next.y = 0.0;
  } else if (y_hat > kRiverWidth) {
    next.y = kRiverWidth;
  } else {
    next.y = y_hat;
  }
  return next;
}

State step(const State& s, const Action& a, Rng& rng) {
  return step(s, a, uniform(rng, -1.0, 1.0));
}

bool is_fall(const State& s, const Action& a, double tau) {
  return projected_x(s, a).at(tau) > kRiverLength;
}

double waterfall_probability(const State& s, const Action& a) {
  const auto px = projected_x(s, a);
  // turbulence >= 0.5 on the valid state box.
  return upper_tail((kRiverLength - px.drift) / px.turbulence);
}

double fall_probability(const State& s, const Action& a) {
  const auto px = projected_x(s, a);
  const double below = 1.0 - upper_tail(-px.drift / px.turbulence);
  return waterfall_probability(s, a) + below;
}

TransitionDataset sample_dataset(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("dataset size must be at least 1");
  Rng rng(seed);
  TransitionDataset data;
  data.seed = seed;
  data.records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Transition t;
    t.state.x = uniform(rng, 0.0, kRiverLength);
    t.state.y = uniform(rng, 0.0, kRiverWidth);
    t.action.ax = uniform(rng, -1.0, 1.0);
    t.action.ay = uniform(rng, -1.0, 1.0);
    t.next_state = step(t.state, t.action, rng);
    data.records.push_back(t);
  }
  return data;
}

MeanStderr mean_stderr(const std::vector<double>& values) {
  MeanStderr out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / n;
  if (values.size() < 2) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.stderr_ = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  return out;
}

EnvEvaluation evaluate_policy_true(const PolicyFn& policy, std::size_t horizon,
                                   std::size_t n_rollouts, double gamma, Rng& rng) {
  if (horizon == 0) throw std::invalid_argument("horizon must be at least 1");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0, 1]");

  EnvEvaluation out;
  out.per_rollout_avg_step_reward.reserve(n_rollouts);
  out.per_rollout_discounted_return.reserve(n_rollouts);
  for (std::size_t r = 0; r < n_rollouts; ++r) {
    State s{uniform(rng, 0.0, kRiverLength), uniform(rng, 0.0, kRiverWidth)};
    double discounted = reward(s);
    double discount = 1.0;
    double total = reward(s);
    for (std::size_t t = 0; t < horizon; ++t) {
      s = step(s, policy(s), rng);
      discount *= gamma;
      discounted += discount * reward(s);
      total += reward(s);
    }
    out.per_rollout_avg_step_reward.push_back(total / static_cast<double>(horizon + 1));
    out.per_rollout_discounted_return.push_back(discounted);
  }
  out.avg_step_reward = mean_stderr(out.per_rollout_avg_step_reward);
  out.discounted_return = mean_stderr(out.per_rollout_discounted_return);
  return out;
}

PolicyFn uniform_random_policy(std::uint64_t seed) {
  auto rng = std::make_shared<Rng>(seed);
  return [rng](const State&) {
    const double ax = uniform(*rng, -1.0, 1.0);
    const double ay = uniform(*rng, -1.0, 1.0);
    return Action{ax, ay};
  };
}

}  // namespace dagprl

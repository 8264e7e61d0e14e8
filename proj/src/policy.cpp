#include "dagprl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dagprl/adam.hpp"
#include "dagprl/csv.hpp"

namespace dagprl {

Mlp make_policy_net() {
  return Mlp({2, 20, 20, 2}, {Activation::kRelu, Activation::kRelu, Activation::kTanh});
}

Eigen::Vector2d policy_input(const Eigen::Vector2d& state) {
  return state / (0.5 * kRiverLength) - Eigen::Vector2d::Ones();
}

Eigen::Vector2d act(const Mlp& policy, const Eigen::Vector2d& state) {
  return policy.forward(policy_input(state));
}

Action act(const Mlp& policy, const State& state) {
  const Eigen::Vector2d a = act(policy, Eigen::Vector2d(state.x, state.y));
  return {a(0), a(1)};
}

double model_reward(const Eigen::Vector2d& state) { return std::clamp(state(0), 0.0, kRiverLength); }

void RolloutConfig::validate() const {
  if (horizon < 1) throw std::invalid_argument("rollout horizon must be at least 1");
  if (samples < 1) throw std::invalid_argument("rollout sample count must be at least 1");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("discount must lie in [0, 1]");
  if (initial_states.empty()) throw std::invalid_argument("rollouts need at least one initial state");
}

RolloutNoise RolloutNoise::draw(const RolloutConfig& cfg, Rng& rng) {
  cfg.validate();
  RolloutNoise n;
  std::uniform_int_distribution<std::size_t> pick(0, cfg.initial_states.size() - 1);
  for (int p = 0; p < cfg.samples; ++p) n.starts.push_back(cfg.initial_states[pick(rng)]);
  for (int i = 0; i < cfg.samples * cfg.horizon; ++i) n.transitions.push_back(TransitionNoise::draw(rng));
  return n;
}

ReturnEstimate estimate_return(const Mlp& policy, const TransitionModel& model, const RolloutConfig& cfg,
                               const RolloutNoise& noise, Eigen::VectorXd* grad) {
  cfg.validate();
  const int P = cfg.samples;
  const int T = cfg.horizon;
  if (noise.starts.size() != static_cast<std::size_t>(P) ||
      noise.transitions.size() != static_cast<std::size_t>(P * T)) {
    throw std::invalid_argument("rollout noise does not match the configuration");
  }
  const auto& at = [&](int p, int t) -> const TransitionNoise& {
    return noise.transitions[static_cast<std::size_t>(p * T + t)];
  };

  std::vector<double> discount(static_cast<std::size_t>(T + 1));
  discount[0] = 1.0;
  for (int t = 1; t <= T; ++t) discount[static_cast<std::size_t>(t)] = discount[static_cast<std::size_t>(t - 1)] * cfg.gamma;

  // Forward pass, keeping everything the reverse pass needs.
  std::vector<std::vector<Eigen::Vector2d>> states(static_cast<std::size_t>(P));
  std::vector<std::vector<Eigen::Vector2d>> actions(static_cast<std::size_t>(P));
  std::vector<std::vector<Mlp::Tape>> tapes(static_cast<std::size_t>(P));
  std::vector<std::vector<double>> rewards(static_cast<std::size_t>(P));
  ReturnEstimate out;
  out.returns.resize(static_cast<std::size_t>(P));
  for (int p = 0; p < P; ++p) {
    auto& st = states[static_cast<std::size_t>(p)];
    auto& ac = actions[static_cast<std::size_t>(p)];
    auto& tp = tapes[static_cast<std::size_t>(p)];
    auto& rw = rewards[static_cast<std::size_t>(p)];
    tp.resize(static_cast<std::size_t>(T));
    const State& s0 = noise.starts[static_cast<std::size_t>(p)];
    st.emplace_back(s0.x, s0.y);
    double ret = 0.0;
    for (int t = 0; t <= T; ++t) {
      rw.push_back(model_reward(st.back()));
      ret += discount[static_cast<std::size_t>(t)] * rw.back();
      if (t == T) break;
      ac.push_back(policy.forward(policy_input(st.back()), tp[static_cast<std::size_t>(t)]));
      st.push_back(model.sample(st[static_cast<std::size_t>(t)], ac.back(), at(p, t)));
    }
    out.returns[static_cast<std::size_t>(p)] = ret;
    out.value += ret / P;
  }
  if (grad == nullptr) return out;

  grad->setZero(policy.num_params());
  const double input_scale = 2.0 / kRiverLength;
  // Discounted reward still to come after step t, per rollout.
  std::vector<std::vector<double>> to_go(static_cast<std::size_t>(P), std::vector<double>(static_cast<std::size_t>(T + 1), 0.0));
  for (int p = 0; p < P; ++p) {
    auto& g = to_go[static_cast<std::size_t>(p)];
    for (int t = T - 1; t >= 0; --t) {
      g[static_cast<std::size_t>(t)] = g[static_cast<std::size_t>(t + 1)] +
                                       discount[static_cast<std::size_t>(t + 1)] *
                                           rewards[static_cast<std::size_t>(p)][static_cast<std::size_t>(t + 1)];
    }
  }
  for (int p = 0; p < P; ++p) {
    const auto& st = states[static_cast<std::size_t>(p)];
    const auto& ac = actions[static_cast<std::size_t>(p)];
    const auto& tp = tapes[static_cast<std::size_t>(p)];
    const auto reward_grad = [&](int t) {
      const double x = st[static_cast<std::size_t>(t)](0);
      const double inside = (x > 0.0 && x < kRiverLength) ? 1.0 : 0.0;
      return Eigen::Vector2d(discount[static_cast<std::size_t>(t)] * inside / P, 0.0);
    };
    Eigen::Vector2d d_next = reward_grad(T);
    for (int t = T - 1; t >= 0; --t) {
      double score = 0.0;
      if (cfg.mode_score_gradient && model.modes() > 1 && P > 1) {
        double others = 0.0;
        for (int q = 0; q < P; ++q)
          if (q != p) others += to_go[static_cast<std::size_t>(q)][static_cast<std::size_t>(t)];
        score = (to_go[static_cast<std::size_t>(p)][static_cast<std::size_t>(t)] - others / (P - 1)) / P;
      }
      Eigen::Vector2d d_state;
      Eigen::Vector2d d_action;
      model.backward(st[static_cast<std::size_t>(t)], ac[static_cast<std::size_t>(t)], at(p, t), d_next, score,
                     d_state, d_action);
      const Eigen::VectorXd d_in = policy.backward(tp[static_cast<std::size_t>(t)], d_action, *grad);
      d_next = d_state + input_scale * d_in + reward_grad(t);
    }
  }
  return out;
}

ReturnEstimate estimate_return(const Mlp& policy, const TransitionModel& model, const RolloutConfig& cfg, Rng& rng) {
  return estimate_return(policy, model, cfg, RolloutNoise::draw(cfg, rng));
}

PolicyTrainResult train_policy(const TransitionModel& model, const RolloutConfig& cfg,
                               const PolicyTrainConfig& train_cfg, Rng& rng) {
  cfg.validate();
  if (train_cfg.steps < 1 || !(train_cfg.learning_rate > 0.0)) {
    throw std::invalid_argument("policy training steps and learning rate must be positive");
  }
  PolicyTrainResult result;
  result.policy = make_policy_net();
  result.policy.initialize(rng);
  Eigen::VectorXd params = result.policy.params();
  Adam adam(params.size(), AdamConfig{train_cfg.learning_rate});
  Eigen::VectorXd grad;
  int consecutive = 0;
  result.return_curve.reserve(static_cast<std::size_t>(train_cfg.steps));
  for (int step = 0; step < train_cfg.steps; ++step) {
    const auto noise = RolloutNoise::draw(cfg, rng);
    const auto estimate = estimate_return(result.policy, model, cfg, noise, &grad);
    if (!std::isfinite(estimate.value) || !grad.allFinite()) {
      ++result.skipped_steps;
      result.message = "non-finite policy gradient at step " + std::to_string(step);
      if (++consecutive == 3) {
        result.aborted = true;
        break;
      }
      continue;
    }
    consecutive = 0;
    result.return_curve.push_back(estimate.value);
    adam.step(params, grad, /*maximize=*/true);
    result.policy.set_params(params);
  }
  return result;
}

double grid_coordinate(int i, int resolution) {
  return resolution == 1 ? 0.5 * kRiverLength : kRiverLength * static_cast<double>(i) / (resolution - 1);
}

std::vector<PolicyGridRow> policy_grid(const Mlp& policy, int resolution) {
  if (resolution < 1) throw std::invalid_argument("grid resolution must be at least 1");
  std::vector<PolicyGridRow> rows;
  for (int j = 0; j < resolution; ++j) {
    for (int i = 0; i < resolution; ++i) {
      const State s{grid_coordinate(i, resolution), grid_coordinate(j, resolution)};
      const Action a = act(policy, s);
      rows.push_back({s.x, s.y, a.ax, a.ay});
    }
  }
  return rows;
}

std::string policy_grid_to_csv(const std::vector<PolicyGridRow>& rows) {
  std::string out = "x,y,ax,ay\n";
  for (const auto& r : rows) {
    out += format_double(r.x) + ',' + format_double(r.y) + ',' + format_double(r.ax) + ',' + format_double(r.ay) + '\n';
  }
  return out;
}

}  // namespace dagprl

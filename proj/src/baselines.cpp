#include "dagprl/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "dagprl/adam.hpp"

namespace dagprl {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

}  // namespace

Eigen::Index PlainGpModel::num_params() const {
  Eigen::Index n = 2;
  for (const auto& g : flow) n += g.num_params();
  return n;
}

Eigen::VectorXd PlainGpModel::params() const {
  Eigen::VectorXd p(num_params());
  Eigen::Index off = 0;
  for (const auto& g : flow) {
    p.segment(off, g.num_params()) = g.params();
    off += g.num_params();
  }
  p.tail<2>() = log_noise_variance;
  return p;
}

void PlainGpModel::set_params(const Eigen::VectorXd& p) {
  if (p.size() != num_params()) throw ContractViolation("plain GP parameter vector length mismatch");
  Eigen::Index off = 0;
  for (auto& g : flow) {
    g.set_params(p.segment(off, g.num_params()));
    off += g.num_params();
  }
  log_noise_variance = p.tail<2>();
}

void PlainGpModel::validate() const {
  if (flow.size() != 2) throw ContractViolation("plain GP model needs exactly two flow GPs");
  for (const auto& g : flow)
    if (g.input_dim() != 4) throw ContractViolation("plain GP inputs must be 4-dimensional");
  if (!log_noise_variance.allFinite()) throw ContractViolation("plain GP noise must be finite");
}

double plain_gp_elbo(const PlainGpModel& model, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& outputs,
                     double data_scale, Eigen::VectorXd* grad) {
  double data = 0.0;
  double kl = 0.0;
  if (grad != nullptr) grad->setZero(model.num_params());
  Eigen::Index off = 0;
  for (int d = 0; d < 2; ++d) {
    const auto& gp = model.flow[static_cast<std::size_t>(d)];
    const GpBatchEvaluation eval(gp, inputs);
    const double s2 = std::exp(model.log_noise_variance(d));
    const Eigen::ArrayXd r = outputs.col(d).array() - eval.mean().array();
    const Eigen::ArrayXd expected_sq = r.square() + eval.variance().array();
    data += (-0.5 * kLog2Pi - 0.5 * model.log_noise_variance(d) - 0.5 * expected_sq / s2).sum();
    kl += gp.kl_to_prior();
    if (grad != nullptr) {
      auto seg = grad->segment(off, gp.num_params());
      const Eigen::VectorXd d_mean = data_scale * (r / s2).matrix();
      const Eigen::VectorXd d_var = Eigen::VectorXd::Constant(inputs.rows(), -0.5 * data_scale / s2);
      eval.backward(d_mean, d_var, seg);
      gp.kl_backward(-1.0, seg);
      (*grad)(grad->size() - 2 + d) =
          data_scale * (-0.5 * static_cast<double>(inputs.rows()) + 0.5 * expected_sq.sum() / s2);
    }
    off += gp.num_params();
  }
  return data_scale * data - kl;
}

PlainGpTrainResult train_plain_gp(const TransitionDataset& data, const PlainGpTrainConfig& config) {
  if (data.size() == 0) throw std::invalid_argument("empty dataset");
  if (config.iterations < 1 || config.minibatch < 1 || config.inducing < 1 || !(config.learning_rate > 0.0)) {
    throw std::invalid_argument("plain GP training configuration values must be positive");
  }
  Rng rng(config.seed);
  // The flow/noise layout mirrors a one-mode DAGP initialization.
  DagpTrainConfig init;
  init.modes = 1;
  init.inducing = config.inducing;
  init.initial_factor_scale = config.initial_factor_scale;
  const DagpModel seed_model = initial_model(data, init, rng);
  PlainGpTrainResult result;
  result.model.standardizer = seed_model.standardizer;
  result.model.flow = seed_model.flow;
  const auto sd = standardize(result.model.standardizer, data);
  const Eigen::Index n = sd.inputs.rows();
  const Eigen::Index batch = std::min<Eigen::Index>(config.minibatch, n);
  const double scale = static_cast<double>(n) / static_cast<double>(batch);

  Eigen::VectorXd params = result.model.params();
  Eigen::VectorXd last_finite = params;
  Adam adam(params.size(), AdamConfig{config.learning_rate});
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::size_t cursor = order.size();
  Eigen::MatrixXd bx(batch, 4), by(batch, 2);
  Eigen::VectorXd grad;
  for (int it = 0; it < config.iterations; ++it) {
    for (Eigen::Index i = 0; i < batch; ++i) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const Eigen::Index row = order[cursor++];
      bx.row(i) = sd.inputs.row(row);
      by.row(i) = sd.outputs.row(row);
    }
    double value = 0.0;
    try {
      value = plain_gp_elbo(result.model, bx, by, scale, &grad);
    } catch (const NumericalError& e) {
      result.message = e.what();
      value = std::numeric_limits<double>::quiet_NaN();
    }
    if (!std::isfinite(value) || !grad.allFinite()) {
      result.model.set_params(last_finite);
      result.aborted = true;
      if (result.message.empty()) result.message = "non-finite bound at iteration " + std::to_string(it);
      break;
    }
    result.elbo_curve.push_back(value);
    last_finite = params;
    adam.step(params, grad, /*maximize=*/true);
    result.model.set_params(params);
  }
  return result;
}

PlainGpTransition::PlainGpTransition(const PlainGpModel& model) : model_(model) {
  model_.validate();
  for (const auto& g : model_.flow) flow_.emplace_back(g);
}

Eigen::Vector2d PlainGpTransition::mean(const Eigen::Vector2d& state, const Eigen::Vector2d& action) const {
  const Eigen::Vector4d input = model_.standardizer.input(state, action);
  return model_.standardizer.unstandardize_output(
      Eigen::Vector2d(flow_[0].predict(input).mean, flow_[1].predict(input).mean));
}

Eigen::Vector2d PlainGpTransition::sample(const Eigen::Vector2d& state, const Eigen::Vector2d& action,
                                          const TransitionNoise& noise, int* mode) const {
  if (mode != nullptr) *mode = 0;
  const Eigen::Vector4d input = model_.standardizer.input(state, action);
  Eigen::Vector2d out;
  for (int d = 0; d < 2; ++d) {
    const auto f = flow_[static_cast<std::size_t>(d)].predict(input);
    out(d) = f.mean + std::sqrt(f.variance) * noise.flow(d) +
             std::exp(0.5 * model_.log_noise_variance(d)) * noise.observation(d);
  }
  return model_.standardizer.unstandardize_output(out);
}

void PlainGpTransition::backward(const Eigen::Vector2d& state, const Eigen::Vector2d& action,
                                 const TransitionNoise& noise, const Eigen::Vector2d& d_next, double /*score_weight*/,
                                 Eigen::Vector2d& d_state, Eigen::Vector2d& d_action) const {
  const auto& stdz = model_.standardizer;
  const Eigen::Vector4d input = stdz.input(state, action);
  const Eigen::Vector2d d_out = d_next.cwiseProduct(stdz.output_scale);
  Eigen::VectorXd d_input = Eigen::VectorXd::Zero(4);
  for (int d = 0; d < 2; ++d) {
    const auto& fp = flow_[static_cast<std::size_t>(d)];
    const double sd = std::sqrt(fp.predict(input).variance);
    d_input += fp.input_gradient(input, d_out(d), d_out(d) * noise.flow(d) / (2.0 * sd));
  }
  const Eigen::Vector4d d_raw = d_input.cwiseQuotient(stdz.input_scale);
  d_state = d_raw.head<2>();
  d_action = d_raw.tail<2>();
}

ActionGrid default_action_grid() {
  ActionGrid grid;
  for (double ax : {-1.0, 0.0, 1.0})
    for (double ay : {-1.0, 0.0, 1.0}) grid.push_back({ax, ay});
  return grid;
}

Mlp make_q_network() { return Mlp({4, 10, 1}, {Activation::kSigmoid, Activation::kSigmoid}); }

Eigen::RowVector4d q_features(const State& s, const Action& a) {
  return {s.x / (0.5 * kRiverLength) - 1.0, s.y / (0.5 * kRiverWidth) - 1.0, a.ax, a.ay};
}

double QNet::value(const State& s, const Action& a) const {
  return value_offset + value_scale * net.forward(q_features(s, a).transpose())(0);
}

Eigen::VectorXd QNet::values(const Eigen::MatrixXd& features) const {
  return (value_scale * net.forward_batch(features).col(0)).array() + value_offset;
}

Eigen::VectorXd nfq_targets(const QNet& q, const TransitionDataset& data, const ActionGrid& grid, double gamma) {
  if (grid.empty()) throw std::invalid_argument("action grid must not be empty");
  const auto n = static_cast<Eigen::Index>(data.size());
  Eigen::VectorXd best = Eigen::VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
  Eigen::MatrixXd features(n, 4);
  for (const auto& a : grid) {
    for (Eigen::Index i = 0; i < n; ++i) features.row(i) = q_features(data.records[static_cast<std::size_t>(i)].next_state, a);
    best = best.cwiseMax(q.values(features));
  }
  Eigen::VectorXd targets(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    targets(i) = reward(data.records[static_cast<std::size_t>(i)].next_state) + (gamma == 0.0 ? 0.0 : gamma * best(i));
  }
  return targets;
}

namespace {

/// Full-batch resilient backpropagation (iRprop-) on the mean squared error
/// of scaled targets. Returns the final loss.
double fit_q(Mlp& net, const Eigen::MatrixXd& features, const Eigen::VectorXd& targets, const NfqConfig& cfg) {
  const Eigen::Index n = features.rows();
  Eigen::VectorXd params = net.params();
  Eigen::VectorXd step = Eigen::VectorXd::Constant(params.size(), 0.01);
  Eigen::VectorXd prev_grad = Eigen::VectorXd::Zero(params.size());
  Eigen::VectorXd grad(params.size());
  Mlp::BatchTape tape;
  std::vector<double> history;
  for (int it = 0; it < cfg.max_fit_steps; ++it) {
    const Eigen::VectorXd residual = net.forward_batch(features, tape).col(0) - targets;
    const double loss = residual.squaredNorm() / static_cast<double>(n);
    if (!std::isfinite(loss)) return loss;
    history.push_back(loss);
    if (history.size() > 50 && history[history.size() - 51] - loss < cfg.fit_tolerance * history[history.size() - 51]) {
      return loss;
    }
    grad.setZero();
    net.backward_batch(tape, (2.0 / static_cast<double>(n)) * residual, grad);
    for (Eigen::Index i = 0; i < params.size(); ++i) {
      const double sign_change = grad(i) * prev_grad(i);
      if (sign_change > 0.0) {
        step(i) = std::min(step(i) * 1.2, 1.0);
      } else if (sign_change < 0.0) {
        step(i) = std::max(step(i) * 0.5, 1e-8);
        grad(i) = 0.0;
      }
      if (grad(i) > 0.0) params(i) -= step(i);
      else if (grad(i) < 0.0) params(i) += step(i);
    }
    prev_grad = grad;
    net.set_params(params);
  }
  return (net.forward_batch(features).col(0) - targets).squaredNorm() / static_cast<double>(n);
}

}  // namespace

NfqResult nfq_train(const TransitionDataset& data, const NfqConfig& config) {
  if (data.size() == 0) throw std::invalid_argument("empty dataset");
  if (config.iterations < 1 || config.max_fit_steps < 1 || !(config.gamma >= 0.0 && config.gamma < 1.0)) {
    throw std::invalid_argument("NFQ needs positive iteration counts and a discount in [0, 1)");
  }
  if (config.grid.empty()) throw std::invalid_argument("action grid must not be empty");
  Rng rng(config.seed);
  NfqResult result;
  result.q.net = make_q_network();
  result.q.net.initialize(rng);
  result.q.value_scale = kRiverLength / (1.0 - config.gamma);
  const auto n = static_cast<Eigen::Index>(data.size());
  Eigen::MatrixXd features(n, 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = data.records[static_cast<std::size_t>(i)];
    features.row(i) = q_features(t.state, t.action);
  }
  for (int it = 0; it < config.iterations; ++it) {
    const Eigen::VectorXd targets =
        (nfq_targets(result.q, data, config.grid, config.gamma).array() - result.q.value_offset) / result.q.value_scale;
    const double loss = fit_q(result.q.net, features, targets, config);
    if (!std::isfinite(loss) || !result.q.net.params().allFinite()) {
      result.aborted = true;
      result.message = "Q fit diverged at iteration " + std::to_string(it);
      break;
    }
    result.fit_losses.push_back(loss * result.q.value_scale * result.q.value_scale);
  }
  return result;
}

Action nfq_act(const QNet& q, const State& state, const ActionGrid& grid) {
  if (grid.empty()) throw std::invalid_argument("action grid must not be empty");
  std::size_t best = 0;
  double best_value = q.value(state, grid[0]);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double v = q.value(state, grid[i]);
    if (v > best_value) {
      best = i;
      best_value = v;
    }
  }
  return grid[best];
}

}  // namespace dagprl

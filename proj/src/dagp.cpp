#include "dagprl/dagp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dagprl/adam.hpp"
#include "dagprl/csv.hpp"

namespace dagprl {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

double log_sum_exp(const Eigen::VectorXd& v) {
  const double mx = v.maxCoeff();
  return mx + std::log((v.array() - mx).exp().sum());
}

Eigen::MatrixXd random_subset_rows(const Eigen::MatrixXd& x, Eigen::Index m, Rng& rng) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(x.rows()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  Eigen::MatrixXd out(m, x.cols());
  for (Eigen::Index i = 0; i < m; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, x.rows() - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
    out.row(i) = x.row(idx[static_cast<std::size_t>(i)]);
  }
  return out;
}

}  // namespace

Standardizer Standardizer::fit(const TransitionDataset& data) {
  const auto n = static_cast<double>(data.size());
  Eigen::Vector4d sum_in = Eigen::Vector4d::Zero(), sq_in = Eigen::Vector4d::Zero();
  Eigen::Vector2d sum_out = Eigen::Vector2d::Zero(), sq_out = Eigen::Vector2d::Zero();
  for (const auto& t : data.records) {
    const Eigen::Vector4d in(t.state.x, t.state.y, t.action.ax, t.action.ay);
    const Eigen::Vector2d out(t.next_state.x, t.next_state.y);
    sum_in += in;
    sq_in += in.cwiseAbs2();
    sum_out += out;
    sq_out += out.cwiseAbs2();
  }
  Standardizer s;
  s.input_mean = sum_in / n;
  s.output_mean = sum_out / n;
  const Eigen::Vector4d var_in = (sq_in / n - s.input_mean.cwiseAbs2()).cwiseMax(0.0);
  const Eigen::Vector2d var_out = (sq_out / n - s.output_mean.cwiseAbs2()).cwiseMax(0.0);
  for (int i = 0; i < 4; ++i) s.input_scale(i) = var_in(i) > 1e-12 ? std::sqrt(var_in(i)) : 1.0;
  for (int i = 0; i < 2; ++i) s.output_scale(i) = var_out(i) > 1e-12 ? std::sqrt(var_out(i)) : 1.0;
  return s;
}

Eigen::Vector4d Standardizer::input(const Eigen::Vector2d& state, const Eigen::Vector2d& action) const {
  const Eigen::Vector4d raw(state(0), state(1), action(0), action(1));
  return (raw - input_mean).cwiseQuotient(input_scale);
}

Eigen::Vector2d Standardizer::output(const Eigen::Vector2d& next_state) const {
  return (next_state - output_mean).cwiseQuotient(output_scale);
}

Eigen::Vector2d Standardizer::unstandardize_output(const Eigen::Vector2d& standardized) const {
  return standardized.cwiseProduct(output_scale) + output_mean;
}

StandardizedData standardize(const Standardizer& s, const TransitionDataset& data) {
  const auto n = static_cast<Eigen::Index>(data.size());
  StandardizedData out{Eigen::MatrixXd(n, 4), Eigen::MatrixXd(n, 2)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = data.records[static_cast<std::size_t>(i)];
    out.inputs.row(i) =
        s.input(Eigen::Vector2d(t.state.x, t.state.y), Eigen::Vector2d(t.action.ax, t.action.ay)).transpose();
    out.outputs.row(i) = s.output(Eigen::Vector2d(t.next_state.x, t.next_state.y)).transpose();
  }
  return out;
}

std::vector<const SparseGp*> DagpModel::gps() const {
  std::vector<const SparseGp*> out;
  for (const auto& g : flow) out.push_back(&g);
  for (const auto& g : noise) out.push_back(&g);
  for (const auto& g : assign) out.push_back(&g);
  return out;
}

std::vector<SparseGp*> DagpModel::gps() {
  std::vector<SparseGp*> out;
  for (auto& g : flow) out.push_back(&g);
  for (auto& g : noise) out.push_back(&g);
  for (auto& g : assign) out.push_back(&g);
  return out;
}

Eigen::Index DagpModel::num_params() const {
  Eigen::Index n = 0;
  for (const auto* g : gps()) n += g->num_params();
  return n;
}

Eigen::VectorXd DagpModel::params() const {
  Eigen::VectorXd p(num_params());
  Eigen::Index off = 0;
  for (const auto* g : gps()) {
    p.segment(off, g->num_params()) = g->params();
    off += g->num_params();
  }
  return p;
}

void DagpModel::set_params(const Eigen::VectorXd& p) {
  if (p.size() != num_params()) throw ContractViolation("DAGP parameter vector length mismatch");
  Eigen::Index off = 0;
  for (auto* g : gps()) {
    g->set_params(p.segment(off, g->num_params()));
    off += g->num_params();
  }
}

void DagpModel::validate() const {
  if (modes < 1 || modes > kMaxModes) throw ContractViolation("mode count out of range");
  const auto k = static_cast<std::size_t>(modes);
  if (flow.size() != 2 * k || noise.size() != 2 * k || assign.size() != (modes > 1 ? k : 0)) {
    throw ContractViolation("DAGP GP count does not match the mode count");
  }
  for (const auto* g : gps()) {
    if (g->input_dim() != 4) throw ContractViolation("DAGP GPs must take 4-dimensional inputs");
  }
  if (!(noise_floor > 0.0)) throw ContractViolation("noise floor must be positive");
}

Eigen::VectorXd mode_probabilities(const Eigen::VectorXd& logits) {
  const Eigen::ArrayXd e = (logits.array() - logits.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

ElboNoise ElboNoise::draw(const DagpModel& model, Eigen::Index batch, int samples, Rng& rng) {
  ElboNoise out;
  const auto count = model.gps().size();
  out.draws.reserve(count);
  for (std::size_t g = 0; g < count; ++g) {
    Eigen::MatrixXd m(batch, samples);
    for (Eigen::Index j = 0; j < samples; ++j)
      for (Eigen::Index i = 0; i < batch; ++i) m(i, j) = standard_normal(rng);
    out.draws.push_back(std::move(m));
  }
  return out;
}

double elbo(const DagpModel& model, const Eigen::MatrixXd& batch_beliefs, const Eigen::MatrixXd& inputs,
            const Eigen::MatrixXd& outputs, const ElboNoise& noise, double data_scale, Eigen::VectorXd* grad) {
  const int k_modes = model.modes;
  const Eigen::Index batch = inputs.rows();
  const auto gps = model.gps();
  const std::size_t n_gp = gps.size();
  if (noise.draws.size() != n_gp) throw ContractViolation("ELBO noise does not match the GP count");
  if (batch_beliefs.rows() != batch || batch_beliefs.cols() != k_modes || outputs.rows() != batch) {
    throw ContractViolation("ELBO batch shapes disagree");
  }
  const Eigen::Index samples = noise.draws[0].cols();
  const double inv_s = 1.0 / static_cast<double>(samples);

  std::vector<GpBatchEvaluation> evals;
  evals.reserve(n_gp);
  std::vector<Eigen::VectorXd> sd(n_gp);
  for (std::size_t g = 0; g < n_gp; ++g) {
    evals.emplace_back(*gps[g], inputs);
    sd[g] = evals.back().variance().cwiseSqrt();
  }
  const auto flow_index = [](int k, int d) { return static_cast<std::size_t>(2 * k + d); };
  const auto noise_index = [&](int k, int d) { return static_cast<std::size_t>(2 * k_modes + 2 * k + d); };
  const auto assign_index = [&](int k) { return static_cast<std::size_t>(4 * k_modes + k); };

  std::vector<Eigen::VectorXd> d_mean(n_gp, Eigen::VectorXd::Zero(batch));
  std::vector<Eigen::VectorXd> d_var(n_gp, Eigen::VectorXd::Zero(batch));
  const bool want_grad = grad != nullptr;

  double data_term = 0.0;
  Eigen::VectorXd lambda(k_modes);
  for (Eigen::Index t = 0; t < batch; ++t) {
    for (Eigen::Index s = 0; s < samples; ++s) {
      double lse = 0.0;
      Eigen::VectorXd p;
      if (k_modes > 1) {
        for (int k = 0; k < k_modes; ++k) {
          const auto g = assign_index(k);
          lambda(k) = evals[g].mean()(t) + sd[g](t) * noise.draws[g](t, s);
        }
        lse = log_sum_exp(lambda);
        p = (lambda.array() - lse).exp().matrix();
      }
      double belief_sum = 0.0;
      for (int k = 0; k < k_modes; ++k) {
        const double w = batch_beliefs(t, k);
        belief_sum += w;
        if (w == 0.0) continue;
        double term = 0.0;
        for (int d = 0; d < 2; ++d) {
          const auto fi = flow_index(k, d);
          const auto gi = noise_index(k, d);
          const double ef = noise.draws[fi](t, s);
          const double eg = noise.draws[gi](t, s);
          const double f = evals[fi].mean()(t) + sd[fi](t) * ef;
          const double g = evals[gi].mean()(t) + sd[gi](t) * eg;
          const double raw_sigma = std::exp(g);
          const bool floored = raw_sigma < model.noise_floor;
          const double sigma = floored ? model.noise_floor : raw_sigma;
          const double r = outputs(t, d) - f;
          const double z = r / sigma;
          term += -0.5 * kLog2Pi - std::log(sigma) - 0.5 * z * z;
          if (want_grad) {
            const double c = w * inv_s;
            const double df = c * z / sigma;
            const double dg = floored ? 0.0 : c * (z * z - 1.0);  // d/dsigma * sigma
            d_mean[fi](t) += df;
            d_var[fi](t) += df * ef / (2.0 * sd[fi](t));
            d_mean[gi](t) += dg;
            d_var[gi](t) += dg * eg / (2.0 * sd[gi](t));
          }
        }
        if (k_modes > 1) term += lambda(k) - lse;
        data_term += w * inv_s * term;
      }
      if (want_grad && k_modes > 1) {
        for (int j = 0; j < k_modes; ++j) {
          const auto g = assign_index(j);
          const double dl = inv_s * (batch_beliefs(t, j) - p(j) * belief_sum);
          d_mean[g](t) += dl;
          d_var[g](t) += dl * noise.draws[g](t, s) / (2.0 * sd[g](t));
        }
      }
    }
    for (int k = 0; k < k_modes; ++k) {
      const double w = batch_beliefs(t, k);
      if (w > 0.0) data_term -= w * std::log(w);
    }
  }

  double kl = 0.0;
  for (const auto* g : gps) kl += g->kl_to_prior();

  if (want_grad) {
    grad->setZero(model.num_params());
    Eigen::Index off = 0;
    for (std::size_t g = 0; g < n_gp; ++g) {
      const Eigen::Index n = gps[g]->num_params();
      auto seg = grad->segment(off, n);
      evals[g].backward(data_scale * d_mean[g], data_scale * d_var[g], seg);
      gps[g]->kl_backward(-1.0, seg);
      off += n;
    }
  }
  return data_scale * data_term - kl;
}

double elbo(const DagpModel& model, const ModeBeliefs& beliefs, const TransitionDataset& data, int samples,
            Rng& rng) {
  const auto sd = standardize(model.standardizer, data);
  const auto noise = ElboNoise::draw(model, sd.inputs.rows(), samples, rng);
  return elbo(model, beliefs.probs, sd.inputs, sd.outputs, noise, 1.0);
}

ModeBeliefs update_beliefs(const DagpModel& model, const StandardizedData& data) {
  const int k_modes = model.modes;
  const Eigen::Index n = data.inputs.rows();
  Eigen::MatrixXd log_q = Eigen::MatrixXd::Zero(n, k_modes);
  if (k_modes > 1) {
    Eigen::MatrixXd logits(n, k_modes);
    for (int k = 0; k < k_modes; ++k) logits.col(k) = model.assign[static_cast<std::size_t>(k)].predict(data.inputs).mean;
    for (Eigen::Index t = 0; t < n; ++t) {
      const double lse = log_sum_exp(logits.row(t).transpose());
      log_q.row(t) = logits.row(t).array() - lse;
    }
  }
  for (int k = 0; k < k_modes; ++k) {
    for (int d = 0; d < 2; ++d) {
      const auto f = model.flow[static_cast<std::size_t>(2 * k + d)].predict(data.inputs).mean;
      const auto g = model.noise[static_cast<std::size_t>(2 * k + d)].predict(data.inputs).mean;
      for (Eigen::Index t = 0; t < n; ++t) {
        const double sigma = std::max(std::exp(g(t)), model.noise_floor);
        const double z = (data.outputs(t, d) - f(t)) / sigma;
        log_q(t, k) += -0.5 * kLog2Pi - std::log(sigma) - 0.5 * z * z;
      }
    }
  }
  ModeBeliefs out{Eigen::MatrixXd(n, k_modes)};
  for (Eigen::Index t = 0; t < n; ++t) {
    const double lse = log_sum_exp(log_q.row(t).transpose());
    out.probs.row(t) = (log_q.row(t).array() - lse).exp();
  }
  return out;
}

ModeBeliefs update_beliefs(const DagpModel& model, const TransitionDataset& data) {
  return update_beliefs(model, standardize(model.standardizer, data));
}

DagpModel initial_model(const TransitionDataset& data, const DagpTrainConfig& config, Rng& rng) {
  if (config.modes < 1 || config.modes > kMaxModes) throw ContractViolation("mode count out of range");
  DagpModel model;
  model.modes = config.modes;
  model.noise_floor = config.noise_floor;
  model.standardizer = Standardizer::fit(data);
  const auto sd = standardize(model.standardizer, data);
  const Eigen::Index m = std::min<Eigen::Index>(config.inducing, sd.inputs.rows());
  const auto make = [&](double mean_function) {
    SparseGp gp(KernelParams::from_positive(1.0, Eigen::VectorXd::Ones(4)), random_subset_rows(sd.inputs, m, rng),
                mean_function);
    gp.set_whitened_posterior(Eigen::VectorXd::Zero(m),
                              config.initial_factor_scale * Eigen::MatrixXd::Identity(m, m));
    return gp;
  };
  for (int k = 0; k < config.modes; ++k)
    for (int d = 0; d < 2; ++d) model.flow.push_back(make(0.0));
  for (int k = 0; k < config.modes; ++k)
    for (int d = 0; d < 2; ++d) model.noise.push_back(make(std::log(0.5)));
  if (config.modes > 1)
    for (int k = 0; k < config.modes; ++k) model.assign.push_back(make(0.0));
  return model;
}

namespace {

ModeBeliefs initial_beliefs(const TransitionDataset& data, const DagpTrainConfig& config, Rng& rng) {
  const auto n = static_cast<Eigen::Index>(data.size());
  const int k_modes = config.modes;
  ModeBeliefs b{Eigen::MatrixXd(n, k_modes)};
  for (Eigen::Index t = 0; t < n; ++t) {
    Eigen::VectorXd row(k_modes);
    for (int k = 0; k < k_modes; ++k) row(k) = 1.0 / k_modes + uniform(rng, -0.01, 0.01);
    const auto& tr = data.records[static_cast<std::size_t>(t)];
    if (config.heuristic_belief_init && k_modes == 2 && tr.next_state == State{0.0, 0.0} && tr.state.x > 2.0) {
      row(DagpModel::kStay) = 0.1;
      row(DagpModel::kFall) = 0.9;
    }
    b.probs.row(t) = row.transpose() / row.sum();
  }
  return b;
}

}  // namespace

void label_modes(DagpModel& model, ModeBeliefs& beliefs, const TransitionDataset& data) {
  if (model.modes != 2) return;
  Eigen::Vector2d dist = Eigen::Vector2d::Zero();
  Eigen::Vector2d mass = Eigen::Vector2d::Zero();
  for (std::size_t t = 0; t < data.size(); ++t) {
    const auto& ns = data.records[t].next_state;
    const double r = std::hypot(ns.x, ns.y);
    for (int k = 0; k < 2; ++k) {
      dist(k) += beliefs.probs(static_cast<Eigen::Index>(t), k) * r;
      mass(k) += beliefs.probs(static_cast<Eigen::Index>(t), k);
    }
  }
  const double c0 = mass(0) > 0 ? dist(0) / mass(0) : 0.0;
  const double c1 = mass(1) > 0 ? dist(1) / mass(1) : 0.0;
  if (c1 <= c0) return;
  std::swap(model.flow[0], model.flow[2]);
  std::swap(model.flow[1], model.flow[3]);
  std::swap(model.noise[0], model.noise[2]);
  std::swap(model.noise[1], model.noise[3]);
  std::swap(model.assign[0], model.assign[1]);
  beliefs.probs.col(0).swap(beliefs.probs.col(1));
}

DagpTrainResult train(const TransitionDataset& data, const DagpTrainConfig& config) {
  if (data.size() == 0) throw std::invalid_argument("empty dataset");
  if (config.iterations < 1 || config.minibatch < 1 || config.samples < 1 || config.inducing < 1 ||
      config.belief_interval < 1 || !(config.learning_rate > 0.0)) {
    throw std::invalid_argument("DAGP training configuration values must be positive");
  }
  Rng rng(config.seed);
  DagpTrainResult result;
  result.model = initial_model(data, config, rng);
  result.beliefs = initial_beliefs(data, config, rng);
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

  Eigen::MatrixXd bx(batch, 4), by(batch, 2), bq(batch, config.modes);
  Eigen::VectorXd grad;
  result.elbo_curve.reserve(static_cast<std::size_t>(config.iterations));
  for (int it = 0; it < config.iterations; ++it) {
    for (Eigen::Index i = 0; i < batch; ++i) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const Eigen::Index row = order[cursor++];
      bx.row(i) = sd.inputs.row(row);
      by.row(i) = sd.outputs.row(row);
      bq.row(i) = result.beliefs.probs.row(row);
    }
    const auto noise = ElboNoise::draw(result.model, batch, config.samples, rng);
    double value = 0.0;
    try {
      value = elbo(result.model, bq, bx, by, noise, scale, &grad);
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
    if ((it + 1) % config.belief_interval == 0) result.beliefs = update_beliefs(result.model, sd);
  }
  result.beliefs = update_beliefs(result.model, sd);
  label_modes(result.model, result.beliefs, data);
  return result;
}

DagpTransition::DagpTransition(const DagpModel& model) : model_(model) {
  model_.validate();
  for (const auto& g : model_.flow) flow_.emplace_back(g);
  for (const auto& g : model_.noise) noise_.emplace_back(g);
  for (const auto& g : model_.assign) assign_.emplace_back(g);
}

Eigen::VectorXd DagpTransition::assignment_probabilities(const Eigen::Vector4d& input,
                                                         const TransitionNoise& noise) const {
  Eigen::VectorXd lambda(model_.modes);
  if (model_.modes == 1) return Eigen::VectorXd::Ones(1);
  for (int k = 0; k < model_.modes; ++k) {
    const auto r = assign_[static_cast<std::size_t>(k)].predict(input);
    lambda(k) = r.mean + std::sqrt(r.variance) * noise.assignment[static_cast<std::size_t>(k)];
  }
  return mode_probabilities(lambda);
}

int DagpTransition::select_mode(const Eigen::Vector4d& input, const TransitionNoise& noise) const {
  if (model_.modes == 1) return 0;
  const Eigen::VectorXd p = assignment_probabilities(input, noise);
  double cumulative = 0.0;
  for (int k = 0; k < model_.modes - 1; ++k) {
    cumulative += p(k);
    if (noise.mode_uniform < cumulative) return k;
  }
  return model_.modes - 1;
}

double DagpTransition::mean_noise(const Eigen::Vector4d& input, int mode, int dim) const {
  const auto r = noise_[static_cast<std::size_t>(2 * mode + dim)].predict(input);
  return std::max(std::exp(r.mean), model_.noise_floor);
}

Eigen::Vector2d DagpTransition::sample_in_mode(const Eigen::Vector2d& state, const Eigen::Vector2d& action,
                                               const TransitionNoise& noise, int mode) const {
  const Eigen::Vector4d input = model_.standardizer.input(state, action);
  Eigen::Vector2d out;
  for (int d = 0; d < 2; ++d) {
    const auto f = flow_[static_cast<std::size_t>(2 * mode + d)].predict(input);
    const auto g = noise_[static_cast<std::size_t>(2 * mode + d)].predict(input);
    const double f_sample = f.mean + std::sqrt(f.variance) * noise.flow(d);
    const double g_sample = g.mean + std::sqrt(g.variance) * noise.log_noise(d);
    const double sigma = std::max(std::exp(g_sample), model_.noise_floor);
    out(d) = f_sample + sigma * noise.observation(d);
  }
  return model_.standardizer.unstandardize_output(out);
}

Eigen::Vector2d DagpTransition::sample(const Eigen::Vector2d& state, const Eigen::Vector2d& action,
                                       const TransitionNoise& noise, int* mode) const {
  const int k = select_mode(model_.standardizer.input(state, action), noise);
  if (mode != nullptr) *mode = k;
  return sample_in_mode(state, action, noise, k);
}

void DagpTransition::backward(const Eigen::Vector2d& state, const Eigen::Vector2d& action,
                              const TransitionNoise& noise, const Eigen::Vector2d& d_next, double score_weight,
                              Eigen::Vector2d& d_state, Eigen::Vector2d& d_action) const {
  const auto& stdz = model_.standardizer;
  const Eigen::Vector4d input = stdz.input(state, action);
  const int mode = select_mode(input, noise);
  const Eigen::Vector2d d_out = d_next.cwiseProduct(stdz.output_scale);
  Eigen::VectorXd d_input = Eigen::VectorXd::Zero(4);
  for (int d = 0; d < 2; ++d) {
    const auto& fp = flow_[static_cast<std::size_t>(2 * mode + d)];
    const auto& gp = noise_[static_cast<std::size_t>(2 * mode + d)];
    const auto f = fp.predict(input);
    const auto g = gp.predict(input);
    const double f_sd = std::sqrt(f.variance);
    const double g_sd = std::sqrt(g.variance);
    const double g_sample = g.mean + g_sd * noise.log_noise(d);
    const double raw_sigma = std::exp(g_sample);
    const double df = d_out(d);
    d_input += fp.input_gradient(input, df, df * noise.flow(d) / (2.0 * f_sd));
    if (raw_sigma >= model_.noise_floor) {
      const double dg = d_out(d) * noise.observation(d) * raw_sigma;
      d_input += gp.input_gradient(input, dg, dg * noise.log_noise(d) / (2.0 * g_sd));
    }
  }
  if (score_weight != 0.0 && model_.modes > 1) {
    Eigen::VectorXd lambda(model_.modes);
    Eigen::VectorXd sds(model_.modes);
    for (int k = 0; k < model_.modes; ++k) {
      const auto r = assign_[static_cast<std::size_t>(k)].predict(input);
      sds(k) = std::sqrt(r.variance);
      lambda(k) = r.mean + sds(k) * noise.assignment[static_cast<std::size_t>(k)];
    }
    const Eigen::VectorXd p = mode_probabilities(lambda);
    for (int j = 0; j < model_.modes; ++j) {
      const double dl = score_weight * ((j == mode ? 1.0 : 0.0) - p(j));
      d_input += assign_[static_cast<std::size_t>(j)].input_gradient(
          input, dl, dl * noise.assignment[static_cast<std::size_t>(j)] / (2.0 * sds(j)));
    }
  }
  const Eigen::Vector4d d_raw = d_input.cwiseQuotient(stdz.input_scale);
  d_state = d_raw.head<2>();
  d_action = d_raw.tail<2>();
}

Eigen::Vector2d sample_next_state(const DagpModel& model, const State& state, const Action& action,
                                  const TransitionNoise& noise, std::optional<int> forced_mode) {
  const DagpTransition sampler(model);
  const Eigen::Vector2d s(state.x, state.y);
  const Eigen::Vector2d a(action.ax, action.ay);
  if (forced_mode) return sampler.sample_in_mode(s, a, noise, *forced_mode);
  return sampler.sample(s, a, noise);
}

std::vector<GridRow> export_grids(const DagpModel& model, int resolution, std::uint64_t seed) {
  if (resolution < 1) throw std::invalid_argument("grid resolution must be at least 1");
  const DagpTransition sampler(model);
  Rng rng = make_rng(seed, streams::kGrid);
  const auto coord = [&](int i) {
    return resolution == 1 ? 2.5 : kRiverLength * static_cast<double>(i) / (resolution - 1);
  };
  constexpr int kLambdaDraws = 100;
  std::vector<GridRow> rows;
  rows.reserve(static_cast<std::size_t>(resolution * resolution));
  for (int j = 0; j < resolution; ++j) {
    for (int i = 0; i < resolution; ++i) {
      const double x = coord(i);
      const double y = coord(j);
      const Eigen::Vector4d input = model.standardizer.input(Eigen::Vector2d(x, y), Eigen::Vector2d::Zero());
      double p_fall = 0.0;
      if (model.modes > 1) {
        for (int s = 0; s < kLambdaDraws; ++s) {
          TransitionNoise noise;
          for (auto& a : noise.assignment) a = standard_normal(rng);
          p_fall += sampler.assignment_probabilities(input, noise)(DagpModel::kFall);
        }
        p_fall /= kLambdaDraws;
      }
      const double sigma = sampler.mean_noise(input, DagpModel::kStay, 0) * model.standardizer.output_scale(0);
      rows.push_back({x, y, p_fall, sigma});
    }
  }
  return rows;
}

std::string grids_to_csv(const std::vector<GridRow>& rows) {
  std::string out = "x,y,p_fall,sigma_x_stay\n";
  for (const auto& r : rows) {
    out += format_double(r.x) + ',' + format_double(r.y) + ',' + format_double(r.p_fall) + ',' +
           format_double(r.sigma_x_stay) + '\n';
  }
  return out;
}

std::string beliefs_to_csv(const ModeBeliefs& beliefs) {
  std::string out = "index,belief_stay,belief_fall\n";
  for (Eigen::Index t = 0; t < beliefs.probs.rows(); ++t) {
    const double stay = beliefs.probs(t, 0);
    const double fall = beliefs.probs.cols() > 1 ? beliefs.probs(t, 1) : 0.0;
    out += std::to_string(t) + ',' + format_double(stay) + ',' + format_double(fall) + '\n';
  }
  return out;
}

}  // namespace dagprl

#include <cmath>

#include <gtest/gtest.h>

#include "dagprl/dagp.hpp"
#include "dagprl/mlp.hpp"
#include "dagprl/policy.hpp"
#include "finite_difference.hpp"
#include "test_models.hpp"

namespace dagprl {
namespace {

using testing::central_difference;
using testing::max_relative_error;

Mlp random_policy(Rng& rng, double scale) {
  Mlp net = make_policy_net();
  Eigen::VectorXd p(net.num_params());
  for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = scale * standard_normal(rng);
  net.set_params(p);
  return net;
}

/// Always lands on (2, y): reward 2 at every step and no dependence on the action.
class ConstantModel : public TransitionModel {
 public:
  int modes() const override { return 1; }
  Eigen::Vector2d sample(const Eigen::Vector2d& state, const Eigen::Vector2d&, const TransitionNoise&,
                         int* mode) const override {
    if (mode != nullptr) *mode = 0;
    return {2.0, state(1)};
  }
  void backward(const Eigen::Vector2d&, const Eigen::Vector2d&, const TransitionNoise&, const Eigen::Vector2d& d_next,
                double, Eigen::Vector2d& d_state, Eigen::Vector2d& d_action) const override {
    d_state = Eigen::Vector2d(0.0, d_next(1));
    d_action.setZero();
  }
};

RolloutConfig config_with_starts(std::vector<State> starts) {
  RolloutConfig cfg;
  cfg.initial_states = std::move(starts);
  return cfg;
}

TEST(Mlp, ParamsRoundTripAndShapes) {
  Rng rng(1);
  Mlp net({3, 4, 2}, {Activation::kSigmoid, Activation::kIdentity});
  net.initialize(rng);
  EXPECT_EQ(net.num_params(), 3 * 4 + 4 + 4 * 2 + 2);
  EXPECT_EQ(net.layer_sizes(), (std::vector<int>{3, 4, 2}));
  const Eigen::VectorXd p = net.params();
  Mlp copy({3, 4, 2}, {Activation::kSigmoid, Activation::kIdentity});
  copy.set_params(p);
  EXPECT_EQ(copy.params(), p);
  EXPECT_EQ(copy.layers()[0].weights, net.layers()[0].weights);
  EXPECT_THROW(Mlp({3}, {}), std::invalid_argument);
  EXPECT_THROW(activation_from_string("swish"), std::invalid_argument);
  for (auto a : {Activation::kIdentity, Activation::kRelu, Activation::kSigmoid, Activation::kTanh}) {
    EXPECT_EQ(activation_from_string(to_string(a)), a);
  }
}

TEST(Mlp, BackwardMatchesFiniteDifferences) {
  Rng rng(2);
  Mlp net({3, 5, 4, 2}, {Activation::kTanh, Activation::kSigmoid, Activation::kIdentity});
  net.initialize(rng);
  const Eigen::VectorXd x = Eigen::Vector3d(0.3, -0.7, 1.1);
  const Eigen::VectorXd w = Eigen::Vector2d(0.4, -1.3);
  Mlp::Tape tape;
  net.forward(x, tape);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(net.num_params());
  const Eigen::VectorXd d_in = net.backward(tape, w, grad);
  const auto fd = central_difference(
      [&](const Eigen::VectorXd& p) {
        Mlp m = net;
        m.set_params(p);
        return w.dot(m.forward(x));
      },
      net.params());
  EXPECT_LT(max_relative_error(grad, fd), 1e-6);
  const auto fd_in = central_difference([&](const Eigen::VectorXd& v) { return w.dot(net.forward(v)); }, x);
  EXPECT_LT(max_relative_error(d_in, fd_in), 1e-6);
}

TEST(Mlp, BatchAgreesWithSingle) {
  Rng rng(3);
  Mlp net({4, 10, 1}, {Activation::kSigmoid, Activation::kIdentity});
  net.initialize(rng);
  const Eigen::MatrixXd x = testing::random_points(rng, 7, 4, -1, 1);
  const Eigen::MatrixXd d_out = testing::random_points(rng, 7, 1, -1, 1);
  Mlp::BatchTape bt;
  const Eigen::MatrixXd out = net.forward_batch(x, bt);
  Eigen::VectorXd batch_grad = Eigen::VectorXd::Zero(net.num_params());
  net.backward_batch(bt, d_out, batch_grad);
  Eigen::VectorXd single_grad = Eigen::VectorXd::Zero(net.num_params());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Mlp::Tape t;
    EXPECT_NEAR(net.forward(x.row(i).transpose(), t)(0), out(i, 0), 1e-14);
    net.backward(t, d_out.row(i).transpose(), single_grad);
  }
  EXPECT_LT((batch_grad - single_grad).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Act, ZeroParametersGiveZeroAction) {
  const Mlp net = make_policy_net();
  EXPECT_EQ(act(net, State{3.0, 1.0}), (Action{0.0, 0.0}));
}

TEST(Act, OutputAlwaysInsideTheBox) {
  Rng rng(4);
  for (int i = 0; i < 10000; ++i) {
    const Mlp net = random_policy(rng, 3.0);
    const Action a = act(net, State{uniform(rng, 0, 5), uniform(rng, 0, 5)});
    EXPECT_GE(a.ax, -1.0);
    EXPECT_LE(a.ax, 1.0);
    EXPECT_GE(a.ay, -1.0);
    EXPECT_LE(a.ay, 1.0);
  }
}

TEST(Act, LipschitzInState) {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const Mlp net = random_policy(rng, 1.0);
    double lipschitz = 2.0 / kRiverLength;
    for (const auto& l : net.layers()) lipschitz *= l.weights.jacobiSvd().singularValues()(0);
    const State s{uniform(rng, 0, 5), uniform(rng, 0, 5)};
    const State t{s.x + 1e-6, s.y - 1e-6};
    const Action a = act(net, s);
    const Action b = act(net, t);
    EXPECT_LE(std::hypot(a.ax - b.ax, a.ay - b.ay), lipschitz * std::sqrt(2.0) * 1e-6 * (1 + 1e-9));
  }
}

TEST(EstimateReturn, ConstantStubGivesGeometricSum) {
  const ConstantModel stub;
  const auto cfg = config_with_starts({State{2.0, 1.0}, State{2.0, 4.0}});
  Rng rng(6);
  const auto est = estimate_return(make_policy_net(), stub, cfg, rng);
  EXPECT_NEAR(est.value, 9.37118, 1e-12);
  ASSERT_EQ(est.returns.size(), 20u);
  for (double r : est.returns) EXPECT_NEAR(r, 9.37118, 1e-12);
}

TEST(EstimateReturn, ZeroDiscountKeepsOnlyInitialReward) {
  const ConstantModel stub;
  auto cfg = config_with_starts({State{0.5, 1.0}, State{4.0, 4.0}, State{3.0, 0.0}});
  cfg.gamma = 0.0;
  Rng rng(7);
  const auto noise = RolloutNoise::draw(cfg, rng);
  const auto est = estimate_return(make_policy_net(), stub, cfg, noise);
  double want = 0.0;
  for (const auto& s : noise.starts) want += s.x / cfg.samples;
  EXPECT_NEAR(est.value, want, 1e-12);
}

TEST(EstimateReturn, PureFunctionOfSeed) {
  Rng rng(8);
  DagpModel model = testing::random_model(rng, 2, 6);
  model.standardizer = testing::river_standardizer();
  const DagpTransition sampler(model);
  const Mlp net = random_policy(rng, 0.3);
  const auto cfg = config_with_starts({State{1, 1}, State{2, 3}, State{4, 0.5}});
  Rng a(99);
  Rng b(99);
  const auto ea = estimate_return(net, sampler, cfg, a);
  const auto eb = estimate_return(net, sampler, cfg, b);
  EXPECT_EQ(ea.value, eb.value);
  EXPECT_EQ(ea.returns, eb.returns);
  double mean = 0.0;
  for (double r : ea.returns) mean += r / static_cast<double>(ea.returns.size());
  EXPECT_NEAR(ea.value, mean, 1e-12);
}

TEST(EstimateReturn, GradientMatchesFiniteDifferences) {
  Rng rng(9);
  DagpModel model = testing::random_model(rng, 2, 6);
  model.standardizer = testing::river_standardizer();
  const DagpTransition sampler(model);
  Mlp net = make_policy_net();
  net.initialize(rng);
  auto cfg = config_with_starts({State{1.0, 1.0}, State{2.5, 3.0}, State{3.5, 0.5}, State{0.5, 4.5}});
  cfg.samples = 4;
  cfg.mode_score_gradient = false;
  const auto noise = RolloutNoise::draw(cfg, rng);
  Eigen::VectorXd grad;
  estimate_return(net, sampler, cfg, noise, &grad);
  const Eigen::VectorXd p0 = net.params();
  std::vector<Eigen::Index> picked;
  std::uniform_int_distribution<Eigen::Index> pick(0, p0.size() - 1);
  Eigen::VectorXd analytic(20);
  Eigen::VectorXd numeric(20);
  for (int i = 0; i < 20; ++i) {
    const Eigen::Index j = pick(rng);
    const auto f = [&](double delta) {
      Mlp m = net;
      Eigen::VectorXd p = p0;
      p(j) += delta;
      m.set_params(p);
      return estimate_return(m, sampler, cfg, noise).value;
    };
    const double h = 1e-5;
    analytic(i) = grad(j);
    numeric(i) = (f(h) - f(-h)) / (2 * h);
  }
  EXPECT_LT(max_relative_error(analytic, numeric), 1e-3);
  EXPECT_GT(analytic.cwiseAbs().maxCoeff(), 1e-4);
}

TEST(EstimateReturn, ScoreTermVanishesForOneMode) {
  Rng rng(10);
  DagpModel model = testing::random_model(rng, 1, 5);
  model.standardizer = testing::river_standardizer();
  const DagpTransition sampler(model);
  Mlp net = make_policy_net();
  net.initialize(rng);
  auto cfg = config_with_starts({State{1.0, 1.0}, State{3.0, 2.0}});
  cfg.mode_score_gradient = false;
  const auto noise = RolloutNoise::draw(cfg, rng);
  Eigen::VectorXd plain;
  Eigen::VectorXd with_score;
  estimate_return(net, sampler, cfg, noise, &plain);
  cfg.mode_score_gradient = true;
  estimate_return(net, sampler, cfg, noise, &with_score);
  EXPECT_EQ(plain, with_score);
}

TEST(EstimateReturn, ScoreTermIsWeightedLogModeGradient) {
  Rng rng(13);
  DagpModel model = testing::random_model(rng, 2, 6);
  model.standardizer = testing::river_standardizer();
  const DagpTransition sampler(model);
  Mlp net = make_policy_net();
  net.initialize(rng);
  auto cfg = config_with_starts({State{1.0, 1.0}, State{2.5, 3.0}, State{3.5, 0.5}, State{0.5, 4.5}});
  cfg.samples = 4;
  cfg.horizon = 3;
  const auto noise = RolloutNoise::draw(cfg, rng);
  const int P = cfg.samples;
  const int T = cfg.horizon;

  // Modes and score weights of the unperturbed rollouts.
  std::vector<std::vector<int>> modes(P, std::vector<int>(T));
  std::vector<std::vector<double>> to_go(P, std::vector<double>(T + 1, 0.0));
  for (int p = 0; p < P; ++p) {
    Eigen::Vector2d s(noise.starts[p].x, noise.starts[p].y);
    std::vector<double> r{model_reward(s)};
    for (int t = 0; t < T; ++t) {
      s = sampler.sample(s, act(net, s), noise.transitions[p * T + t], &modes[p][t]);
      r.push_back(model_reward(s));
    }
    for (int t = T - 1; t >= 0; --t) to_go[p][t] = to_go[p][t + 1] + std::pow(cfg.gamma, t + 1) * r[t + 1];
  }
  const auto weighted_log_modes = [&](const Mlp& m) {
    double total = 0.0;
    for (int p = 0; p < P; ++p) {
      Eigen::Vector2d s(noise.starts[p].x, noise.starts[p].y);
      for (int t = 0; t < T; ++t) {
        double others = 0.0;
        for (int q = 0; q < P; ++q)
          if (q != p) others += to_go[q][t];
        const double w = (to_go[p][t] - others / (P - 1)) / P;
        const Eigen::Vector2d a = act(m, s);
        const auto& eps = noise.transitions[p * T + t];
        const auto probs = sampler.assignment_probabilities(model.standardizer.input(s, a), eps);
        total += w * std::log(probs(modes[p][t]));
        s = sampler.sample_in_mode(s, a, eps, modes[p][t]);
      }
    }
    return total;
  };

  Eigen::VectorXd pathwise;
  Eigen::VectorXd with_score;
  cfg.mode_score_gradient = false;
  estimate_return(net, sampler, cfg, noise, &pathwise);
  cfg.mode_score_gradient = true;
  estimate_return(net, sampler, cfg, noise, &with_score);
  const auto fd = central_difference(
      [&](const Eigen::VectorXd& p) {
        Mlp m = net;
        m.set_params(p);
        return weighted_log_modes(m);
      },
      net.params());
  EXPECT_LT(max_relative_error(with_score - pathwise, fd, 1e-4), 1e-3);
  EXPECT_GT(fd.cwiseAbs().maxCoeff(), 1e-4);
}

TEST(RolloutConfig, Validation) {
  RolloutConfig cfg;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.initial_states = {State{1, 1}};
  EXPECT_NO_THROW(cfg.validate());
  cfg.horizon = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.horizon = 5;
  cfg.gamma = 1.5;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(TrainPolicy, IsDeterministic) {
  Rng rng(11);
  DagpModel model = testing::random_model(rng, 2, 5);
  model.standardizer = testing::river_standardizer();
  const DagpTransition sampler(model);
  const auto cfg = config_with_starts({State{1.0, 1.0}, State{2.0, 3.0}, State{4.0, 2.0}});
  const PolicyTrainConfig train_cfg{60, 1e-2};
  Rng a(5);
  Rng b(5);
  const auto ra = train_policy(sampler, cfg, train_cfg, a);
  const auto rb = train_policy(sampler, cfg, train_cfg, b);
  EXPECT_EQ(ra.return_curve, rb.return_curve);
  EXPECT_EQ(ra.policy.params(), rb.policy.params());
  EXPECT_EQ(ra.return_curve.size(), 60u);
  EXPECT_FALSE(ra.aborted);
}

TEST(PolicyGrid, Layout) {
  Rng rng(12);
  const Mlp net = random_policy(rng, 0.5);
  const auto rows = policy_grid(net, 25);
  ASSERT_EQ(rows.size(), 625u);
  EXPECT_EQ(rows[0].x, 0.0);
  EXPECT_EQ(rows[24].x, 5.0);
  EXPECT_EQ(rows[624].y, 5.0);
  const Action a = act(net, State{rows[30].x, rows[30].y});
  EXPECT_EQ(rows[30].ax, a.ax);
  const auto csv = policy_grid_to_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "x,y,ax,ay");
}

}  // namespace
}  // namespace dagprl

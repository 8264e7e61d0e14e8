#include <cmath>

#include <gtest/gtest.h>

#include "dagprl/csv.hpp"
#include "dagprl/env.hpp"

namespace dagprl {
namespace {

TEST(Step, HandEvaluatedExamples) {
  EXPECT_EQ(step({0, 0}, {1, 0}, 0.0), (State{1.0, 0.0}));
  for (double tau : {-1.0, -0.3, 0.0, 0.7, 1.0}) {
    EXPECT_EQ(step({4.9, 5}, {0, 0}, tau), (State{0.0, 0.0}));
  }
  const State s = step({2, 3}, {-1, 1}, -1.0);
  EXPECT_NEAR(s.x, 0.1, 1e-12);
  EXPECT_EQ(s.y, 4.0);
  EXPECT_EQ(step({1, 4.5}, {0, 1}, 0.0).y, 5.0);
}

TEST(Step, BoundaryIsStrict) {
  // x_hat == l stays in the river.
  const State s{2.0, 0.0};
  const double tau = (5.0 - (2.0 - 0.5)) / 3.5;
  const auto px = projected_x(s, {0, 0});
  ASSERT_DOUBLE_EQ(px.at(tau), 5.0);
  EXPECT_EQ(step(s, {0, 0}, tau).x, px.at(tau));
}

TEST(Step, RejectsOutOfRangeInputs) {
  EXPECT_THROW(step({0, 0}, {1.5, 0}, 0.0), ContractViolation);
  EXPECT_THROW(step({0, 0}, {0, -1.01}, 0.0), ContractViolation);
  EXPECT_THROW(step({5.1, 0}, {0, 0}, 0.0), ContractViolation);
  EXPECT_THROW(step({0, 0}, {0, 0}, 1.5), ContractViolation);
}

TEST(Step, RandomOutputsSatisfyStateInvariants) {
  Rng rng(123);
  for (int i = 0; i < 10000; ++i) {
    const State s{uniform(rng, 0, 5), uniform(rng, 0, 5)};
    const Action a{uniform(rng, -1, 1), uniform(rng, -1, 1)};
    const double tau = uniform(rng, -1, 1);
    const State n = step(s, a, tau);
    ASSERT_TRUE(is_valid(n));
    if (projected_x(s, a).at(tau) > kRiverLength) ASSERT_EQ(n, (State{0.0, 0.0}));
  }
}

TEST(Reward, IsPositionAlongRiver) {
  EXPECT_EQ(reward({0, 0}), 0.0);
  EXPECT_EQ(reward({3.2, 1.0}), 3.2);
  EXPECT_EQ(reward({5, 5}), 5.0);
}

TEST(FallProbability, ClosedFormExamples) {
  EXPECT_NEAR(fall_probability({4, 0}, {0, 0}), 2.0 / 7.0, 1e-15);
  EXPECT_EQ(fall_probability({0, 5}, {0, 0}), 0.0);
  EXPECT_EQ(fall_probability({4.9, 5}, {0, 0}), 1.0);
}

TEST(FallProbability, MatchesMonteCarloFrequency) {
  Rng rng(7);
  const int n = 100000;
  for (int trial = 0; trial < 20; ++trial) {
    const State s{uniform(rng, 0, 5), uniform(rng, 0, 5)};
    const Action a{uniform(rng, -1, 1), uniform(rng, -1, 1)};
    const double p = fall_probability(s, a);
    int hits = 0;
    for (int i = 0; i < n; ++i) {
      const double x_hat = projected_x(s, a).at(uniform(rng, -1, 1));
      hits += (x_hat > kRiverLength || x_hat < 0.0) ? 1 : 0;
    }
    const double freq = static_cast<double>(hits) / n;
    const double sigma = std::sqrt(std::max(p * (1 - p), 1e-12) / n);
    EXPECT_LE(std::abs(freq - p), 3 * sigma + 1e-12) << "s=(" << s.x << "," << s.y << ")";
  }
}

TEST(Dataset, SizeDeterminismAndErrors) {
  const auto a = sample_dataset(100, 1);
  EXPECT_EQ(a.size(), 100u);
  for (const auto& t : a.records) {
    EXPECT_TRUE(is_valid(t.state));
    EXPECT_TRUE(is_valid(t.action));
    EXPECT_TRUE(is_valid(t.next_state));
  }
  EXPECT_EQ(a.records, sample_dataset(100, 1).records);
  EXPECT_NE(a.records, sample_dataset(100, 2).records);
  EXPECT_THROW(sample_dataset(0, 1), std::invalid_argument);
}

TEST(Dataset, ResetFractionMatchesAnalyticOracle) {
  const auto data = sample_dataset(5000, 11);
  double p_sum = 0.0;
  double var_sum = 0.0;
  int resets = 0;
  for (const auto& t : data.records) {
    const double p = fall_probability(t.state, t.action);
    p_sum += p;
    var_sum += p * (1 - p);
    resets += t.next_state.x == 0.0 ? 1 : 0;
  }
  const double n = static_cast<double>(data.size());
  EXPECT_LE(std::abs(resets / n - p_sum / n), 3.0 * std::sqrt(var_sum) / n);
}

TEST(Dataset, CsvRoundTripIsExact) {
  const auto data = sample_dataset(50, 3);
  const auto text = dataset_to_csv(data);
  EXPECT_EQ(text.substr(0, 16), "x,y,ax,ay,xn,yn\n");
  EXPECT_EQ(dataset_from_csv(text).records, data.records);
}

TEST(Dataset, CsvParseErrorsCarryLineNumbers) {
  try {
    dataset_from_csv("x,y,ax,ay,xn,yn\n1,1,0,0,1,1\n1,2,zz,0,1,1\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line, 3u);
  }
  EXPECT_THROW(dataset_from_csv("a,b\n"), ParseError);
  EXPECT_THROW(dataset_from_csv("x,y,ax,ay,xn,yn\n1,1,0,0,1\n"), ParseError);
}

TEST(EvaluatePolicyTrue, RandomPolicyMatchesIndependentSimulation) {
  Rng rng(5);
  const auto eval = evaluate_policy_true(uniform_random_policy(9), 100, 1000, 0.9, rng);
  EXPECT_EQ(eval.per_rollout_avg_step_reward.size(), 1000u);

  // Separate simulation loop with its own streams.
  Rng sim(77);
  std::vector<double> averages;
  for (int r = 0; r < 4000; ++r) {
    State s{uniform(sim, 0, 5), uniform(sim, 0, 5)};
    double total = s.x;
    for (int t = 0; t < 100; ++t) {
      const Action a{uniform(sim, -1, 1), uniform(sim, -1, 1)};
      s = step(s, a, uniform(sim, -1, 1));
      total += s.x;
    }
    averages.push_back(total / 101.0);
  }
  const auto oracle = mean_stderr(averages);
  const double tol = 4.0 * std::hypot(oracle.stderr_, eval.avg_step_reward.stderr_);
  EXPECT_NEAR(eval.avg_step_reward.mean, oracle.mean, tol);
  // Long-horizon random play sits near 1.3 under this protocol.
  EXPECT_GT(eval.avg_step_reward.mean, 1.2);
  EXPECT_LT(eval.avg_step_reward.mean, 1.4);
}

TEST(EvaluatePolicyTrue, BackwardPaddlingAtFastWaterFails) {
  const PolicyFn backwards = [](const State&) { return Action{-1.0, 0.0}; };
  Rng rng(17);
  for (int start = 0; start < 20; ++start) {
    State s{uniform(rng, 0, 5), 5.0};
    double total = 0.0;
    for (int t = 0; t < 100; ++t) {
      s = step(s, backwards(s), rng);
      total += reward(s);
    }
    EXPECT_LT(total / 100.0, 2.2);
  }
  Rng eval_rng(3);
  EXPECT_LT(evaluate_policy_true(backwards, 100, 200, 0.9, eval_rng).avg_step_reward.mean, 2.2);
}

TEST(EvaluatePolicyTrue, ZeroDiscountKeepsInitialReward) {
  Rng rng(21);
  Rng replay = rng;
  const double x0 = uniform(replay, 0.0, kRiverLength);
  const auto eval = evaluate_policy_true([](const State&) { return Action{1, 1}; }, 10, 1, 0.0, rng);
  EXPECT_DOUBLE_EQ(eval.per_rollout_discounted_return[0], x0);
}

TEST(MeanStderr, HandComputedThreeSeedFixture) {
  // values 1, 2, 4: mean 7/3, sample variance ((4/3)^2 + (1/3)^2 + (5/3)^2)/2 = 7/3
  const auto ms = mean_stderr({1.0, 2.0, 4.0});
  EXPECT_DOUBLE_EQ(ms.mean, 7.0 / 3.0);
  EXPECT_NEAR(ms.stderr_, std::sqrt(7.0 / 3.0) / std::sqrt(3.0), 1e-15);
}

}  // namespace
}  // namespace dagprl

#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "dagprl/baselines.hpp"
#include "dagprl/dagp.hpp"
#include "dagprl/env.hpp"
#include "dagprl/policy.hpp"

namespace dagprl {

/// Invalid configuration value or key. The CLI maps it to a usage error.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

enum class Method { kDagp, kGp, kNfq, kRandom };

std::string to_string(Method m);
/// Throws ConfigError for unknown names.
Method method_from_string(const std::string& name);

struct EvaluationConfig {
  int horizon = 100;
  int rollouts = 1000;
  double gamma = 0.9;
};

/// Policy search settings; start states come from the training data.
struct PolicySearchConfig {
  int horizon = 5;
  int samples = 20;
  double gamma = 0.9;
  bool mode_score_gradient = true;
  int steps = 2000;
  double learning_rate = 1e-2;
};

struct ExperimentConfig {
  std::vector<int> dataset_sizes{100, 250, 500, 1000, 2500, 5000};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<Method> methods{Method::kDagp, Method::kGp, Method::kNfq, Method::kRandom};
  int grid_resolution = 25;
  DagpTrainConfig dagp;
  PlainGpTrainConfig plain_gp;
  PolicySearchConfig policy;
  NfqConfig nfq;
  EvaluationConfig evaluation;

  /// Throws ConfigError.
  void validate() const;
};

/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& config);

/// Applies "a.b.c=value" to a JSON document. The value is read as JSON when
/// it parses (numbers, booleans, lists) and as a plain string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Defaults, then the file (if any), then the overrides in order.
ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides);

// Per-cell seeds. The CLI commands use the same derivations, so running
// gen-data / train-model / train-policy / evaluate by hand with --seed s
// reproduces the sweep cell for seed s.
TransitionDataset cell_dataset(int n, std::uint64_t seed);
DagpTrainConfig dagp_config_for(const ExperimentConfig& config, std::uint64_t seed);
PlainGpTrainConfig plain_gp_config_for(const ExperimentConfig& config, std::uint64_t seed);
NfqConfig nfq_config_for(const ExperimentConfig& config, std::uint64_t seed);
RolloutConfig rollout_config_for(const ExperimentConfig& config, const TransitionDataset& data);
PolicyTrainConfig policy_train_config_for(const ExperimentConfig& config);

/// Training states of a dataset, the start distribution of policy search.
std::vector<State> dataset_states(const TransitionDataset& data);

PolicyTrainResult search_policy(const ExperimentConfig& config, const TransitionModel& model,
                                const std::vector<State>& starts, std::uint64_t seed);

/// True-environment evaluation with the seed's evaluation stream.
EnvEvaluation evaluate_true(const ExperimentConfig& config, const PolicyFn& policy, std::uint64_t seed);

PolicyFn mlp_policy(const Mlp& policy);
PolicyFn qnet_policy(const QNet& q, const ActionGrid& grid);

struct CellResult {
  Method method = Method::kRandom;
  int n = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  double avg_step_reward = 0.0;
  double discounted_return = 0.0;
  std::string message;
};

/// Data generation, training and true-env evaluation of one sweep cell.
/// Failures are reported in the result, not thrown.
CellResult run_cell(const ExperimentConfig& config, Method method, int n, std::uint64_t seed);

struct SweepCell {
  Method method;
  int n;
  std::uint64_t seed;
};

/// Cells of the sweep in report order (method, N, seed). The random policy
/// does not use data, so it gets one cell per seed with N = 0.
std::vector<SweepCell> sweep_cells(const ExperimentConfig& config);

using CellCallback = std::function<void(const CellResult&, double seconds)>;

/// Runs cells on `threads` workers. Results are in input order whatever the
/// thread count; the callback is serialized.
std::vector<CellResult> run_cells(const ExperimentConfig& config, const std::vector<SweepCell>& cells, int threads,
                                  const CellCallback& on_done = nullptr);

struct SummaryRow {
  Method method;
  int n;
  int seeds = 0;
  int missing = 0;
  double mean = 0.0;
  double stderr_ = 0.0;
};

/// Mean and sample-stddev / sqrt(#seeds) of the successful cells per (method, N).
std::vector<SummaryRow> summarize(const std::vector<CellResult>& cells);

/// `method,N,seed,avg_step_reward,discounted_return`; failed cells are kept
/// with the word "missing" in both value columns.
std::string cells_to_csv(const std::vector<CellResult>& cells);
std::string summary_to_csv(const std::vector<SummaryRow>& rows);

/// "mean ± stderr" with two decimals, or "missing".
std::string format_cell(const SummaryRow* row);

/// Markdown table: one row per N with nfq, gp, dagp and random columns,
/// then a row holding the random baseline.
std::string format_table(const ExperimentConfig& config, const std::vector<SummaryRow>& rows);

}  // namespace dagprl

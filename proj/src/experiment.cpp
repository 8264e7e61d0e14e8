#include "dagprl/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "dagprl/checkpoint.hpp"
#include "dagprl/csv.hpp"
#include "dagprl/rng.hpp"

namespace dagprl {

using nlohmann::json;

std::string to_string(Method m) {
  switch (m) {
    case Method::kDagp: return "dagp";
    case Method::kGp: return "gp";
    case Method::kNfq: return "nfq";
    case Method::kRandom: return "random";
  }
  return "unknown";
}

Method method_from_string(const std::string& name) {
  for (Method m : {Method::kDagp, Method::kGp, Method::kNfq, Method::kRandom})
    if (to_string(m) == name) return m;
  throw ConfigError("unknown method '" + name + "' (expected dagp, gp, nfq or random)");
}

namespace {

// Reads or writes one section through the same field list.
class Writer {
 public:
  explicit Writer(json& out) : out_(out) {}
  template <class T>
  void operator()(const char* key, const T& v) { out_[key] = v; }

 private:
  json& out_;
};

class Reader {
 public:
  Reader(const json& in, std::string section) : in_(in), section_(std::move(section)) {
    if (!in_.is_object()) throw ConfigError("'" + section_ + "' must be an object");
  }
  template <class T>
  void operator()(const char* key, T& v) {
    seen_.insert(key);
    if (!in_.contains(key)) return;
    const json& j = in_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!j.is_boolean()) fail(key, "a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!j.is_number_integer()) fail(key, "an integer");
    } else {
      if (!j.is_number()) fail(key, "a number");
    }
    v = j.get<T>();
  }
  void finish() const {
    for (const auto& [key, _] : in_.items())
      if (!seen_.count(key)) throw ConfigError("unknown key '" + section_ + "." + key + "'");
  }

 private:
  [[noreturn]] void fail(const char* key, const char* what) const {
    throw ConfigError("'" + section_ + "." + key + "' must be " + what);
  }
  const json& in_;
  std::string section_;
  std::set<std::string> seen_;
};

template <class V, class C>
void visit_dagp(V&& v, C& c) {
  v("iterations", c.iterations);
  v("minibatch", c.minibatch);
  v("learning_rate", c.learning_rate);
  v("samples", c.samples);
  v("inducing", c.inducing);
  v("belief_interval", c.belief_interval);
  v("modes", c.modes);
  v("noise_floor", c.noise_floor);
  v("initial_factor_scale", c.initial_factor_scale);
  v("heuristic_belief_init", c.heuristic_belief_init);
}

template <class V, class C>
void visit_plain_gp(V&& v, C& c) {
  v("iterations", c.iterations);
  v("minibatch", c.minibatch);
  v("learning_rate", c.learning_rate);
  v("inducing", c.inducing);
  v("initial_factor_scale", c.initial_factor_scale);
}

template <class V, class C>
void visit_policy(V&& v, C& c) {
  v("horizon", c.horizon);
  v("samples", c.samples);
  v("gamma", c.gamma);
  v("mode_score_gradient", c.mode_score_gradient);
  v("steps", c.steps);
  v("learning_rate", c.learning_rate);
}

template <class V, class C>
void visit_nfq(V&& v, C& c) {
  v("iterations", c.iterations);
  v("gamma", c.gamma);
  v("max_fit_steps", c.max_fit_steps);
  v("fit_tolerance", c.fit_tolerance);
}

template <class V, class C>
void visit_evaluation(V&& v, C& c) {
  v("horizon", c.horizon);
  v("rollouts", c.rollouts);
  v("gamma", c.gamma);
}

template <class F, class C>
void read_section(const json& root, const char* name, C& c, F visit) {
  if (!root.contains(name)) return;
  Reader r(root.at(name), name);
  visit(r, c);
  r.finish();
}

template <class F, class C>
json write_section(const C& c, F visit) {
  json j = json::object();
  visit(Writer(j), c);
  return j;
}

json action_grid_to_json(const ActionGrid& grid) {
  json g = json::array();
  for (const auto& a : grid) g.push_back({a.ax, a.ay});
  return g;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (dataset_sizes.empty()) throw ConfigError("dataset_sizes must not be empty");
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  if (methods.empty()) throw ConfigError("methods must not be empty");
  for (int n : dataset_sizes)
    if (n < 1) throw ConfigError("dataset sizes must be positive");
  if (grid_resolution < 1) throw ConfigError("grid_resolution must be positive");
  if (evaluation.horizon < 1 || evaluation.rollouts < 1) throw ConfigError("evaluation horizon and rollouts must be positive");
  if (!(evaluation.gamma >= 0.0 && evaluation.gamma <= 1.0)) throw ConfigError("evaluation.gamma must lie in [0, 1]");
  if (policy.steps < 0 || !(policy.learning_rate > 0.0)) throw ConfigError("policy.steps must be >= 0 and policy.learning_rate > 0");
  if (nfq.iterations < 1 || nfq.max_fit_steps < 1 || !(nfq.gamma >= 0.0 && nfq.gamma < 1.0) || !(nfq.fit_tolerance >= 0.0)) {
    throw ConfigError("nfq settings out of range");
  }
  if (plain_gp.iterations < 0 || plain_gp.minibatch < 1 || plain_gp.inducing < 1 || !(plain_gp.learning_rate > 0.0) ||
      !(plain_gp.initial_factor_scale > 0.0)) {
    throw ConfigError("plain_gp settings out of range");
  }
  try {
    RolloutConfig r;
    r.horizon = policy.horizon;
    r.samples = policy.samples;
    r.gamma = policy.gamma;
    r.initial_states = {State{}};
    r.validate();
    const DagpTrainConfig& d = dagp;
    if (d.iterations < 0 || d.minibatch < 1 || d.samples < 1 || d.inducing < 1 || d.belief_interval < 1 ||
        d.modes < 1 || d.modes > kMaxModes || !(d.learning_rate > 0.0) || !(d.noise_floor > 0.0) ||
        !(d.initial_factor_scale > 0.0)) {
      throw std::invalid_argument("dagp settings out of range");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  static const std::set<std::string> known{"dataset_sizes", "seeds", "methods", "grid_resolution", "dagp",
                                           "plain_gp", "policy", "nfq", "evaluation"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("unknown key '" + key + "'");
  ExperimentConfig c;
  try {
    if (j.contains("dataset_sizes")) c.dataset_sizes = j.at("dataset_sizes").get<std::vector<int>>();
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("grid_resolution")) c.grid_resolution = j.at("grid_resolution").get<int>();
    if (j.contains("methods")) {
      c.methods.clear();
      for (const auto& name : j.at("methods").get<std::vector<std::string>>()) c.methods.push_back(method_from_string(name));
    }
    if (j.contains("nfq") && j.at("nfq").is_object() && j.at("nfq").contains("action_grid")) {
      c.nfq.grid.clear();
      for (const auto& a : j.at("nfq").at("action_grid")) {
        const auto v = a.get<std::vector<double>>();
        if (v.size() != 2) throw ConfigError("nfq.action_grid entries need two components");
        c.nfq.grid.push_back({v[0], v[1]});
      }
      if (c.nfq.grid.empty()) throw ConfigError("nfq.action_grid must not be empty");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad configuration value: ") + e.what());
  }
  read_section(j, "dagp", c.dagp, [](auto& v, auto& s) { visit_dagp(v, s); });
  read_section(j, "plain_gp", c.plain_gp, [](auto& v, auto& s) { visit_plain_gp(v, s); });
  read_section(j, "policy", c.policy, [](auto& v, auto& s) { visit_policy(v, s); });
  if (j.contains("nfq")) {
    json nfq = j.at("nfq");
    if (nfq.is_object()) nfq.erase("action_grid");
    Reader r(nfq, "nfq");
    visit_nfq(r, c.nfq);
    r.finish();
  }
  read_section(j, "evaluation", c.evaluation, [](auto& v, auto& s) { visit_evaluation(v, s); });
  c.validate();
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["dataset_sizes"] = c.dataset_sizes;
  j["seeds"] = c.seeds;
  json methods = json::array();
  for (Method m : c.methods) methods.push_back(to_string(m));
  j["methods"] = methods;
  j["grid_resolution"] = c.grid_resolution;
  j["dagp"] = write_section(c.dagp, [](auto&& v, auto& s) { visit_dagp(v, s); });
  j["plain_gp"] = write_section(c.plain_gp, [](auto&& v, auto& s) { visit_plain_gp(v, s); });
  j["policy"] = write_section(c.policy, [](auto&& v, auto& s) { visit_policy(v, s); });
  j["nfq"] = write_section(c.nfq, [](auto&& v, auto& s) { visit_nfq(v, s); });
  j["nfq"]["action_grid"] = action_grid_to_json(c.nfq.grid);
  j["evaluation"] = write_section(c.evaluation, [](auto&& v, auto& s) { visit_evaluation(v, s); });
  return j;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key.path=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &doc;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw ConfigError("override '" + assignment + "' has an empty key");
    parts.push_back(part);
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object()) throw ConfigError("override '" + assignment + "' descends into a non-object");
    node = &(*node)[parts[i]];
    if (node->is_null()) *node = json::object();
  }
  if (!node->is_object()) throw ConfigError("override '" + assignment + "' descends into a non-object");
  (*node)[parts.back()] = value;
}

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  json doc = json::object();
  if (!path.empty()) {
    const std::string text = read_text_file(path);
    doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("config file '" + path + "' is not valid JSON");
    if (!doc.is_object()) throw ConfigError("config file '" + path + "' must hold a JSON object");
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return config_from_json(doc);
}

TransitionDataset cell_dataset(int n, std::uint64_t seed) {
  return sample_dataset(static_cast<std::size_t>(n), derive_seed(seed, streams::kData));
}

DagpTrainConfig dagp_config_for(const ExperimentConfig& config, std::uint64_t seed) {
  DagpTrainConfig c = config.dagp;
  c.seed = derive_seed(seed, streams::kModel);
  return c;
}

PlainGpTrainConfig plain_gp_config_for(const ExperimentConfig& config, std::uint64_t seed) {
  PlainGpTrainConfig c = config.plain_gp;
  c.seed = derive_seed(seed, streams::kModel);
  return c;
}

NfqConfig nfq_config_for(const ExperimentConfig& config, std::uint64_t seed) {
  NfqConfig c = config.nfq;
  c.seed = derive_seed(seed, streams::kNfq);
  return c;
}

std::vector<State> dataset_states(const TransitionDataset& data) {
  std::vector<State> s;
  s.reserve(data.records.size());
  for (const auto& r : data.records) s.push_back(r.state);
  return s;
}

RolloutConfig rollout_config_for(const ExperimentConfig& config, const TransitionDataset& data) {
  RolloutConfig r;
  r.horizon = config.policy.horizon;
  r.samples = config.policy.samples;
  r.gamma = config.policy.gamma;
  r.mode_score_gradient = config.policy.mode_score_gradient;
  r.initial_states = dataset_states(data);
  return r;
}

PolicyTrainConfig policy_train_config_for(const ExperimentConfig& config) {
  return {config.policy.steps, config.policy.learning_rate};
}

PolicyTrainResult search_policy(const ExperimentConfig& config, const TransitionModel& model,
                                const std::vector<State>& starts, std::uint64_t seed) {
  RolloutConfig r = rollout_config_for(config, TransitionDataset{});
  r.initial_states = starts;
  Rng rng = make_rng(seed, streams::kPolicy);
  return train_policy(model, r, policy_train_config_for(config), rng);
}

EnvEvaluation evaluate_true(const ExperimentConfig& config, const PolicyFn& policy, std::uint64_t seed) {
  Rng rng = make_rng(seed, streams::kEvaluation);
  return evaluate_policy_true(policy, static_cast<std::size_t>(config.evaluation.horizon),
                              static_cast<std::size_t>(config.evaluation.rollouts), config.evaluation.gamma, rng);
}

PolicyFn mlp_policy(const Mlp& policy) {
  return [policy](const State& s) { return act(policy, s); };
}

PolicyFn qnet_policy(const QNet& q, const ActionGrid& grid) {
  return [q, grid](const State& s) { return nfq_act(q, s, grid); };
}

CellResult run_cell(const ExperimentConfig& config, Method method, int n, std::uint64_t seed) {
  CellResult out;
  out.method = method;
  out.n = n;
  out.seed = seed;
  try {
    PolicyFn policy;
    if (method == Method::kRandom) {
      policy = uniform_random_policy(derive_seed(seed, streams::kPolicy));
    } else {
      const TransitionDataset data = cell_dataset(n, seed);
      if (method == Method::kNfq) {
        NfqResult r = nfq_train(data, nfq_config_for(config, seed));
        if (r.aborted) throw std::runtime_error("nfq: " + r.message);
        policy = qnet_policy(r.q, config.nfq.grid);
      } else {
        // Through the checkpoint format, as the CLI pipeline does.
        std::unique_ptr<TransitionModel> model;
        if (method == Method::kDagp) {
          DagpTrainResult r = train(data, dagp_config_for(config, seed));
          if (r.aborted) throw std::runtime_error("dagp: " + r.message);
          model = transition_model_from_json(parse_json(dagp_to_json(r.model).dump(), "dagp"));
        } else {
          PlainGpTrainResult r = train_plain_gp(data, plain_gp_config_for(config, seed));
          if (r.aborted) throw std::runtime_error("gp: " + r.message);
          model = transition_model_from_json(parse_json(plain_gp_to_json(r.model).dump(), "gp"));
        }
        PolicyTrainResult p = search_policy(config, *model, dataset_states(data), seed);
        if (p.aborted) throw std::runtime_error("policy: " + p.message);
        policy = mlp_policy(p.policy);
      }
    }
    const EnvEvaluation e = evaluate_true(config, policy, seed);
    out.avg_step_reward = e.avg_step_reward.mean;
    out.discounted_return = e.discounted_return.mean;
    out.ok = true;
  } catch (const std::exception& e) {
    out.ok = false;
    out.message = e.what();
  }
  return out;
}

std::vector<SweepCell> sweep_cells(const ExperimentConfig& config) {
  std::vector<SweepCell> cells;
  for (Method m : config.methods) {
    if (m == Method::kRandom) {
      for (auto s : config.seeds) cells.push_back({m, 0, s});
      continue;
    }
    for (int n : config.dataset_sizes)
      for (auto s : config.seeds) cells.push_back({m, n, s});
  }
  return cells;
}

std::vector<CellResult> run_cells(const ExperimentConfig& config, const std::vector<SweepCell>& cells, int threads,
                                  const CellCallback& on_done) {
  std::vector<CellResult> results(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex report;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const auto t0 = std::chrono::steady_clock::now();
      results[i] = run_cell(config, cells[i].method, cells[i].n, cells[i].seed);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (on_done) {
        std::lock_guard lock(report);
        on_done(results[i], secs);
      }
    }
  };
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(cells.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return results;
}

std::vector<SummaryRow> summarize(const std::vector<CellResult>& cells) {
  std::vector<std::pair<Method, int>> order;
  std::map<std::pair<int, int>, std::vector<const CellResult*>> groups;
  for (const auto& c : cells) {
    const std::pair<int, int> key{static_cast<int>(c.method), c.n};
    if (!groups.count(key)) order.emplace_back(c.method, c.n);
    groups[key].push_back(&c);
  }
  std::vector<SummaryRow> rows;
  for (const auto& [m, n] : order) {
    SummaryRow row{m, n};
    std::vector<double> values;
    for (const auto* c : groups[{static_cast<int>(m), n}]) {
      if (c->ok)
        values.push_back(c->avg_step_reward);
      else
        ++row.missing;
    }
    row.seeds = static_cast<int>(values.size());
    if (!values.empty()) {
      const MeanStderr ms = mean_stderr(values);
      row.mean = ms.mean;
      row.stderr_ = ms.stderr_;
    }
    rows.push_back(row);
  }
  return rows;
}

std::string cells_to_csv(const std::vector<CellResult>& cells) {
  std::string out = "method,N,seed,avg_step_reward,discounted_return\n";
  for (const auto& c : cells) {
    out += to_string(c.method) + "," + std::to_string(c.n) + "," + std::to_string(c.seed) + ",";
    out += c.ok ? format_double(c.avg_step_reward) + "," + format_double(c.discounted_return) : "missing,missing";
    out += "\n";
  }
  return out;
}

std::string summary_to_csv(const std::vector<SummaryRow>& rows) {
  std::string out = "method,N,seeds,missing,mean,stderr,cell\n";
  for (const auto& r : rows) {
    out += to_string(r.method) + "," + std::to_string(r.n) + "," + std::to_string(r.seeds) + "," +
           std::to_string(r.missing) + ",";
    out += r.seeds > 0 ? format_double(r.mean) + "," + format_double(r.stderr_) : "missing,missing";
    out += "," + format_cell(&r) + "\n";
  }
  return out;
}

std::string format_cell(const SummaryRow* row) {
  if (row == nullptr || row->seeds == 0) return "missing";
  return format_fixed2(row->mean) + " ± " + format_fixed2(row->stderr_);
}

std::string format_table(const ExperimentConfig& config, const std::vector<SummaryRow>& rows) {
  auto find = [&](Method m, int n) -> const SummaryRow* {
    for (const auto& r : rows)
      if (r.method == m && r.n == n) return &r;
    return nullptr;
  };
  auto has = [&](Method m) { return std::find(config.methods.begin(), config.methods.end(), m) != config.methods.end(); };
  const SummaryRow* random = find(Method::kRandom, 0);
  auto column = [&](Method m, int n) -> std::string {
    if (!has(m)) return "";
    return format_cell(m == Method::kRandom ? random : find(m, n));
  };
  std::string out = "| N | NFQ | GP | DAGP | Random |\n|---|---|---|---|---|\n";
  for (int n : config.dataset_sizes) {
    out += "| " + std::to_string(n) + " | " + column(Method::kNfq, n) + " | " + column(Method::kGp, n) + " | " +
           column(Method::kDagp, n) + " | " + column(Method::kRandom, n) + " |\n";
  }
  out += "| random baseline | | | | " + column(Method::kRandom, 0) + " |\n";
  return out;
}

}  // namespace dagprl

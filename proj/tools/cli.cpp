#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"

#include "dagprl/checkpoint.hpp"
#include "dagprl/csv.hpp"
#include "dagprl/experiment.hpp"
#include "dagprl/rng.hpp"

namespace dagprl::cli {

namespace {

namespace fs = std::filesystem;

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// The requested output does not exist for this kind of model.
struct UnsupportedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::uint64_t seed = 0;
  std::string config;
  std::string out;
  int threads = 1;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c, bool out_required = true) {
  cmd->add_option("--seed", c.seed, "Experiment seed; sub-seeds are derived per stream");
  cmd->add_option("--config", c.config, "JSON experiment configuration")->check(CLI::ExistingFile);
  auto* out = cmd->add_option("--out", c.out, "Output path");
  if (out_required) out->required();
  cmd->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--set", c.overrides, "Config override key.path=value (repeatable)");
}

/// Sibling file: out/dir/model.json + "_curve.csv" -> out/dir/model_curve.csv.
fs::path sibling(const std::string& out, const std::string& suffix) {
  fs::path p(out);
  return p.parent_path() / (p.stem().string() + suffix);
}

Json load_json_file(const std::string& path) { return parse_json(read_text_file(path), path); }

void write_json_file(const std::string& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoull(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw UsageError("bad seed '" + part + "'");
    }
  }
  if (seeds.empty()) throw UsageError("seed list must not be empty");
  return seeds;
}

std::string curve_csv(const char* index_name, const char* value_name, const std::vector<double>& values) {
  std::string out = std::string(index_name) + "," + value_name + "\n";
  for (std::size_t i = 0; i < values.size(); ++i) out += std::to_string(i) + "," + format_double(values[i]) + "\n";
  return out;
}

Json states_to_json(const std::vector<State>& states) {
  Json a = Json::array();
  for (const auto& s : states) a.push_back({s.x, s.y});
  return a;
}

std::vector<State> states_from_json(const Json& j) {
  if (!j.contains("training_states")) throw CheckpointError("model checkpoint has no training_states; pass --data");
  std::vector<State> out;
  for (const auto& s : j.at("training_states")) {
    if (!s.is_array() || s.size() != 2) throw CheckpointError("training_states entries need two components");
    out.push_back({s[0].get<double>(), s[1].get<double>()});
  }
  if (out.empty()) throw CheckpointError("training_states is empty");
  return out;
}

int count_resets(const TransitionDataset& data) {
  return static_cast<int>(std::count_if(data.records.begin(), data.records.end(), [](const Transition& t) {
    return t.next_state.x == 0.0 && t.next_state.y == 0.0;
  }));
}

// ---- commands ----

int gen_data(std::size_t n, const Common& c, std::ostream& out) {
  if (n == 0) throw UsageError("--n must be positive");
  const TransitionDataset data = cell_dataset(static_cast<int>(n), c.seed);
  write_text_file(c.out, dataset_to_csv(data));
  out << "N=" << data.size() << " falls=" << count_resets(data) << "\n";
  return kExitOk;
}

int train_model(const std::string& data_path, const std::string& method, const Common& c, std::ostream& out) {
  const ExperimentConfig config = load_config(c.config, c.overrides);
  const TransitionDataset data = dataset_from_csv(read_text_file(data_path));
  if (data.size() == 0) throw UsageError("dataset '" + data_path + "' has no rows");
  const Method m = method_from_string(method);
  Json j;
  std::string curve;
  if (m == Method::kDagp) {
    const DagpTrainResult r = train(data, dagp_config_for(config, c.seed));
    if (r.aborted) throw std::runtime_error("DAGP training aborted: " + r.message);
    j = dagp_to_json(r.model);
    curve = curve_csv("iteration", "elbo", r.elbo_curve);
    write_text_file(sibling(c.out, "_beliefs.csv"), beliefs_to_csv(r.beliefs));
  } else if (m == Method::kGp) {
    const PlainGpTrainResult r = train_plain_gp(data, plain_gp_config_for(config, c.seed));
    if (r.aborted) throw std::runtime_error("GP training aborted: " + r.message);
    j = plain_gp_to_json(r.model);
    curve = curve_csv("iteration", "elbo", r.elbo_curve);
  } else if (m == Method::kNfq) {
    const NfqConfig nfq = nfq_config_for(config, c.seed);
    const NfqResult r = nfq_train(data, nfq);
    if (r.aborted) throw std::runtime_error("NFQ training aborted: " + r.message);
    j = qnet_to_json(r.q, nfq.grid);
    j["gamma"] = nfq.gamma;
    curve = curve_csv("iteration", "fit_loss", r.fit_losses);
  } else {
    throw UsageError("the random policy has no model to train");
  }
  if (m != Method::kNfq) j["training_states"] = states_to_json(dataset_states(data));
  write_json_file(c.out, j);
  write_text_file(sibling(c.out, "_curve.csv"), curve);
  out << "wrote " << c.out << "\n";
  return kExitOk;
}

int train_policy_cmd(const std::string& model_path, const std::string& data_path, const Common& c, std::ostream& out) {
  const ExperimentConfig config = load_config(c.config, c.overrides);
  const Json j = load_json_file(model_path);
  const auto model = transition_model_from_json(j);
  const std::vector<State> starts =
      data_path.empty() ? states_from_json(j) : dataset_states(dataset_from_csv(read_text_file(data_path)));
  const PolicyTrainResult r = search_policy(config, *model, starts, c.seed);
  if (r.aborted) throw std::runtime_error("policy training aborted: " + r.message);
  write_json_file(c.out, mlp_to_json(r.policy, "policy"));
  write_text_file(sibling(c.out, "_curve.csv"), curve_csv("step", "return", r.return_curve));
  out << "wrote " << c.out << " (skipped steps: " << r.skipped_steps << ")\n";
  return kExitOk;
}

int evaluate_cmd(const std::string& policy_path, const std::string& qnet_path, bool random, int n,
                 const std::optional<std::string>& seeds_text, const Common& c, std::ostream& out) {
  ExperimentConfig config = load_config(c.config, c.overrides);
  if (seeds_text) config.seeds = parse_seed_list(*seeds_text);
  if (static_cast<int>(!policy_path.empty()) + static_cast<int>(!qnet_path.empty()) + static_cast<int>(random) != 1) {
    throw UsageError("pass exactly one of --policy, --qnet, --random");
  }
  Method method = Method::kRandom;
  std::optional<PolicyFn> fixed;
  if (!policy_path.empty()) {
    method = Method::kDagp;
    const Json j = load_json_file(policy_path);
    fixed = mlp_policy(mlp_from_json(j, "policy"));
  } else if (!qnet_path.empty()) {
    method = Method::kNfq;
    ActionGrid grid;
    const QNet q = qnet_from_json(load_json_file(qnet_path), &grid);
    fixed = qnet_policy(q, grid);
  }
  std::vector<CellResult> cells;
  for (auto seed : config.seeds) {
    const PolicyFn policy = fixed ? *fixed : uniform_random_policy(derive_seed(seed, streams::kPolicy));
    const EnvEvaluation e = evaluate_true(config, policy, seed);
    CellResult cell;
    cell.method = method;
    cell.n = n;
    cell.seed = seed;
    cell.ok = true;
    cell.avg_step_reward = e.avg_step_reward.mean;
    cell.discounted_return = e.discounted_return.mean;
    cells.push_back(cell);
  }
  const auto summary = summarize(cells);
  write_text_file(c.out, cells_to_csv(cells));
  write_text_file(sibling(c.out, "_summary.csv"), summary_to_csv(summary));
  out << "avg_step_reward " << format_cell(&summary.front()) << " over " << cells.size() << " seeds\n";
  return kExitOk;
}

int export_grids_cmd(const std::string& model_path, const std::string& policy_path, std::optional<int> resolution,
                     const Common& c, std::ostream& out) {
  const ExperimentConfig config = load_config(c.config, c.overrides);
  const int res = resolution.value_or(config.grid_resolution);
  if (res < 1) throw UsageError("--resolution must be positive");
  if (model_path.empty() == policy_path.empty()) throw UsageError("pass exactly one of --model, --policy");
  fs::create_directories(c.out);
  if (!model_path.empty()) {
    const Json j = load_json_file(model_path);
    const std::string type = checkpoint_type(j);
    if (type != "dagp") {
      throw UnsupportedError("fall-probability and noise grids are not supported by this model ('" + type + "')");
    }
    const fs::path path = fs::path(c.out) / "dagp_grid.csv";
    write_text_file(path, grids_to_csv(export_grids(dagp_from_json(j), res, c.seed)));
    out << "wrote " << path.string() << "\n";
  } else {
    const Mlp policy = mlp_from_json(load_json_file(policy_path), "policy");
    const fs::path path = fs::path(c.out) / "policy_grid.csv";
    write_text_file(path, policy_grid_to_csv(policy_grid(policy, res)));
    out << "wrote " << path.string() << "\n";
  }
  return kExitOk;
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> v;
  for (auto s : parse_seed_list(text)) {
    if (s > 1000000000ULL) throw UsageError(std::string("bad ") + what);
    v.push_back(static_cast<int>(s));
  }
  return v;
}

int reproduce_table(bool seed_given, const std::optional<std::string>& seeds, const std::string& sizes, const std::string& methods,
                    const Common& c, std::ostream& out, std::ostream& err) {
  ExperimentConfig config = load_config(c.config, c.overrides);
  if (seed_given) {
    for (std::size_t i = 0; i < config.seeds.size(); ++i) config.seeds[i] = c.seed + i;
  }
  if (seeds) config.seeds = parse_seed_list(*seeds);
  if (!sizes.empty()) config.dataset_sizes = parse_int_list(sizes, "dataset size");
  if (!methods.empty()) {
    config.methods.clear();
    std::stringstream ss(methods);
    std::string name;
    while (std::getline(ss, name, ','))
      if (!name.empty()) config.methods.push_back(method_from_string(name));
  }
  config.validate();
  const auto cells = sweep_cells(config);
  std::size_t done = 0;
  const auto results = run_cells(config, cells, c.threads, [&](const CellResult& r, double secs) {
    ++done;
    err << "[" << done << "/" << cells.size() << "] " << to_string(r.method) << " N=" << r.n << " seed=" << r.seed
        << (r.ok ? " avg_step_reward=" + format_fixed2(r.avg_step_reward) : " missing: " + r.message) << " ("
        << std::fixed << std::setprecision(1) << secs << "s)\n";
    err.unsetf(std::ios::floatfield);
  });
  const auto summary = summarize(results);
  const std::string table = format_table(config, summary);
  write_text_file(c.out, table);
  write_text_file(sibling(c.out, "_cells.csv"), cells_to_csv(results));
  write_text_file(sibling(c.out, "_summary.csv"), summary_to_csv(summary));
  out << table;
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Data-association GP model-based policy search on the Wet-Chicken benchmark", "dagprl"};
  app.require_subcommand(1);

  Common gen_c;
  std::size_t gen_n = 0;
  auto* gen = app.add_subcommand("gen-data", "Sample uniform random transitions to CSV");
  gen->add_option("--n", gen_n, "Number of transitions")->required();
  add_common(gen, gen_c);

  Common tm_c;
  std::string tm_data;
  std::string tm_method = "dagp";
  auto* tm = app.add_subcommand("train-model", "Fit a dynamics model (dagp, gp) or an NFQ Q-network (nfq)");
  tm->add_option("--data", tm_data, "Dataset CSV")->required();
  tm->add_option("--method", tm_method, "dagp | gp | nfq")->check(CLI::IsMember({"dagp", "gp", "nfq"}));
  add_common(tm, tm_c);

  Common tp_c;
  std::string tp_model;
  std::string tp_data;
  auto* tp = app.add_subcommand("train-policy", "Policy search on a model checkpoint");
  tp->add_option("--model", tp_model, "Model checkpoint (dagp or plain_gp)")->required();
  tp->add_option("--data", tp_data, "Dataset CSV for start states (default: states stored in the checkpoint)");
  add_common(tp, tp_c);

  Common ev_c;
  std::string ev_policy;
  std::string ev_qnet;
  bool ev_random = false;
  int ev_n = 0;
  std::optional<std::string> ev_seeds;
  auto* ev = app.add_subcommand("evaluate", "True-environment evaluation over seeds");
  ev->add_option("--policy", ev_policy, "Policy checkpoint");
  ev->add_option("--qnet", ev_qnet, "Q-network checkpoint");
  ev->add_flag("--random", ev_random, "Uniform random policy");
  ev->add_option("--n", ev_n, "Training set size recorded in the report");
  ev->add_option("--seeds", ev_seeds, "Comma-separated evaluation seeds (default: config seeds)");
  add_common(ev, ev_c);

  Common eg_c;
  std::string eg_model;
  std::string eg_policy;
  std::optional<int> eg_res;
  auto* eg = app.add_subcommand("export-grids", "Fall-probability / noise grid or policy quiver CSV");
  eg->add_option("--model", eg_model, "DAGP checkpoint");
  eg->add_option("--policy", eg_policy, "Policy checkpoint");
  eg->add_option("--resolution", eg_res, "Points per axis (default 25)");
  add_common(eg, eg_c);

  Common rt_c;
  std::optional<std::string> rt_seeds;
  std::string rt_sizes;
  std::string rt_methods;
  auto* rt = app.add_subcommand("reproduce-table", "Full sweep over methods x N x seeds");
  rt->add_option("--seeds", rt_seeds, "Comma-separated seeds");
  rt->add_option("--sizes", rt_sizes, "Comma-separated dataset sizes");
  rt->add_option("--methods", rt_methods, "Comma-separated methods");
  add_common(rt, rt_c);
  rt->get_option("--seed")->description("First seed; seeds become seed, seed+1, ... (count from the config)");
  rt->get_option("--seed")->excludes("--seeds");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsageError;
  }

  try {
    if (gen->parsed()) return gen_data(gen_n, gen_c, out);
    if (tm->parsed()) return train_model(tm_data, tm_method, tm_c, out);
    if (tp->parsed()) return train_policy_cmd(tp_model, tp_data, tp_c, out);
    if (ev->parsed()) return evaluate_cmd(ev_policy, ev_qnet, ev_random, ev_n, ev_seeds, ev_c, out);
    if (eg->parsed()) return export_grids_cmd(eg_model, eg_policy, eg_res, eg_c, out);
    if (rt->parsed()) return reproduce_table(rt->count("--seed") > 0, rt_seeds, rt_sizes, rt_methods, rt_c, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsageError;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitUsageError;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kExitRuntimeError;
  } catch (const IoError& e) {
    err << "file error: " << e.what() << "\n";
    return kExitRuntimeError;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << "\n";
    return kExitRuntimeError;
  } catch (const UnsupportedError& e) {
    err << "not supported by this model: " << e.what() << "\n";
    return kExitRuntimeError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
  return kExitUsageError;
}

}  // namespace dagprl::cli

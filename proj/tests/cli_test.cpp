#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "cli.hpp"
#include "dagprl/checkpoint.hpp"
#include "dagprl/csv.hpp"
#include "dagprl/experiment.hpp"

namespace dagprl {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("dagprl_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    write_text_file(path("small.json"), R"({
      "dagp": {"iterations": 60, "inducing": 15},
      "plain_gp": {"iterations": 60, "inducing": 15},
      "policy": {"steps": 10, "samples": 5},
      "nfq": {"iterations": 2, "max_fit_steps": 50},
      "evaluation": {"rollouts": 20, "horizon": 30},
      "seeds": [3, 4],
      "dataset_sizes": [60]
    })");
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::string read(const std::string& name) const { return read_text_file(path(name)); }

  fs::path dir_;
};

std::size_t lines(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

TEST_F(CliTest, GenDataWritesRowsAndIsByteStable) {
  const Outcome a = run({"gen-data", "--n", "250", "--seed", "7", "--out", path("a.csv")});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_NE(a.out.find("N=250"), std::string::npos);
  EXPECT_NE(a.out.find("falls="), std::string::npos);
  EXPECT_EQ(lines(read("a.csv")), 251u);
  ASSERT_EQ(run({"gen-data", "--n", "250", "--seed", "7", "--out", path("b.csv")}).code, 0);
  EXPECT_EQ(read("a.csv"), read("b.csv"));
}

TEST_F(CliTest, UsageErrorsExitWithTwo) {
  EXPECT_EQ(run({"gen-data", "--n", "0", "--out", path("x.csv")}).code, 2);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"no-such-command"}).code, 2);
  EXPECT_EQ(run({"gen-data", "--out", path("x.csv")}).code, 2);
  EXPECT_EQ(run({"train-model", "--data", path("x.csv"), "--method", "svm", "--out", path("m.json")}).code, 2);
  EXPECT_EQ(run({"evaluate", "--random", "--seeds", "", "--out", path("e.csv")}).code, 2);
  EXPECT_EQ(run({"evaluate", "--random", "--set", "seeds=[]", "--out", path("e.csv")}).code, 2);
  EXPECT_EQ(run({"evaluate", "--random", "--set", "evaluation.horizonn=3", "--out", path("e.csv")}).code, 2);
  EXPECT_EQ(run({"evaluate", "--out", path("e.csv")}).code, 2);
  EXPECT_EQ(run({"gen-data", "--help"}).code, 0);
}

TEST_F(CliTest, MalformedCsvIsARuntimeErrorWithLineNumber) {
  write_text_file(path("bad.csv"), "x,y,ax,ay,xn,yn\n1,2,0,0,1,2\n1,2,zero,0,1,2\n");
  const Outcome o = run({"train-model", "--data", path("bad.csv"), "--out", path("m.json")});
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("line 3"), std::string::npos) << o.err;
}

TEST_F(CliTest, MissingOrMismatchedCheckpointsAreRuntimeErrors) {
  EXPECT_EQ(run({"train-policy", "--model", path("none.json"), "--out", path("p.json")}).code, 1);
  ASSERT_EQ(run({"gen-data", "--n", "60", "--out", path("d.csv")}).code, 0);
  ASSERT_EQ(run({"train-model", "--data", path("d.csv"), "--method", "nfq", "--config", path("small.json"), "--out",
                 path("q.json")})
                .code,
            0);
  const Outcome o = run({"train-policy", "--model", path("q.json"), "--out", path("p.json")});
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("checkpoint"), std::string::npos);
}

TEST_F(CliTest, PlainGpModelFeedsPolicyTrainingButNotFallGrids) {
  ASSERT_EQ(run({"gen-data", "--n", "60", "--out", path("d.csv")}).code, 0);
  const std::vector<std::string> train{"train-model", "--data", path("d.csv"), "--method", "gp",
                                       "--config",    path("small.json"), "--out", path("g.json")};
  ASSERT_EQ(run(train).code, 0);
  EXPECT_EQ(checkpoint_type(parse_json(read("g.json"), "g")), "plain_gp");
  EXPECT_EQ(lines(read("g_curve.csv")), 61u);
  const Outcome p = run({"train-policy", "--model", path("g.json"), "--config", path("small.json"), "--out", path("p.json")});
  ASSERT_EQ(p.code, 0) << p.err;
  const Outcome grid = run({"export-grids", "--model", path("g.json"), "--out", path("grids")});
  EXPECT_EQ(grid.code, 1);
  EXPECT_NE(grid.err.find("not supported by this model"), std::string::npos);
}

TEST_F(CliTest, PolicyCurveIsReproducibleBitForBit) {
  ASSERT_EQ(run({"gen-data", "--n", "60", "--out", path("d.csv")}).code, 0);
  ASSERT_EQ(run({"train-model", "--data", path("d.csv"), "--config", path("small.json"), "--out", path("m.json")}).code, 0);
  for (const char* name : {"p1.json", "p2.json"}) {
    ASSERT_EQ(run({"train-policy", "--model", path("m.json"), "--config", path("small.json"), "--seed", "5", "--out",
                   path(name)})
                  .code,
              0);
  }
  EXPECT_EQ(read("p1_curve.csv"), read("p2_curve.csv"));
  EXPECT_EQ(read("p1.json"), read("p2.json"));
  EXPECT_EQ(lines(read("p1_curve.csv")), 11u);
}

TEST_F(CliTest, GridsHaveOneRowPerCell) {
  ASSERT_EQ(run({"gen-data", "--n", "60", "--out", path("d.csv")}).code, 0);
  ASSERT_EQ(run({"train-model", "--data", path("d.csv"), "--config", path("small.json"), "--out", path("m.json")}).code, 0);
  ASSERT_EQ(run({"export-grids", "--model", path("m.json"), "--out", path("grids")}).code, 0);
  const std::string csv = read("grids/dagp_grid.csv");
  EXPECT_EQ(lines(csv), 626u);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "x,y,p_fall,sigma_x_stay");
  while (std::getline(in, line)) {
    const auto f = split_csv_line(line);
    const double p = std::stod(f[2]);
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
  }
  ASSERT_EQ(run({"train-policy", "--model", path("m.json"), "--config", path("small.json"), "--out", path("p.json")}).code, 0);
  ASSERT_EQ(run({"export-grids", "--policy", path("p.json"), "--resolution", "7", "--out", path("grids")}).code, 0);
  EXPECT_EQ(lines(read("grids/policy_grid.csv")), 50u);
}

// gen-data / train-model / train-policy / evaluate with --seed s rebuild the
// sweep cell (method, N, s).
TEST_F(CliTest, CommandPipelineMatchesSweepCell) {
  const ExperimentConfig config = load_config(path("small.json"), {});
  for (const char* method : {"dagp", "gp", "nfq"}) {
    SCOPED_TRACE(method);
    ASSERT_EQ(run({"gen-data", "--n", "60", "--seed", "4", "--out", path("d.csv")}).code, 0);
    ASSERT_EQ(run({"train-model", "--data", path("d.csv"), "--method", method, "--config", path("small.json"),
                   "--seed", "4", "--out", path("m.json")})
                  .code,
              0);
    std::vector<std::string> eval{"evaluate", "--config", path("small.json"), "--seeds", "4", "--n", "60", "--out",
                                  path("e.csv")};
    if (std::string(method) == "nfq") {
      eval.insert(eval.end(), {"--qnet", path("m.json")});
    } else {
      ASSERT_EQ(run({"train-policy", "--model", path("m.json"), "--config", path("small.json"), "--seed", "4", "--out",
                     path("p.json")})
                    .code,
                0);
      eval.insert(eval.end(), {"--policy", path("p.json")});
    }
    ASSERT_EQ(run(eval).code, 0);
    const CellResult cell = run_cell(config, method_from_string(method), 60, 4);
    ASSERT_TRUE(cell.ok) << cell.message;
    const auto row = split_csv_line(read_text_file(path("e.csv")).substr(read("e.csv").find('\n') + 1));
    EXPECT_EQ(row[3], format_double(cell.avg_step_reward));
  }
}

TEST_F(CliTest, ReproduceTableLayoutAndDeterminism) {
  const std::vector<std::string> args{"reproduce-table", "--config", path("small.json"), "--threads", "2",
                                      "--methods",       "nfq,random", "--out", path("t1.md")};
  const Outcome a = run(args);
  ASSERT_EQ(a.code, 0) << a.err;
  std::vector<std::string> again = args;
  again.back() = path("t2.md");
  again[4] = "1";
  ASSERT_EQ(run(again).code, 0);
  EXPECT_EQ(read("t1.md"), read("t2.md"));
  EXPECT_EQ(read("t1_cells.csv"), read("t2_cells.csv"));
  const std::string table = read("t1.md");
  EXPECT_EQ(table.rfind("| N | NFQ | GP | DAGP | Random |", 0), 0u);
  EXPECT_NE(table.find("| 60 | "), std::string::npos);
  EXPECT_NE(table.find("| random baseline |"), std::string::npos);
  EXPECT_NE(table.find(" ± "), std::string::npos);
  EXPECT_EQ(lines(read("t1_cells.csv")), 5u);
}

TEST(Report, StderrMatchesHandCalculation) {
  std::vector<CellResult> cells;
  for (double v : {1.0, 2.0, 4.0}) {
    CellResult c;
    c.method = Method::kDagp;
    c.n = 250;
    c.ok = true;
    c.avg_step_reward = v;
    cells.push_back(c);
  }
  const auto rows = summarize(cells);
  ASSERT_EQ(rows.size(), 1u);
  // mean 7/3; sample variance ((4/3)^2 + (1/3)^2 + (5/3)^2) / 2 = 7/3.
  EXPECT_NEAR(rows[0].mean, 7.0 / 3.0, 1e-15);
  EXPECT_NEAR(rows[0].stderr_, std::sqrt(7.0 / 3.0 / 3.0), 1e-15);
  EXPECT_EQ(format_cell(&rows[0]), "2.33 ± 0.88");
}

TEST(Report, FailedCellsAreMissing) {
  ExperimentConfig config;
  config.dataset_sizes = {100};
  CellResult failed;
  failed.method = Method::kGp;
  failed.n = 100;
  failed.message = "boom";
  CellResult ok = failed;
  ok.method = Method::kNfq;
  ok.ok = true;
  ok.avg_step_reward = 1.234;
  const auto rows = summarize({failed, ok});
  const std::string table = format_table(config, rows);
  EXPECT_NE(table.find("| 100 | 1.23 ± 0.00 | missing | missing | missing |"), std::string::npos) << table;
  EXPECT_NE(cells_to_csv({failed}).find("gp,100,0,missing,missing"), std::string::npos);
}

TEST(Config, RoundTripIsIdentity) {
  ExperimentConfig c;
  c.dataset_sizes = {7, 9};
  c.seeds = {11};
  c.methods = {Method::kNfq};
  c.dagp.iterations = 17;
  c.dagp.heuristic_belief_init = true;
  c.policy.mode_score_gradient = false;
  c.policy.learning_rate = 0.125;
  c.nfq.grid = {{0.5, -0.5}};
  c.evaluation.gamma = 0.95;
  const nlohmann::json once = config_to_json(c);
  const nlohmann::json twice = config_to_json(config_from_json(parse_json(once.dump(), "cfg")));
  EXPECT_EQ(once, twice);
  EXPECT_EQ(config_to_json(config_from_json(nlohmann::json::object())), config_to_json(ExperimentConfig{}));
}

TEST(Config, DefaultsFollowTheProtocol) {
  const ExperimentConfig c = load_config("", {});
  EXPECT_EQ(c.policy.horizon, 5);
  EXPECT_EQ(c.policy.samples, 20);
  EXPECT_DOUBLE_EQ(c.policy.gamma, 0.9);
  EXPECT_EQ(c.evaluation.horizon, 100);
  EXPECT_EQ(c.evaluation.rollouts, 1000);
  EXPECT_EQ(c.seeds.size(), 10u);
  EXPECT_EQ(c.dataset_sizes, (std::vector<int>{100, 250, 500, 1000, 2500, 5000}));
  EXPECT_EQ(c.methods.size(), 4u);
}

TEST(Config, OverridesBeatFileAndRejectUnknownKeys) {
  const fs::path p = fs::temp_directory_path() / "dagprl_cfg_override.json";
  write_text_file(p, R"({"policy": {"steps": 5, "gamma": 0.5}})");
  const ExperimentConfig c = load_config(p.string(), {"policy.steps=9", "methods=[\"gp\"]"});
  EXPECT_EQ(c.policy.steps, 9);
  EXPECT_DOUBLE_EQ(c.policy.gamma, 0.5);
  EXPECT_EQ(c.methods, std::vector<Method>{Method::kGp});
  EXPECT_THROW(load_config(p.string(), {"policy.stepz=1"}), ConfigError);
  EXPECT_THROW(load_config(p.string(), {"policy.steps=1.5"}), ConfigError);
  EXPECT_THROW(load_config(p.string(), {"policy.steps"}), ConfigError);
  EXPECT_THROW(load_config(p.string(), {"dataset_sizes=[]"}), ConfigError);
  fs::remove(p);
}

TEST(Sweep, ThreadCountDoesNotChangeResults) {
  ExperimentConfig c;
  c.methods = {Method::kNfq, Method::kRandom};
  c.dataset_sizes = {40};
  c.seeds = {1, 2, 3};
  c.nfq.iterations = 2;
  c.nfq.max_fit_steps = 30;
  c.evaluation.rollouts = 10;
  const auto cells = sweep_cells(c);
  ASSERT_EQ(cells.size(), 6u);
  EXPECT_EQ(cells_to_csv(run_cells(c, cells, 1)), cells_to_csv(run_cells(c, cells, 4)));
}

}  // namespace
}  // namespace dagprl

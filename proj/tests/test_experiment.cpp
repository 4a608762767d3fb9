#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "dyhfl/experiment.hpp"

namespace ex = dyhfl::exp;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("dyhfl_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

const char* kMinimal = R"({
  "strategies": ["dyhfl", "sync"],
  "agents": [4],
  "straggler_fractions": [0.5],
  "hidden_layers": [6],
  "dataset": {"synth": {"classes": 3, "features": 5, "samples_per_class": 40}},
  "strategy": {"total_rounds": 3, "window_divisor": 3, "encryption": "plain"},
  "train": {"local_epochs": 1, "batch_size": 16},
  "repetitions": 2
})";

int cli(const std::string& args) {
  const std::string cmd = std::string(DYHFL_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, DefaultsAndRoundTrip) {
  const auto cfg = ex::parse_config("{}");
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.strategy.alpha, 0.7);
  EXPECT_EQ(cfg.train.local_epochs, 10);
  EXPECT_FALSE(cfg.export_timing);
  const auto again = ex::parse_config(ex::to_json_text(ex::parse_config(kMinimal)));
  EXPECT_EQ(ex::to_json_text(again), ex::to_json_text(ex::parse_config(kMinimal)));
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(ex::parse_config(R"({"agnets": [4]})"), ex::ConfigError);
  EXPECT_THROW(ex::parse_config("{not json"), ex::ConfigError);
  auto cfg = ex::parse_config(R"({"strategy": {"alpha": 0.6, "beta": 0.3}})");
  try {
    cfg.validate();
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("alpha/beta"), std::string::npos);
  }
  cfg = ex::parse_config(R"({"strategies": ["fedavg"]})");
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Run, WritesRoundsSummaryAndManifest) {
  const auto dir = scratch("run");
  auto cfg = ex::parse_config(kMinimal);
  cfg.out_dir = dir.string();
  ASSERT_EQ(ex::cmd_run(cfg), 0);
  EXPECT_TRUE(fs::exists(dir / "rounds.csv"));
  EXPECT_TRUE(fs::exists(dir / "summary.json"));
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  EXPECT_FALSE(fs::exists(dir / "timing.csv"));
  const auto rows = read_csv(dir / "rounds.csv");
  // header + 2 strategies * 2 repetitions * 3 rounds
  ASSERT_EQ(rows.size(), 1u + 12u);
  EXPECT_EQ(rows[0][0], "strategy");
  EXPECT_EQ(rows[0].size(), 18u);
  EXPECT_NE(slurp(dir / "manifest.json").find("repetition_seeds"), std::string::npos);
}

TEST(Run, ManifestRerunIsByteIdentical) {
  const auto a = scratch("rerun_a"), b = scratch("rerun_b");
  auto cfg = ex::parse_config(kMinimal);
  cfg.out_dir = a.string();
  ASSERT_EQ(ex::cmd_run(cfg), 0);
  auto again = ex::load_config(a / "manifest.json");
  again.out_dir = b.string();
  ASSERT_EQ(ex::cmd_run(again), 0);
  EXPECT_EQ(slurp(a / "rounds.csv"), slurp(b / "rounds.csv"));
}

TEST(Run, ExportsTimingAndShardsOnRequest) {
  const auto dir = scratch("export");
  auto cfg = ex::parse_config(kMinimal);
  cfg.out_dir = dir.string();
  cfg.export_timing = cfg.export_shards = true;
  cfg.repetitions = 1;
  ASSERT_EQ(ex::cmd_run(cfg), 0);
  const auto timing = read_csv(dir / "timing.csv");
  ASSERT_GT(timing.size(), 1u);
  EXPECT_TRUE(timing[1].back() == "true" || timing[1].back() == "false");
  // Every training sample appears in exactly one shard.
  const auto shards = read_csv(dir / "shards.csv");
  std::map<std::string, int> seen;
  for (std::size_t i = 1; i < shards.size(); ++i) ++seen[shards[i].back()];
  for (const auto& [idx, count] : seen) EXPECT_EQ(count, 1) << idx;
  EXPECT_EQ(seen.size(), static_cast<std::size_t>(ex::prepare_data(cfg, 42).train.size()));
}

TEST(Fairness, SweepShape) {
  const auto dir = scratch("fairness");
  auto cfg = ex::parse_config(kMinimal);
  cfg.out_dir = dir.string();
  cfg.repetitions = 1;
  cfg.hidden_layers = {54, 20};
  cfg.dataset.synth_features = 18;
  cfg.dataset.synth_classes = 8;
  ASSERT_EQ(ex::cmd_fairness(cfg), 0);
  const auto rows = read_csv(dir / "fairness.csv");
  EXPECT_EQ(rows[0], (std::vector<std::string>{"method", "dataset", "agents", "straggler_pct", "srs", "frs",
                                               "conv_round", "comm_cost_mb", "repetition"}));
  std::map<std::string, int> per_method;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i][8] == "avg") continue;
    ++per_method[rows[i][0]];
    if (rows[i][0] == "dyhfl") EXPECT_EQ(rows[i][5], "1") << "fast agents are always selected";
  }
  EXPECT_EQ(per_method["dyhfl"], 45);
  EXPECT_EQ(per_method["bfl"], 45);
  EXPECT_EQ(rows.size(), 1u + 2 * (45 + 45));
}

TEST(CommCostGrid, SyncAndAsyncRows) {
  const auto dir = scratch("commcost");
  ex::ExperimentConfig cfg;
  cfg.out_dir = dir.string();
  cfg.strategy.total_rounds = 20;
  ASSERT_EQ(ex::cmd_commcost(cfg), 0);
  std::map<std::string, std::string> sync, async;
  for (const auto& r : read_csv(dir / "commcost.csv")) {
    if (r[2] != "0.009") continue;
    if (r[0] == "sync") sync[r[1]] = r[3];
    if (r[0] == "async") async[r[1]] = r[3];
  }
  EXPECT_EQ(sync["20"], "3.6");
  EXPECT_EQ(sync["40"], "7.2");
  EXPECT_EQ(sync["80"], "14.4");
  EXPECT_EQ(sync["100"], "18");
  for (const auto& [n, v] : sync) EXPECT_DOUBLE_EQ(std::stod(async[n]), 3 * std::stod(v));
}

TEST(Cli, SubcommandsAndErrors) {
  const auto dir = scratch("cli");
  const auto cfg_path = dir / "cfg.json";
  std::ofstream(cfg_path) << kMinimal;
  EXPECT_EQ(cli("run --config " + cfg_path.string() + " --out " + (dir / "run").string() + " --reps 1"), 0);
  EXPECT_TRUE(fs::exists(dir / "run" / "rounds.csv"));
  EXPECT_EQ(cli("commcost --out " + (dir / "cost").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "cost" / "commcost.csv"));
  EXPECT_EQ(cli("run --config " + cfg_path.string() + " --strategies nope --out " + (dir / "bad").string()), 2);
  EXPECT_NE(cli("frobnicate"), 0);
}

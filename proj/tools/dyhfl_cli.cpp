// Command-line front end for the federated experiments.
//
//   dyhfl_cli run       --config cfg.json --out results/
//   dyhfl_cli fairness  --config cfg.json
//   dyhfl_cli commcost
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dyhfl/experiment.hpp"

namespace {

struct Overrides {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  std::string strategies;
  std::vector<int> agents;
  int reps = 0;
  bool rolling = false;
  bool plain = false;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON experiment config");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--strategies", o.strategies, "Comma-separated strategy names");
  cmd->add_option("--agents", o.agents, "Agent counts")->delimiter(',');
  cmd->add_option("--reps", o.reps, "Repetitions");
  cmd->add_flag("--rolling-selection", o.rolling, "Slide the selection window through phase two");
  cmd->add_flag("--plain", o.plain, "Disable encryption");
}

dyhfl::exp::ExperimentConfig resolve(const CLI::App* cmd, const Overrides& o) {
  auto cfg = o.config.empty() ? dyhfl::exp::ExperimentConfig{} : dyhfl::exp::load_config(o.config);
  if (cmd->count("--out")) cfg.out_dir = o.out;
  if (cmd->count("--seed")) cfg.seed = o.seed;
  if (cmd->count("--strategies")) cfg.strategies = split_list(o.strategies);
  if (cmd->count("--agents")) cfg.agents = o.agents;
  if (cmd->count("--reps")) cfg.repetitions = o.reps;
  if (o.rolling) cfg.strategy.rolling_selection = true;
  if (o.plain) cfg.strategy.encryption = dyhfl::fl::Encryption::kPlain;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning experiments with dynamic agent selection"};
  app.require_subcommand(1);
  Overrides run_o, fair_o, cost_o;
  auto* run = app.add_subcommand("run", "Run the strategy x agents x repetitions matrix");
  auto* fair = app.add_subcommand("fairness", "Straggler/fast selection-rate sweep for dyhfl and bfl");
  auto* cost = app.add_subcommand("commcost", "Closed-form communication cost grid");
  add_common(run, run_o);
  add_common(fair, fair_o);
  add_common(cost, cost_o);
  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto cfg = resolve(run, run_o);
      return dyhfl::exp::cmd_run(cfg);
    }
    if (*fair) {
      const auto cfg = resolve(fair, fair_o);
      return dyhfl::exp::cmd_fairness(cfg);
    }
    const auto cfg = resolve(cost, cost_o);
    return dyhfl::exp::cmd_commcost(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

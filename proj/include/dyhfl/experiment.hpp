#ifndef DYHFL_EXPERIMENT_HPP_
#define DYHFL_EXPERIMENT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dyhfl/dataset.hpp"
#include "dyhfl/metrics.hpp"
#include "dyhfl/strategies.hpp"

namespace dyhfl::exp {

struct DatasetSource {
  std::string kind = "synth";  // "synth" or "csv"
  std::string csv_path;
  std::string label_column = "label";
  bool drop_constant_columns = true;
  int synth_classes = 8;
  int synth_features = 18;
  int synth_samples_per_class = 250;
  double synth_spread = 0.5;
};

struct FairnessSweep {
  std::vector<int> agents{10, 20, 30, 40, 50};
  std::vector<double> straggler_fractions{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  int rounds = 20;
  std::size_t shard_size = 100;  // every agent holds the same amount of data
};

struct CommCostGrid {
  std::vector<int> agents{20, 40, 80, 100};
  std::vector<double> model_mb{0.009, 0.002, 0.014};
  double selected_fraction = 0.6;      // N_sel / N for DyHFL and BFL
  int frequency = 3;                   // Async F
  double asr_buffer_fraction = 0.6;    // Buffs / N
  int asr_circumvent_threshold = 5;    // CirT
};

struct ExperimentConfig {
  std::vector<std::string> strategies{"dyhfl"};
  DatasetSource dataset;
  data::PartitionScheme partition = data::PartitionScheme::kIdentical;
  double dirichlet_alpha = 0.5;
  std::vector<int> agents{10};
  std::vector<double> straggler_fractions{0.5};
  std::vector<Eigen::Index> hidden_layers{54, 20};
  fl::StrategyConfig strategy;
  nn::TrainConfig train;
  double target_accuracy = 0.946;
  std::string out_dir = "out";
  std::uint64_t seed = 42;
  int repetitions = 4;
  bool export_timing = false;
  bool export_shards = false;
  FairnessSweep fairness;
  CommCostGrid commcost;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// JSON text. Unknown keys are rejected; absent keys keep their defaults.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string to_json_text(const ExperimentConfig& cfg);

// Seed of repetition `rep`.
inline std::uint64_t repetition_seed(const ExperimentConfig& cfg, int rep) { return cfg.seed + static_cast<std::uint64_t>(rep); }

/// One fully specified run: data prepared, shards and profiles built.
struct Cell {
  fl::StrategyKind strategy;
  int agents = 0;
  double straggler_fraction = 0;
  int repetition = 0;
  std::uint64_t seed = 0;
};

struct PreparedData {
  data::Dataset train;
  data::Dataset test;
};

PreparedData prepare_data(const ExperimentConfig& cfg, std::uint64_t seed);

// Federation for one cell: shards partitioned from `prepared.train`.
fl::Federation build_federation(const ExperimentConfig& cfg, const PreparedData& prepared, int agents,
                                double straggler_fraction, std::uint64_t seed,
                                std::vector<data::IndexList>* shard_indices = nullptr);

// Each command writes into cfg.out_dir and returns a process exit code.
int cmd_run(const ExperimentConfig& cfg);
int cmd_fairness(const ExperimentConfig& cfg);
int cmd_commcost(const ExperimentConfig& cfg);

// Writes `content` to `path` through a temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

// Shortest round-trip representation of a double.
std::string format_double(double v);

}  // namespace dyhfl::exp

#endif  // DYHFL_EXPERIMENT_HPP_

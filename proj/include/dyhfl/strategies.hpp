#ifndef DYHFL_STRATEGIES_HPP_
#define DYHFL_STRATEGIES_HPP_

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dyhfl/aggregation.hpp"
#include "dyhfl/dataset.hpp"
#include "dyhfl/mlp.hpp"
#include "dyhfl/selection.hpp"
#include "dyhfl/sim_env.hpp"

namespace dyhfl::fl {

enum class StrategyKind { kDyHfl, kSync, kAsync, kFedBuff, kBfl, kAsrFed };

StrategyKind parse_strategy(const std::string& name);
std::string to_string(StrategyKind kind);
std::vector<StrategyKind> all_strategies();

// Which communication time feeds Global_MT.
enum class CommMetric {
  kLinkOnly,   // uplink + downlink
  kRoundTrip,  // uplink + synchronous server wait + downlink
};

struct StrategyConfig {
  int total_rounds = 10;
  int window_divisor = 10;
  double alpha = 0.7;
  double beta = 0.3;
  int buffer_size = 0;  // FedBuff; 0 means round(0.75 * N)
  double async_mix_rate = 0.5;
  int async_frequency = 1;  // AsyncFL arrivals per agent per nominal round
  Encryption encryption = Encryption::kPaillier;
  bool rolling_selection = false;
  CommMetric comm_metric = CommMetric::kLinkOnly;
  unsigned key_bits = 2048;
  std::uint64_t codec_scale = he::FixedPointCodec::kDefaultScale;
  double encryption_cost_per_param = 0.001;

  int sliding_window() const { return total_rounds / window_divisor; }
  int resolved_buffer_size(int agent_count) const;
  // Throws std::invalid_argument naming the offending field.
  void validate(int agent_count) const;
};

struct LearningTask {
  std::vector<data::Dataset> shards;  // shards[i] belongs to profiles[i]
  data::Dataset eval_set;
  nn::TrainConfig train;
};

struct Federation {
  std::vector<sim::AgentProfile> profiles;
  std::vector<Eigen::Index> layer_dims{18, 54, 20, 8};
  std::optional<LearningTask> task;  // absent: timing and selection only
  std::uint64_t seed = 0;

  int agent_count() const { return static_cast<int>(profiles.size()); }
  std::size_t model_bytes() const;
};

struct RoundRecord {
  int round_index = 0;  // 1-based
  std::string strategy;
  std::vector<int> participants;  // ascending agent ids
  double virtual_duration = 0;
  double virtual_time = 0;  // clock at the end of the round
  std::uint64_t bytes_up = 0;
  std::uint64_t bytes_down = 0;
  std::optional<nn::EvalReport> global_eval;
  std::optional<double> st_thrsh;
  std::optional<double> lt_thrsh;
  std::vector<sim::TimingSample> timings;  // participants only
};

struct RunResult {
  std::string strategy;
  std::vector<RoundRecord> records;
  std::vector<int> selected_set;             // DyHFL and BFL selection after the first phase
  std::vector<std::vector<int>> selection_history;
  std::vector<double> st_history;
  std::optional<double> lt_thrsh;
  std::optional<int> circumvent_threshold;   // ASR_Fed
  bool flagged = false;
  std::string flag_reason;
  std::vector<double> final_params;
  std::size_t model_bytes = 0;
};

RunResult run_dyhfl(const Federation& fed, const StrategyConfig& cfg);
RunResult run_sync(const Federation& fed, const StrategyConfig& cfg);
RunResult run_async(const Federation& fed, const StrategyConfig& cfg);
RunResult run_fedbuff(const Federation& fed, const StrategyConfig& cfg);
RunResult run_bfl(const Federation& fed, const StrategyConfig& cfg);
RunResult run_asr_fed(const Federation& fed, const StrategyConfig& cfg);
RunResult run_strategy(StrategyKind kind, const Federation& fed, const StrategyConfig& cfg);

// ceil(sum of circumvent delays / buffer count); 0 when there are no buffer agents.
int circumvent_threshold(std::span<const double> circumvent_delays, std::size_t buffer_count);

}  // namespace dyhfl::fl

#endif  // DYHFL_STRATEGIES_HPP_

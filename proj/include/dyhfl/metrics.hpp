#ifndef DYHFL_METRICS_HPP_
#define DYHFL_METRICS_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dyhfl/sim_env.hpp"
#include "dyhfl/strategies.hpp"

namespace dyhfl::eval {

using fl::StrategyKind;

// Inputs to the closed-form communication cost. Only the fields a method
// reads need to be set.
struct CommCostInput {
  double model_mb = 0;  // M
  std::optional<std::int64_t> rounds;          // T
  std::optional<std::int64_t> agents;          // N
  std::optional<std::int64_t> buffer_size;     // B
  std::optional<std::int64_t> selected;        // N_sel
  std::optional<std::int64_t> sliding_window;  // SW
  std::optional<std::int64_t> frequency;       // F
  std::optional<std::int64_t> asr_buffer;      // Buffs
  std::optional<std::int64_t> asr_circumvent;  // Cirs
  std::optional<std::int64_t> asr_threshold;   // CirT
};

/// Number of model transmissions counted by each method's cost formula:
///   FedBuff T*B, Sync T*N, BFL N + (T-1)*N_sel, ASR_Fed T*Buffs + (T-CirT)*Cirs,
///   DyHFL SW*N + (T-SW)*N_sel, Async T*N*F.
/// The (T - CirT) term is clamped at 0. Throws std::invalid_argument naming a
/// missing or negative field.
std::int64_t transmission_count(StrategyKind method, const CommCostInput& in);

/// Cost in MB: transmission_count * M. M is taken as a whole number of bytes
/// (M * 1e6 rounded), so results are exact decimal multiples of one byte.
double comm_cost(StrategyKind method, const CommCostInput& in);

// True when ASR_Fed's (T - CirT) term had to be clamped.
bool asr_threshold_clamped(const CommCostInput& in);

struct FairnessReport {
  double srs = 0;
  double frs = 0;
  int selected_stragglers = 0;
  int total_stragglers = 0;
  int selected_fast = 0;
  int total_fast = 0;
  bool srs_vacuous = false;  // no stragglers: srs reported as 1.0
  bool frs_vacuous = false;
};

// Throws std::invalid_argument if `selected` names an agent not in `profiles`.
FairnessReport fairness(std::span<const sim::AgentProfile> profiles, std::span<const int> selected);

// First 1-based round whose global accuracy reaches `target`.
std::optional<int> convergence_round(std::span<const fl::RoundRecord> records, double target_accuracy);
std::string format_convergence(const std::optional<int>& round);  // "not converged" when absent

struct ComplexityReport {
  std::string strategy;
  std::string bound;
  bool within_bound = true;
  std::vector<std::string> violations;
};

struct PopulationMeasurement {
  int agents = 0;                            // N
  std::vector<std::uint64_t> per_round_uploads;
  int buffer_size = 0;                       // FedBuff B
  int frequency = 1;                         // Async F
  int sliding_window = 0;                    // DyHFL SW
  std::vector<int> selected_set;             // DyHFL selection
};

/// Checks measured per-round upload counts against the strategy's growth
/// class: Sync Theta(n), FedBuff Theta(B), DyHFL between Omega(k) and O(n),
/// Async Theta(n*F). Needs measurements at two or more population sizes.
ComplexityReport complexity_check(StrategyKind strategy, std::span<const PopulationMeasurement> measurements);

// Per-round upload counts recovered from a run's byte log.
std::vector<std::uint64_t> uploads_per_round(const fl::RunResult& run);

}  // namespace dyhfl::eval

#endif  // DYHFL_METRICS_HPP_

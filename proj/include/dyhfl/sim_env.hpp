#ifndef DYHFL_SIM_ENV_HPP_
#define DYHFL_SIM_ENV_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "dyhfl/rng.hpp"

namespace dyhfl::sim {

enum class SpeedClass { kFast, kStraggler };

// Inclusive integer range for uniform link-delay draws.
struct DelayRange {
  int lo = 1;
  int hi = 1;
};

inline constexpr DelayRange kFastDelay{1, 5};
inline constexpr DelayRange kStragglerDelay{6, 10};

struct AgentProfile {
  int agent_id = 0;
  double compute_rate = 1.0;  // samples per virtual time unit
  DelayRange uplink;
  DelayRange downlink;
  SpeedClass speed_class = SpeedClass::kFast;
  std::size_t data_size = 0;
};

/// Monotone virtual time source.
class VirtualClock {
 public:
  double now() const { return now_; }
  void advance_to(double t) {
    if (t < now_) throw std::logic_error("virtual clock cannot move backwards");
    now_ = t;
  }
  void advance_by(double dt) { advance_to(now_ + dt); }

 private:
  double now_ = 0.0;
};

struct TimingSample {
  int agent_id = 0;
  double train_time = 0;   // local training plus encryption surcharge
  double comm_time = 0;    // uplink + server wait + downlink
  double link_time = 0;    // uplink + downlink
  double server_wait = 0;
  std::size_t data_size = 0;
};

// One agent's draws for one round.
struct AgentDraw {
  double train_time = 0;
  int uplink = 0;
  int downlink = 0;
};

struct TimingOptions {
  // Encryption cost folded into training time, per model parameter.
  double encryption_cost_per_param = 0.001;
  std::size_t param_count = 0;
  bool encrypted = true;

  double surcharge() const { return encrypted ? encryption_cost_per_param * static_cast<double>(param_count) : 0.0; }
};

enum class ServerPolicy { kSynchronous };

struct RoundTiming {
  std::vector<TimingSample> samples;  // same order as the input profiles
  double duration = 0;                // max arrival + max downlink
};

/// floor(agent_count * straggler_fraction) agents, chosen by seeded shuffle,
/// become stragglers: links U{6..10}, compute rate U[0.2, 0.5]. The rest are
/// fast: links U{1..5}, compute rate U[1, 2].
std::vector<AgentProfile> make_profiles(int agent_count, double straggler_fraction,
                                        std::span<const std::size_t> shard_sizes, std::uint64_t rng_seed);

// data_size / compute_rate scaled by a jitter drawn from U[0.9, 1.1].
double sample_training_time(const AgentProfile& profile, Rng& rng);
// uplink draw + server_wait + downlink draw.
double sample_comm_time(const AgentProfile& profile, double server_wait, Rng& rng);
int sample_delay(const DelayRange& range, Rng& rng);

// Draws are a pure function of the profile's behavioural fields and
// round_seed: independent of which other agents take part in the round, and
// identical for identical profiles.
AgentDraw draw_agent(const AgentProfile& profile, std::uint64_t round_seed, const TimingOptions& options);

/// Synchronous round: the server waits for the last arrival, so agent i's
/// server_wait is max(arrival) - arrival_i with arrival = train + uplink.
RoundTiming round_timing(std::span<const AgentProfile> profiles, std::uint64_t round_seed,
                         const TimingOptions& options, ServerPolicy policy = ServerPolicy::kSynchronous);

struct TimingLogRow {
  int round = 0;
  int agent_id = 0;
  double train_time = 0;
  double comm_time = 0;
  std::size_t data_size = 0;
  bool selected = false;
};

void write_timing_log(const std::filesystem::path& path, std::span<const TimingLogRow> rows);

}  // namespace dyhfl::sim

#endif  // DYHFL_SIM_ENV_HPP_

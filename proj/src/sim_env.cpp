#include "dyhfl/sim_env.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>

namespace dyhfl::sim {

std::vector<AgentProfile> make_profiles(int agent_count, double straggler_fraction,
                                        std::span<const std::size_t> shard_sizes, std::uint64_t rng_seed) {
  if (agent_count < 0) throw std::invalid_argument("agent_count must be non-negative");
  if (!(straggler_fraction >= 0 && straggler_fraction <= 1)) {
    throw std::invalid_argument("straggler_fraction must be in [0, 1]");
  }
  if (!shard_sizes.empty() && shard_sizes.size() != static_cast<std::size_t>(agent_count)) {
    throw std::invalid_argument("shard_sizes must have one entry per agent");
  }
  Rng rng = make_rng(rng_seed, {0x9f0f});
  // The epsilon absorbs representation error such as 0.7 * 10 = 7.000...1.
  const auto stragglers = static_cast<std::size_t>(std::floor(agent_count * straggler_fraction + 1e-9));
  std::vector<std::size_t> order(static_cast<std::size_t>(agent_count));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> is_straggler(order.size(), false);
  for (std::size_t i = 0; i < stragglers; ++i) is_straggler[order[i]] = true;

  std::uniform_real_distribution<double> fast_rate(1.0, 2.0);
  std::uniform_real_distribution<double> slow_rate(0.2, 0.5);
  std::vector<AgentProfile> profiles;
  profiles.reserve(order.size());
  for (int a = 0; a < agent_count; ++a) {
    AgentProfile p;
    p.agent_id = a;
    const bool slow = is_straggler[static_cast<std::size_t>(a)];
    p.speed_class = slow ? SpeedClass::kStraggler : SpeedClass::kFast;
    p.compute_rate = slow ? slow_rate(rng) : fast_rate(rng);
    p.uplink = p.downlink = slow ? kStragglerDelay : kFastDelay;
    p.data_size = shard_sizes.empty() ? 0 : shard_sizes[static_cast<std::size_t>(a)];
    profiles.push_back(p);
  }
  return profiles;
}

double sample_training_time(const AgentProfile& profile, Rng& rng) {
  std::uniform_real_distribution<double> jitter(0.9, 1.1);
  const double j = jitter(rng);
  return static_cast<double>(profile.data_size) / profile.compute_rate * j;
}

int sample_delay(const DelayRange& range, Rng& rng) {
  if (range.lo > range.hi) throw std::invalid_argument("delay range has lo > hi");
  return std::uniform_int_distribution<int>(range.lo, range.hi)(rng);
}

double sample_comm_time(const AgentProfile& profile, double server_wait, Rng& rng) {
  if (server_wait < 0) throw std::invalid_argument("server_wait must be non-negative");
  const int up = sample_delay(profile.uplink, rng);
  const int down = sample_delay(profile.downlink, rng);
  return up + server_wait + down;
}

AgentDraw draw_agent(const AgentProfile& profile, std::uint64_t round_seed, const TimingOptions& options) {
  // Keyed on the behavioural fields, not the id: identical profiles draw identical times.
  Rng rng = make_rng(round_seed, {std::bit_cast<std::uint64_t>(profile.compute_rate),
                                  static_cast<std::uint64_t>(profile.uplink.lo), static_cast<std::uint64_t>(profile.uplink.hi),
                                  static_cast<std::uint64_t>(profile.downlink.lo), static_cast<std::uint64_t>(profile.downlink.hi),
                                  static_cast<std::uint64_t>(profile.data_size)});
  AgentDraw d;
  d.train_time = sample_training_time(profile, rng) + options.surcharge();
  d.uplink = sample_delay(profile.uplink, rng);
  d.downlink = sample_delay(profile.downlink, rng);
  return d;
}

RoundTiming round_timing(std::span<const AgentProfile> profiles, std::uint64_t round_seed,
                         const TimingOptions& options, ServerPolicy) {
  if (profiles.empty()) throw std::invalid_argument("round_timing needs at least one agent");
  std::vector<AgentDraw> draws;
  draws.reserve(profiles.size());
  double last_arrival = 0;
  int max_down = 0;
  for (const auto& p : profiles) {
    draws.push_back(draw_agent(p, round_seed, options));
    last_arrival = std::max(last_arrival, draws.back().train_time + draws.back().uplink);
    max_down = std::max(max_down, draws.back().downlink);
  }
  RoundTiming out;
  out.samples.reserve(profiles.size());
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    const AgentDraw& d = draws[i];
    TimingSample s;
    s.agent_id = profiles[i].agent_id;
    s.train_time = d.train_time;
    s.server_wait = last_arrival - (d.train_time + d.uplink);
    s.comm_time = d.uplink + s.server_wait + d.downlink;
    s.link_time = d.uplink + d.downlink;
    s.data_size = profiles[i].data_size;
    out.samples.push_back(s);
  }
  out.duration = last_arrival + max_down;
  return out;
}

void write_timing_log(const std::filesystem::path& path, std::span<const TimingLogRow> rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write timing log: " + path.string());
  out.precision(17);
  out << "round,agent_id,train_time,comm_time,data_size,selected\n";
  for (const auto& r : rows) {
    out << r.round << ',' << r.agent_id << ',' << r.train_time << ',' << r.comm_time << ',' << r.data_size << ','
        << (r.selected ? "true" : "false") << '\n';
  }
}

}  // namespace dyhfl::sim

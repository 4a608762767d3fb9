#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "dyhfl/sim_env.hpp"

namespace sim = dyhfl::sim;

namespace {

sim::AgentProfile profile(int id, double rate, sim::DelayRange link, std::size_t size) {
  sim::AgentProfile p;
  p.agent_id = id;
  p.compute_rate = rate;
  p.uplink = p.downlink = link;
  p.data_size = size;
  return p;
}

sim::TimingOptions plain_timing() {
  sim::TimingOptions o;
  o.encrypted = false;
  return o;
}

}  // namespace

TEST(Profiles, StragglerCountAndRanges) {
  const std::vector<std::size_t> sizes(10, 100);
  const auto ps = sim::make_profiles(10, 0.5, sizes, 3);
  int stragglers = 0;
  for (const auto& p : ps) {
    if (p.speed_class == sim::SpeedClass::kStraggler) {
      ++stragglers;
      EXPECT_GE(p.compute_rate, 0.2);
      EXPECT_LE(p.compute_rate, 0.5);
      EXPECT_EQ(p.uplink.lo, 6);
      EXPECT_EQ(p.uplink.hi, 10);
    } else {
      EXPECT_GE(p.compute_rate, 1.0);
      EXPECT_LE(p.compute_rate, 2.0);
      EXPECT_EQ(p.downlink.lo, 1);
      EXPECT_EQ(p.downlink.hi, 5);
    }
    EXPECT_EQ(p.data_size, 100u);
  }
  EXPECT_EQ(stragglers, 5);
  EXPECT_EQ(sim::make_profiles(10, 0.7, sizes, 3).size(), 10u);
  int seven = 0;
  for (const auto& p : sim::make_profiles(10, 0.7, sizes, 3)) seven += p.speed_class == sim::SpeedClass::kStraggler;
  EXPECT_EQ(seven, 7);
  EXPECT_THROW(sim::make_profiles(10, 1.5, sizes, 3), std::invalid_argument);
}

TEST(Profiles, AllFastDelaysInRange) {
  const auto ps = sim::make_profiles(10, 0.0, {}, 4);
  dyhfl::Rng rng(1);
  for (const auto& p : ps) {
    EXPECT_EQ(p.speed_class, sim::SpeedClass::kFast);
    for (int i = 0; i < 50; ++i) {
      const int d = sim::sample_delay(p.uplink, rng);
      EXPECT_GE(d, 1);
      EXPECT_LE(d, 5);
    }
  }
}

TEST(Profiles, SeedDeterminism) {
  const auto a = sim::make_profiles(20, 0.3, {}, 9);
  const auto b = sim::make_profiles(20, 0.3, {}, 9);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].compute_rate, b[i].compute_rate);
    EXPECT_EQ(a[i].speed_class, b[i].speed_class);
  }
}

TEST(TrainingTime, ClosedFormWithinJitter) {
  dyhfl::Rng rng(2);
  const auto p = profile(0, 2.0, sim::kFastDelay, 100);
  for (int i = 0; i < 100; ++i) {
    const double t = sim::sample_training_time(p, rng);
    EXPECT_GE(t, 45.0);
    EXPECT_LE(t, 55.0);
  }
  EXPECT_EQ(sim::sample_training_time(profile(0, 2.0, sim::kFastDelay, 0), rng), 0.0);
}

TEST(TrainingTime, RateRatio) {
  dyhfl::Rng rng(3);
  const auto slow = profile(0, 1.0, sim::kFastDelay, 100);
  const auto fast = profile(1, 2.0, sim::kFastDelay, 100);
  double s = 0, f = 0;
  for (int i = 0; i < 100; ++i) {
    s += sim::sample_training_time(slow, rng);
    f += sim::sample_training_time(fast, rng);
  }
  EXPECT_GE(s / f, 1.8);
  EXPECT_LE(s / f, 2.2);
}

TEST(CommTime, SupportRanges) {
  dyhfl::Rng rng(4);
  const auto fast = profile(0, 1.0, sim::kFastDelay, 10);
  const auto slow = profile(1, 1.0, sim::kStragglerDelay, 10);
  int lo = 100, hi = 0;
  for (int i = 0; i < 500; ++i) {
    const double f = sim::sample_comm_time(fast, 0, rng);
    const double s = sim::sample_comm_time(slow, 0, rng);
    const double w = sim::sample_comm_time(fast, 3, rng);
    EXPECT_GE(f, 2);
    EXPECT_LE(f, 10);
    EXPECT_GE(s, 12);
    EXPECT_LE(s, 20);
    EXPECT_GE(w, 5);
    EXPECT_LE(w, 13);
    lo = std::min(lo, static_cast<int>(f));
    hi = std::max(hi, static_cast<int>(f));
  }
  EXPECT_EQ(lo, 2);
  EXPECT_EQ(hi, 10);
}

TEST(RoundTiming, SingleAgent) {
  const std::vector<sim::AgentProfile> ps{profile(0, 1.0, sim::kFastDelay, 10)};
  const auto rt = sim::round_timing(ps, 5, plain_timing());
  ASSERT_EQ(rt.samples.size(), 1u);
  EXPECT_EQ(rt.samples[0].server_wait, 0.0);
  EXPECT_EQ(rt.samples[0].comm_time, rt.samples[0].link_time);
  EXPECT_THROW(sim::round_timing(std::span<const sim::AgentProfile>{}, 5, plain_timing()), std::invalid_argument);
}

TEST(RoundTiming, WaitAndDurationFormula) {
  const auto ps = sim::make_profiles(8, 0.5, std::vector<std::size_t>(8, 50), 6);
  const auto opts = plain_timing();
  const auto rt = sim::round_timing(ps, 77, opts);
  double max_arrival = 0;
  int max_down = 0;
  for (const auto& p : ps) {
    const auto d = sim::draw_agent(p, 77, opts);
    max_arrival = std::max(max_arrival, d.train_time + d.uplink);
    max_down = std::max(max_down, d.downlink);
  }
  EXPECT_DOUBLE_EQ(rt.duration, max_arrival + max_down);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const auto d = sim::draw_agent(ps[i], 77, opts);
    const auto& s = rt.samples[i];
    EXPECT_EQ(s.agent_id, ps[i].agent_id);
    EXPECT_DOUBLE_EQ(s.server_wait, max_arrival - (d.train_time + d.uplink));
    EXPECT_DOUBLE_EQ(s.comm_time, d.uplink + s.server_wait + d.downlink);
    EXPECT_DOUBLE_EQ(s.link_time, d.uplink + d.downlink);
  }
}

TEST(RoundTiming, DurationIsPermutationInvariant) {
  auto ps = sim::make_profiles(12, 0.4, std::vector<std::size_t>(12, 80), 8);
  const double base = sim::round_timing(ps, 3, sim::TimingOptions{}).duration;
  dyhfl::Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    std::shuffle(ps.begin(), ps.end(), rng);
    EXPECT_EQ(sim::round_timing(ps, 3, sim::TimingOptions{}).duration, base);
  }
}

TEST(RoundTiming, StragglersLengthenRounds) {
  double with = 0, without = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto ps = sim::make_profiles(10, 0.3, std::vector<std::size_t>(10, 100), seed);
    std::vector<sim::AgentProfile> fast;
    for (const auto& p : ps) {
      if (p.speed_class == sim::SpeedClass::kFast) fast.push_back(p);
    }
    with += sim::round_timing(ps, seed, sim::TimingOptions{}).duration;
    without += sim::round_timing(fast, seed, sim::TimingOptions{}).duration;
  }
  EXPECT_GE(with, without);
}

TEST(RoundTiming, EncryptionSurchargeIsAdditive) {
  const auto ps = sim::make_profiles(4, 0.5, std::vector<std::size_t>(4, 40), 2);
  sim::TimingOptions enc;
  enc.param_count = 1000;
  const auto a = sim::round_timing(ps, 1, enc);
  const auto b = sim::round_timing(ps, 1, plain_timing());
  for (std::size_t i = 0; i < ps.size(); ++i) {
    EXPECT_NEAR(a.samples[i].train_time - b.samples[i].train_time, 1.0, 1e-9);
    EXPECT_EQ(a.samples[i].link_time, b.samples[i].link_time);
  }
}

TEST(Clock, NeverMovesBackwards) {
  sim::VirtualClock c;
  c.advance_to(5);
  c.advance_by(2.5);
  EXPECT_EQ(c.now(), 7.5);
  EXPECT_THROW(c.advance_to(7), std::logic_error);
}

TEST(TimingLog, CsvColumns) {
  const auto p = std::filesystem::temp_directory_path() / "dyhfl_timing_log.csv";
  const std::vector<sim::TimingLogRow> rows{{1, 0, 2.5, 4, 100, true}, {1, 1, 3, 6, 50, false}};
  sim::write_timing_log(p, rows);
  std::ifstream in(p);
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  EXPECT_EQ(header, "round,agent_id,train_time,comm_time,data_size,selected");
  EXPECT_EQ(first.substr(0, 4), "1,0,");
  EXPECT_NE(first.find(",true"), std::string::npos);
}

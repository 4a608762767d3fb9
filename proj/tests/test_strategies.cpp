#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "dyhfl/experiment.hpp"
#include "dyhfl/metrics.hpp"
#include "dyhfl/strategies.hpp"

namespace fl = dyhfl::fl;
namespace sim = dyhfl::sim;
namespace exp_ = dyhfl::exp;

namespace {

exp_::ExperimentConfig small_config() {
  exp_::ExperimentConfig cfg;
  cfg.dataset.synth_classes = 4;
  cfg.dataset.synth_features = 6;
  cfg.dataset.synth_samples_per_class = 60;
  cfg.hidden_layers = {6};
  cfg.train.local_epochs = 2;
  cfg.train.batch_size = 16;
  cfg.strategy.key_bits = 512;
  cfg.strategy.encryption = fl::Encryption::kPlain;
  return cfg;
}

fl::Federation learning_federation(int agents, double stragglers, std::uint64_t seed) {
  const auto cfg = small_config();
  const auto prepared = exp_::prepare_data(cfg, seed);
  return exp_::build_federation(cfg, prepared, agents, stragglers, seed);
}

fl::Federation timing_federation(int agents, double stragglers, std::uint64_t seed, std::size_t shard = 100) {
  fl::Federation fed;
  fed.profiles = sim::make_profiles(agents, stragglers, std::vector<std::size_t>(static_cast<std::size_t>(agents), shard), seed);
  fed.seed = seed;
  return fed;
}

fl::StrategyConfig plain_config(int rounds = 10) {
  fl::StrategyConfig c;
  c.total_rounds = rounds;
  c.window_divisor = std::min(rounds, 10);
  c.encryption = fl::Encryption::kPlain;
  c.key_bits = 512;
  return c;
}

std::uint64_t total_uploads(const fl::RunResult& r) {
  std::uint64_t up = 0;
  for (const auto& rec : r.records) up += rec.bytes_up;
  return up / r.model_bytes;
}

std::uint64_t total_messages(const fl::RunResult& r) {
  std::uint64_t n = 0;
  for (const auto& rec : r.records) n += rec.bytes_up + rec.bytes_down;
  return n / r.model_bytes;
}

std::vector<std::vector<int>> participant_sets(const fl::RunResult& r) {
  std::vector<std::vector<int>> out;
  for (const auto& rec : r.records) out.push_back(rec.participants);
  return out;
}

}  // namespace

TEST(StrategyConfig, Validation) {
  auto c = plain_config();
  EXPECT_NO_THROW(c.validate(10));
  c.alpha = 0.6;
  try {
    c.validate(10);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("alpha/beta"), std::string::npos);
  }
  c = plain_config();
  c.window_divisor = 1;  // T/c = T
  EXPECT_THROW(c.validate(10), std::invalid_argument);
  c = plain_config();
  c.buffer_size = 11;
  EXPECT_THROW(c.validate(10), std::invalid_argument);
  c = plain_config();
  c.key_bits = 768;
  EXPECT_THROW(c.validate(10), std::invalid_argument);
  EXPECT_EQ(plain_config().resolved_buffer_size(20), 15);
  EXPECT_THROW(fl::parse_strategy("fedprox"), std::invalid_argument);
  for (auto k : fl::all_strategies()) EXPECT_EQ(fl::parse_strategy(fl::to_string(k)), k);
}

TEST(Sync, AllAgentsEveryRoundAndMessageCount) {
  const auto fed = learning_federation(6, 0.5, 1);
  const auto r = fl::run_sync(fed, plain_config());
  ASSERT_EQ(r.records.size(), 10u);
  for (const auto& rec : r.records) {
    EXPECT_EQ(rec.participants, (std::vector<int>{0, 1, 2, 3, 4, 5}));
    double longest = 0;
    for (const auto& s : rec.timings) longest = std::max(longest, s.train_time + s.comm_time);
    EXPECT_DOUBLE_EQ(rec.virtual_duration, longest);  // max arrival + max downlink
    ASSERT_TRUE(rec.global_eval.has_value());
  }
  EXPECT_EQ(total_messages(r), 2u * 10 * 6);
  EXPECT_EQ(r.final_params.size(), fed.model_bytes() / 4);
}

TEST(Sync, VirtualClockIsMonotone) {
  const auto r = fl::run_sync(timing_federation(8, 0.5, 2), plain_config());
  double t = 0;
  for (const auto& rec : r.records) {
    EXPECT_GT(rec.virtual_time, t);
    t = rec.virtual_time;
  }
}

TEST(DyHfl, PhaseStructure) {
  auto c = plain_config(100);
  c.window_divisor = 5;
  const auto r = fl::run_dyhfl(timing_federation(10, 0.5, 3), c);
  ASSERT_EQ(r.records.size(), 100u);
  EXPECT_EQ(r.st_history.size(), 20u);
  for (int i = 0; i < 20; ++i) {
    EXPECT_EQ(r.records[static_cast<std::size_t>(i)].participants.size(), 10u);
    EXPECT_TRUE(r.records[static_cast<std::size_t>(i)].st_thrsh.has_value());
  }
  for (int i = 20; i < 100; ++i) EXPECT_EQ(r.records[static_cast<std::size_t>(i)].participants, r.selected_set);
  EXPECT_FALSE(r.selected_set.empty());
  ASSERT_TRUE(r.lt_thrsh.has_value());
  EXPECT_DOUBLE_EQ(*r.lt_thrsh, fl::lt_threshold<double>(r.st_history));
}

TEST(DyHfl, SingleWindowSelectsFromFirstRound) {
  const auto fed = timing_federation(10, 0.5, 4);
  const auto c = plain_config(10);
  const auto r = fl::run_dyhfl(fed, c);
  ASSERT_EQ(r.st_history.size(), 1u);
  std::vector<fl::RawMetrics> raw;
  for (const auto& s : r.records[0].timings) raw.push_back({s.agent_id, s.train_time, s.link_time, double(s.data_size)});
  const auto entries = fl::normalize_metrics(raw, 0.7, 0.3);
  const double st = fl::wam<double>(fl::global_mts(entries));
  EXPECT_DOUBLE_EQ(r.st_history[0], st);
  EXPECT_EQ(r.selected_set, fl::select_agents(entries, fl::lt_threshold<double>({st})));
}

TEST(DyHfl, PhaseOneMatchesSync) {
  const auto fed = timing_federation(12, 0.4, 5);
  auto c = plain_config(20);
  const auto d = fl::run_dyhfl(fed, c);
  const auto s = fl::run_sync(fed, c);
  for (int i = 0; i < c.sliding_window(); ++i) {
    EXPECT_EQ(d.records[static_cast<std::size_t>(i)].virtual_duration, s.records[static_cast<std::size_t>(i)].virtual_duration);
  }
}

TEST(DyHfl, HomogeneousAgentsAllSelected) {
  fl::Federation fed;
  for (int a = 0; a < 8; ++a) {
    sim::AgentProfile p;
    p.agent_id = a;
    p.compute_rate = 1.5;
    p.uplink = p.downlink = {2, 4};
    p.data_size = 100;
    fed.profiles.push_back(p);
  }
  for (bool rolling : {false, true}) {
    auto c = plain_config(20);
    c.rolling_selection = rolling;
    const auto d = fl::run_dyhfl(fed, c);
    const auto s = fl::run_sync(fed, c);
    EXPECT_EQ(d.selected_set.size(), 8u);
    EXPECT_EQ(participant_sets(d), participant_sets(s));
  }
}

TEST(DyHfl, RollingModeSlidesTheWindow) {
  auto c = plain_config(20);
  c.rolling_selection = true;
  const auto r = fl::run_dyhfl(timing_federation(10, 0.5, 6), c);
  EXPECT_EQ(r.st_history.size(), 20u);
  EXPECT_EQ(r.selection_history.size(), 1u + 18u);
  for (std::size_t i = 2; i < r.records.size(); ++i) {
    EXPECT_FALSE(r.records[i].participants.empty());
    EXPECT_EQ(r.records[i].participants, r.selection_history[i - 2]);
  }
}

TEST(DyHfl, SelectionNeverEmptyAcrossSeeds) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto r = fl::run_dyhfl(timing_federation(10, 0.1 * static_cast<double>(seed % 10), seed), plain_config());
    EXPECT_FALSE(r.selected_set.empty());
    for (const auto& rec : r.records) EXPECT_FALSE(rec.participants.empty());
  }
}

TEST(Async, MessageCountAndDeterminism) {
  const auto fed = learning_federation(5, 0.4, 7);
  auto c = plain_config(6);
  c.async_frequency = 2;
  const auto a = fl::run_async(fed, c);
  const auto b = fl::run_async(fed, c);
  EXPECT_EQ(total_messages(a), 2u * 6 * 5 * 2);
  EXPECT_EQ(participant_sets(a), participant_sets(b));
  EXPECT_EQ(a.final_params, b.final_params);
  std::uint64_t arrivals = 0;
  for (const auto& rec : a.records) arrivals += rec.timings.size();
  EXPECT_EQ(arrivals, 60u);
}

TEST(FedBuff, FullBufferBehavesLikeSync) {
  const auto fed = timing_federation(8, 0.5, 9);
  auto c = plain_config(10);
  c.buffer_size = 8;
  const auto r = fl::run_fedbuff(fed, c);
  for (const auto& rec : r.records) EXPECT_EQ(rec.participants.size(), 8u);
}

TEST(FedBuff, BufferOfFifteenFavoursFastAgents) {
  const auto fed = timing_federation(20, 0.25, 10);
  auto c = plain_config(50);
  const auto r = fl::run_fedbuff(fed, c);
  std::map<int, int> count;
  for (const auto& rec : r.records) {
    EXPECT_EQ(rec.participants.size(), 15u);
    for (int id : rec.participants) ++count[id];
  }
  int min_fast = 1 << 30, max_slow = 0;
  for (const auto& p : fed.profiles) {
    if (p.speed_class == sim::SpeedClass::kFast) {
      min_fast = std::min(min_fast, count[p.agent_id]);
    } else {
      max_slow = std::max(max_slow, count[p.agent_id]);
    }
  }
  EXPECT_GE(min_fast, max_slow);
  EXPECT_EQ(total_uploads(r), 50u * 15);
}

TEST(FedBuff, FirstFlushTakesEarliestArrivals) {
  const auto fed = timing_federation(20, 0.25, 11);
  const auto r = fl::run_fedbuff(fed, plain_config(3));
  // Every contributor arrived no later than the flush time.
  for (const auto& s : r.records[0].timings) EXPECT_GE(s.server_wait, 0.0);
  EXPECT_EQ(r.records[0].participants.size(), 15u);
}

TEST(Bfl, StaticSelectionAndMessageCount) {
  const auto fed = timing_federation(12, 0.5, 12);
  const auto r = fl::run_bfl(fed, plain_config(10));
  ASSERT_EQ(r.selection_history.size(), 1u);
  EXPECT_EQ(r.records[0].participants.size(), 12u);
  for (std::size_t i = 1; i < r.records.size(); ++i) EXPECT_EQ(r.records[i].participants, r.selected_set);
  const auto sel = r.selected_set.size();
  EXPECT_EQ(total_messages(r), 2 * (12 + 9 * sel));
}

TEST(Bfl, ThresholdIsWamOfFirstRoundTimes) {
  const auto fed = timing_federation(10, 0.5, 13);
  const auto r = fl::run_bfl(fed, plain_config(5));
  std::vector<double> t;
  for (const auto& s : r.records[0].timings) t.push_back(s.train_time);
  const double thr = fl::wam<double>(t);
  EXPECT_DOUBLE_EQ(*r.lt_thrsh, thr);
  for (const auto& s : r.records[0].timings) {
    const bool in = std::count(r.selected_set.begin(), r.selected_set.end(), s.agent_id) > 0;
    EXPECT_EQ(in, s.train_time <= thr);
  }
}

TEST(AsrFed, CircumventThresholdFormula) {
  const std::vector<double> delays{6, 8, 10};
  EXPECT_EQ(fl::circumvent_threshold(delays, 2), 12);
  EXPECT_EQ(fl::circumvent_threshold(std::vector<double>{}, 3), 0);
}

TEST(AsrFed, UniformAgentsBehaveAsSync) {
  fl::Federation fed;
  for (int a = 0; a < 6; ++a) {
    sim::AgentProfile p;
    p.agent_id = a;
    p.compute_rate = 1.0;
    p.uplink = p.downlink = {1, 5};
    p.data_size = 0;  // equal (zero) training time for everyone
    fed.profiles.push_back(p);
  }
  const auto r = fl::run_asr_fed(fed, plain_config(5));
  for (const auto& rec : r.records) EXPECT_EQ(rec.participants.size(), 6u);
  EXPECT_FALSE(r.flagged);
}

TEST(AsrFed, CircumventAgentsWaitForThreshold) {
  const auto fed = learning_federation(8, 0.5, 14);
  const auto r = fl::run_asr_fed(fed, plain_config(10));
  ASSERT_TRUE(r.circumvent_threshold.has_value());
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    const int round = r.records[i].round_index;
    if (round < *r.circumvent_threshold) EXPECT_EQ(r.records[i].participants, r.selection_history[i]);
  }
}

TEST(AsrFed, LargePopulationIsFlagged) {
  const auto fed = timing_federation(100, 0.5, 15);
  const auto r = fl::run_asr_fed(fed, plain_config(10));
  ASSERT_TRUE(r.circumvent_threshold.has_value());
  EXPECT_GT(*r.circumvent_threshold, 10);
  EXPECT_TRUE(r.flagged);
  for (const auto& rec : r.records) EXPECT_LT(rec.participants.size(), 100u);
}

TEST(Strategies, RunsAreDeterministic) {
  const auto fed = learning_federation(6, 0.5, 16);
  for (auto k : fl::all_strategies()) {
    const auto a = fl::run_strategy(k, fed, plain_config(5));
    const auto b = fl::run_strategy(k, fed, plain_config(5));
    EXPECT_EQ(participant_sets(a), participant_sets(b)) << fl::to_string(k);
    EXPECT_EQ(a.final_params, b.final_params) << fl::to_string(k);
  }
}

TEST(Strategies, EncryptedMatchesPlain) {
  const auto fed = learning_federation(6, 0.5, 17);
  for (auto k : fl::all_strategies()) {
    auto plain = plain_config(5);
    auto enc = plain;
    enc.encryption = fl::Encryption::kPaillier;
    const auto p = fl::run_strategy(k, fed, plain);
    const auto e = fl::run_strategy(k, fed, enc);
    EXPECT_EQ(participant_sets(p), participant_sets(e)) << fl::to_string(k);
    ASSERT_EQ(p.final_params.size(), e.final_params.size());
    const double tol = 5 * 10 / (2 * 1e6);  // T * k / (2 * scale) with k = 10 for slack
    for (std::size_t i = 0; i < p.final_params.size(); ++i) {
      EXPECT_NEAR(p.final_params[i], e.final_params[i], tol) << fl::to_string(k) << " param " << i;
    }
  }
}

TEST(Strategies, RecordedBytesMatchClosedForm) {
  const auto fed = timing_federation(20, 0.4, 18);
  auto c = plain_config(10);
  const double m = static_cast<double>(fed.model_bytes()) / 1e6;
  auto check = [&](fl::StrategyKind k, dyhfl::eval::CommCostInput in) {
    const auto r = fl::run_strategy(k, fed, c);
    std::uint64_t up = 0;
    for (const auto& rec : r.records) up += rec.bytes_up;
    in.model_mb = m;
    in.rounds = 10;
    in.agents = 20;
    in.selected = static_cast<std::int64_t>(r.selected_set.size());
    in.sliding_window = c.sliding_window();
    in.buffer_size = c.resolved_buffer_size(20);
    EXPECT_EQ(static_cast<double>(up) / 1e6, dyhfl::eval::comm_cost(k, in)) << fl::to_string(k);
  };
  check(fl::StrategyKind::kSync, {});
  check(fl::StrategyKind::kFedBuff, {});
  check(fl::StrategyKind::kBfl, {});
  check(fl::StrategyKind::kDyHfl, {});
}

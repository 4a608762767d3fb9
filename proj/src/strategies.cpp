#include "dyhfl/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <queue>
#include <stdexcept>

#include "dyhfl/rng.hpp"

namespace dyhfl::fl {
namespace {

// Seed stream tags.
constexpr std::uint64_t kInitStream = 0x1a17;
constexpr std::uint64_t kTimingStream = 0x7101;
constexpr std::uint64_t kTrainStream = 0x7102;
constexpr std::uint64_t kSealStream = 0x7103;
constexpr std::uint64_t kChannelStream = 0x7104;
constexpr std::uint64_t kEventStream = 0x7105;

std::vector<int> all_ids(const Federation& fed) {
  std::vector<int> ids;
  for (const auto& p : fed.profiles) ids.push_back(p.agent_id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

/// State shared by every strategy: global model, per-agent local models,
/// channel, clock and the record log.
class Engine {
 public:
  Engine(const Federation& fed, const StrategyConfig& cfg, StrategyKind kind)
      : fed_(fed), cfg_(cfg), channel_(SecureChannel::plain()) {
    if (fed.profiles.empty()) throw std::invalid_argument("federation has no agents");
    cfg.validate(fed.agent_count());
    for (std::size_t i = 0; i < fed.profiles.size(); ++i) {
      if (fed.profiles[i].agent_id != static_cast<int>(i)) {
        throw std::invalid_argument("agent ids must be 0..N-1 in profile order");
      }
    }
    result_.strategy = to_string(kind);
    result_.model_bytes = fed.model_bytes();
    timing_.param_count = nn::parameter_count(std::span<const Eigen::Index>(fed.layer_dims));
    timing_.encrypted = cfg.encryption == Encryption::kPaillier;
    timing_.encryption_cost_per_param = cfg.encryption_cost_per_param;

    if (learning()) {
      if (fed.task->shards.size() != fed.profiles.size()) {
        throw std::invalid_argument("learning task needs one shard per agent");
      }
      if (cfg.encryption == Encryption::kPaillier) {
        channel_ = SecureChannel::paillier(cfg.key_bits, derive_seed(fed.seed, {kChannelStream}), cfg.codec_scale);
      }
      auto model = nn::init_model<double>(std::span<const Eigen::Index>(fed.layer_dims), derive_seed(fed.seed, {kInitStream}));
      const auto flat = nn::get_flat_params(model);
      global_.assign(flat.data(), flat.data() + flat.size());
      agents_.assign(fed.profiles.size(), model);
      scratch_ = model;
    }
  }

  bool learning() const { return fed_.task.has_value(); }
  const Federation& fed() const { return fed_; }
  const StrategyConfig& cfg() const { return cfg_; }
  const sim::TimingOptions& timing_options() const { return timing_; }
  const SecureChannel& channel() const { return channel_; }
  sim::VirtualClock& clock() { return clock_; }
  std::vector<double>& global() { return global_; }
  RunResult& result() { return result_; }

  std::uint64_t round_seed(int round) const { return derive_seed(fed_.seed, {kTimingStream, static_cast<std::uint64_t>(round)}); }

  sim::RoundTiming timing_for(int round, std::span<const int> ids) const {
    std::vector<sim::AgentProfile> subset;
    for (int id : ids) subset.push_back(fed_.profiles[static_cast<std::size_t>(id)]);
    return sim::round_timing(subset, round_seed(round), timing_);
  }

  // Local training of `agent` starting from `start`; job identifies the
  // training job (round index for synchronous strategies).
  std::vector<double> train_local(int agent, std::span<const double> start, std::uint64_t job) {
    auto& model = agents_[static_cast<std::size_t>(agent)];
    nn::set_flat_params(model, start);
    nn::TrainConfig tc = fed_.task->train;
    tc.rng_seed = derive_seed(fed_.seed, {kTrainStream, job, static_cast<std::uint64_t>(agent)});
    nn::train_epochs(model, fed_.task->shards[static_cast<std::size_t>(agent)], tc);
    const auto flat = nn::get_flat_params(model);
    return {flat.data(), flat.data() + flat.size()};
  }

  double local_accuracy(int agent) const {
    const auto& model = agents_[static_cast<std::size_t>(agent)];
    return nn::evaluate(model, fed_.task->shards[static_cast<std::size_t>(agent)]).accuracy;
  }

  std::optional<nn::EvalReport> evaluate_global() {
    if (!learning()) return std::nullopt;
    nn::set_flat_params(scratch_, std::span<const double>(global_));
    return nn::evaluate(scratch_, fed_.task->eval_set);
  }

  std::uint64_t seal_stream(int round) const { return derive_seed(fed_.seed, {kSealStream, static_cast<std::uint64_t>(round)}); }

  /// One synchronous round over `participants`: all train from the current
  /// global model, upload, the server sums, everyone receives the result.
  RoundRecord sync_round(int round, std::span<const int> participants) {
    const auto timing = timing_for(round, participants);
    if (learning()) {
      std::vector<std::vector<double>> locals;
      locals.reserve(participants.size());
      for (int id : participants) locals.push_back(train_local(id, global_, static_cast<std::uint64_t>(round)));
      global_ = channel_.average(locals, seal_stream(round));
    }
    clock_.advance_by(timing.duration);
    RoundRecord rec;
    rec.round_index = round;
    rec.strategy = result_.strategy;
    rec.participants.assign(participants.begin(), participants.end());
    rec.virtual_duration = timing.duration;
    rec.virtual_time = clock_.now();
    rec.bytes_up = participants.size() * result_.model_bytes;
    rec.bytes_down = participants.size() * result_.model_bytes;
    rec.global_eval = evaluate_global();
    rec.timings = timing.samples;
    return rec;
  }

  RunResult finish() {
    result_.final_params = global_;
    return std::move(result_);
  }

 private:
  const Federation& fed_;
  const StrategyConfig& cfg_;
  SecureChannel channel_;
  sim::VirtualClock clock_;
  sim::TimingOptions timing_;
  std::vector<double> global_;
  std::vector<nn::MlpModel> agents_;
  nn::MlpModel scratch_;
  RunResult result_;
};

RawMetrics raw_from(const sim::TimingSample& s, CommMetric metric) {
  return RawMetrics{s.agent_id, s.train_time, metric == CommMetric::kLinkOnly ? s.link_time : s.comm_time,
                    static_cast<double>(s.data_size)};
}

// Arrival event for the event-driven strategies; ordered by time, then id.
struct Arrival {
  double time;
  int agent;
  std::uint64_t job;
  sim::AgentDraw draw;

  bool operator>(const Arrival& o) const { return time > o.time || (time == o.time && agent > o.agent); }
};

using ArrivalQueue = std::priority_queue<Arrival, std::vector<Arrival>, std::greater<Arrival>>;

Arrival schedule(const Engine& engine, int agent, double start, std::uint64_t job) {
  const auto& profile = engine.fed().profiles[static_cast<std::size_t>(agent)];
  const std::uint64_t seed = derive_seed(engine.fed().seed, {kEventStream, job});
  const sim::AgentDraw draw = sim::draw_agent(profile, seed, engine.timing_options());
  return Arrival{start + draw.train_time + draw.uplink, agent, job, draw};
}

}  // namespace

StrategyKind parse_strategy(const std::string& name) {
  if (name == "dyhfl") return StrategyKind::kDyHfl;
  if (name == "sync") return StrategyKind::kSync;
  if (name == "async") return StrategyKind::kAsync;
  if (name == "fedbuff") return StrategyKind::kFedBuff;
  if (name == "bfl") return StrategyKind::kBfl;
  if (name == "asr_fed") return StrategyKind::kAsrFed;
  throw std::invalid_argument("unknown strategy '" + name + "'");
}

std::string to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kDyHfl: return "dyhfl";
    case StrategyKind::kSync: return "sync";
    case StrategyKind::kAsync: return "async";
    case StrategyKind::kFedBuff: return "fedbuff";
    case StrategyKind::kBfl: return "bfl";
    case StrategyKind::kAsrFed: return "asr_fed";
  }
  return "unknown";
}

std::vector<StrategyKind> all_strategies() {
  return {StrategyKind::kDyHfl, StrategyKind::kSync,  StrategyKind::kAsync,
          StrategyKind::kFedBuff, StrategyKind::kBfl, StrategyKind::kAsrFed};
}

int StrategyConfig::resolved_buffer_size(int agent_count) const {
  if (buffer_size > 0) return buffer_size;
  return std::max(1, static_cast<int>(std::lround(0.75 * agent_count)));
}

void StrategyConfig::validate(int agent_count) const {
  if (total_rounds < 1) throw std::invalid_argument("total_rounds: must be >= 1");
  if (window_divisor < 1) throw std::invalid_argument("window_divisor: must be >= 1");
  const int sw = sliding_window();
  if (sw < 1 || sw >= total_rounds) {
    throw std::invalid_argument("window_divisor: sliding window T/c = " + std::to_string(sw) +
                                " must satisfy 1 <= T/c < T");
  }
  if (alpha < 0 || beta < 0 || std::fabs(alpha + beta - 1.0) > 1e-9) {
    throw std::invalid_argument("alpha/beta: must be non-negative and sum to 1");
  }
  if (buffer_size < 0 || resolved_buffer_size(agent_count) > agent_count) {
    throw std::invalid_argument("buffer_size: must be in [1, agent_count]");
  }
  if (!(async_mix_rate > 0 && async_mix_rate <= 1)) throw std::invalid_argument("async_mix_rate: must be in (0, 1]");
  if (async_frequency < 1) throw std::invalid_argument("async_frequency: must be >= 1");
  if (key_bits != 512 && key_bits != 1024 && key_bits != 2048) {
    throw std::invalid_argument("key_bits: must be 512, 1024 or 2048");
  }
  if (codec_scale < 1000) throw std::invalid_argument("codec_scale: must be >= 1000");
  if (encryption_cost_per_param < 0) throw std::invalid_argument("encryption_cost_per_param: must be >= 0");
}

std::size_t Federation::model_bytes() const {
  return nn::parameter_count(std::span<const Eigen::Index>(layer_dims)) * 4;
}

int circumvent_threshold(std::span<const double> circumvent_delays, std::size_t buffer_count) {
  if (buffer_count == 0) return 0;
  const double total = std::accumulate(circumvent_delays.begin(), circumvent_delays.end(), 0.0);
  return static_cast<int>(std::ceil(total / static_cast<double>(buffer_count)));
}

RunResult run_sync(const Federation& fed, const StrategyConfig& cfg) {
  Engine engine(fed, cfg, StrategyKind::kSync);
  const auto ids = all_ids(fed);
  for (int r = 1; r <= cfg.total_rounds; ++r) engine.result().records.push_back(engine.sync_round(r, ids));
  return engine.finish();
}

RunResult run_dyhfl(const Federation& fed, const StrategyConfig& cfg) {
  Engine engine(fed, cfg, StrategyKind::kDyHfl);
  RunResult& res = engine.result();
  const auto ids = all_ids(fed);
  const int sw = cfg.sliding_window();
  SlidingWindow window(static_cast<std::size_t>(sw));
  std::map<int, RawMetrics> latest;  // most recent report per agent

  auto refresh = [&](const RoundRecord& rec) {
    for (const auto& s : rec.timings) latest[s.agent_id] = raw_from(s, cfg.comm_metric);
    std::vector<RawMetrics> raw;
    for (const auto& [id, m] : latest) raw.push_back(m);
    return normalize_metrics(raw, cfg.alpha, cfg.beta);
  };

  // Preliminary rounds: everyone trains, thresholds accumulate.
  std::vector<GlobalMetricEntry> entries;
  for (int r = 1; r <= sw; ++r) {
    RoundRecord rec = engine.sync_round(r, ids);
    entries = refresh(rec);
    const double st = wam<double>(global_mts(entries));
    window.push(st);
    res.st_history.push_back(st);
    rec.st_thrsh = st;
    if (r == sw) rec.lt_thrsh = window.long_term_threshold();
    res.records.push_back(std::move(rec));
  }
  double lt = window.long_term_threshold();
  std::vector<int> selected = select_agents(entries, lt);
  res.lt_thrsh = lt;
  res.selected_set = selected;
  res.selection_history.push_back(selected);

  // Subsequent rounds: only the selected agents take part.
  for (int r = sw + 1; r <= cfg.total_rounds; ++r) {
    RoundRecord rec = engine.sync_round(r, selected);
    rec.lt_thrsh = lt;
    if (cfg.rolling_selection) {
      entries = refresh(rec);
      const double st = wam<double>(global_mts(entries));
      window.push(st);
      res.st_history.push_back(st);
      rec.st_thrsh = st;
      lt = window.long_term_threshold();
      selected = select_agents(entries, lt);
      res.selection_history.push_back(selected);
    }
    res.records.push_back(std::move(rec));
  }
  return engine.finish();
}

RunResult run_bfl(const Federation& fed, const StrategyConfig& cfg) {
  Engine engine(fed, cfg, StrategyKind::kBfl);
  RunResult& res = engine.result();
  RoundRecord first = engine.sync_round(1, all_ids(fed));

  // One-shot selection from the first round's training times.
  std::vector<double> times;
  for (const auto& s : first.timings) times.push_back(s.train_time);
  const double thrsh = wam<double>(times);
  std::vector<int> selected;
  for (const auto& s : first.timings) {
    if (s.train_time <= thrsh) selected.push_back(s.agent_id);
  }
  if (selected.empty()) {
    const auto best = std::min_element(first.timings.begin(), first.timings.end(),
                                       [](const auto& a, const auto& b) { return a.train_time < b.train_time; });
    selected.push_back(best->agent_id);
  }
  std::sort(selected.begin(), selected.end());
  first.st_thrsh = thrsh;
  first.lt_thrsh = thrsh;
  res.lt_thrsh = thrsh;
  res.selected_set = selected;
  res.selection_history.push_back(selected);
  res.records.push_back(std::move(first));

  for (int r = 2; r <= cfg.total_rounds; ++r) res.records.push_back(engine.sync_round(r, selected));
  return engine.finish();
}

RunResult run_asr_fed(const Federation& fed, const StrategyConfig& cfg) {
  Engine engine(fed, cfg, StrategyKind::kAsrFed);
  RunResult& res = engine.result();
  const auto ids = all_ids(fed);
  const std::size_t n = ids.size();
  std::optional<int> cir_t;

  for (int r = 1; r <= cfg.total_rounds; ++r) {
    // Every agent trains and reports accuracy and training time.
    const auto probe = engine.timing_for(r, ids);
    std::vector<std::vector<double>> locals(n);
    std::vector<double> acc(n, 1.0);
    if (engine.learning()) {
      for (int id : ids) {
        locals[static_cast<std::size_t>(id)] = engine.train_local(id, engine.global(), static_cast<std::uint64_t>(r));
        acc[static_cast<std::size_t>(id)] = engine.local_accuracy(id);
      }
    }
    double mean_acc = std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(n);
    double mean_time = 0;
    for (const auto& s : probe.samples) mean_time += s.train_time;
    mean_time /= static_cast<double>(n);

    std::vector<int> buffer, circumvent;
    std::vector<double> circumvent_delays;
    for (const auto& s : probe.samples) {
      const auto i = static_cast<std::size_t>(s.agent_id);
      if (acc[i] >= mean_acc && s.train_time <= mean_time) {
        buffer.push_back(s.agent_id);
      } else {
        circumvent.push_back(s.agent_id);
        circumvent_delays.push_back(s.link_time);
      }
    }
    if (buffer.empty()) {
      buffer = ids;
      circumvent.clear();
      circumvent_delays.clear();
    }
    if (!cir_t) {
      cir_t = circumvent_threshold(circumvent_delays, buffer.size());
      res.circumvent_threshold = cir_t;
      if (*cir_t > cfg.total_rounds) {
        res.flagged = true;
        res.flag_reason = "circumvent threshold " + std::to_string(*cir_t) + " exceeds total rounds " +
                          std::to_string(cfg.total_rounds) + "; circumvent agents never aggregate";
      }
    }

    std::vector<int> participants = buffer;
    if (r >= *cir_t) participants.insert(participants.end(), circumvent.begin(), circumvent.end());
    std::sort(participants.begin(), participants.end());

    const auto timing = engine.timing_for(r, participants);
    if (engine.learning()) {
      std::vector<std::vector<double>> chosen;
      for (int id : participants) chosen.push_back(std::move(locals[static_cast<std::size_t>(id)]));
      engine.global() = engine.channel().average(chosen, engine.seal_stream(r));
    }
    engine.clock().advance_by(timing.duration);
    RoundRecord rec;
    rec.round_index = r;
    rec.strategy = res.strategy;
    rec.participants = participants;
    rec.virtual_duration = timing.duration;
    rec.virtual_time = engine.clock().now();
    rec.bytes_up = participants.size() * res.model_bytes;
    rec.bytes_down = participants.size() * res.model_bytes;
    rec.global_eval = engine.evaluate_global();
    rec.timings = timing.samples;
    res.selection_history.push_back(buffer);
    res.records.push_back(std::move(rec));
  }
  return engine.finish();
}

RunResult run_fedbuff(const Federation& fed, const StrategyConfig& cfg) {
  Engine engine(fed, cfg, StrategyKind::kFedBuff);
  RunResult& res = engine.result();
  const auto n = fed.profiles.size();
  const auto b = static_cast<std::size_t>(cfg.resolved_buffer_size(fed.agent_count()));

  std::vector<std::vector<double>> base(n, engine.global());
  std::uint64_t next_job = 0;
  ArrivalQueue queue;
  for (std::size_t a = 0; a < n; ++a) queue.push(schedule(engine, static_cast<int>(a), 0.0, next_job++));

  struct Buffered {
    Arrival arrival;
    std::vector<double> delta;
  };
  std::vector<Buffered> buffer;
  double last_aggregation = 0;
  for (int round = 1; round <= cfg.total_rounds;) {
    Arrival arr = queue.top();
    queue.pop();
    engine.clock().advance_to(arr.time);
    std::vector<double> delta;
    if (engine.learning()) {
      auto& start = base[static_cast<std::size_t>(arr.agent)];
      delta = engine.train_local(arr.agent, start, arr.job);
      for (std::size_t i = 0; i < delta.size(); ++i) delta[i] -= start[i];
    }
    buffer.push_back({arr, std::move(delta)});
    if (buffer.size() < b) continue;

    // Buffer full: aggregate the mean update and answer the contributors.
    if (engine.learning()) {
      std::vector<std::vector<double>> deltas;
      for (auto& e : buffer) deltas.push_back(std::move(e.delta));
      const auto mean = engine.channel().average(deltas, engine.seal_stream(round));
      auto& g = engine.global();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += mean[i];
    }
    RoundRecord rec;
    rec.round_index = round;
    rec.strategy = res.strategy;
    const double now = engine.clock().now();
    for (const auto& e : buffer) {
      const int id = e.arrival.agent;
      rec.participants.push_back(id);
      sim::TimingSample s;
      s.agent_id = id;
      s.train_time = e.arrival.draw.train_time;
      s.server_wait = now - e.arrival.time;
      s.comm_time = e.arrival.draw.uplink + s.server_wait + e.arrival.draw.downlink;
      s.link_time = e.arrival.draw.uplink + e.arrival.draw.downlink;
      s.data_size = fed.profiles[static_cast<std::size_t>(id)].data_size;
      rec.timings.push_back(s);
      base[static_cast<std::size_t>(id)] = engine.global();
      queue.push(schedule(engine, id, now + e.arrival.draw.downlink, next_job++));
    }
    std::sort(rec.participants.begin(), rec.participants.end());
    rec.virtual_duration = now - last_aggregation;
    rec.virtual_time = now;
    rec.bytes_up = b * res.model_bytes;
    rec.bytes_down = b * res.model_bytes;
    rec.global_eval = engine.evaluate_global();
    res.records.push_back(std::move(rec));
    last_aggregation = now;
    buffer.clear();
    ++round;
  }
  return engine.finish();
}

RunResult run_async(const Federation& fed, const StrategyConfig& cfg) {
  Engine engine(fed, cfg, StrategyKind::kAsync);
  RunResult& res = engine.result();
  const auto n = fed.profiles.size();
  const std::size_t per_round = n * static_cast<std::size_t>(cfg.async_frequency);

  std::vector<std::vector<double>> base(n, engine.global());
  std::vector<std::uint64_t> base_version(n, 0);
  std::uint64_t version = 0;
  std::uint64_t next_job = 0;
  // The server only ever holds the sealed global model.
  SecureChannel::Sealed stored;
  if (engine.learning()) stored = engine.channel().seal(engine.global(), derive_seed(fed.seed, {kSealStream, 0, 0}));

  ArrivalQueue queue;
  for (std::size_t a = 0; a < n; ++a) queue.push(schedule(engine, static_cast<int>(a), 0.0, next_job++));

  double last_boundary = 0;
  std::vector<int> window_agents;
  std::vector<sim::TimingSample> window_timings;
  for (int round = 1; round <= cfg.total_rounds; ++round) {
    for (std::size_t k = 0; k < per_round; ++k) {
      Arrival arr = queue.top();
      queue.pop();
      engine.clock().advance_to(arr.time);
      const auto i = static_cast<std::size_t>(arr.agent);
      if (engine.learning()) {
        const auto local = engine.train_local(arr.agent, base[i], arr.job);
        const double staleness = static_cast<double>(version - base_version[i]);
        const double eta = cfg.async_mix_rate / (1.0 + staleness);
        // The agent downloads and opens the current global model, mixes its
        // update in, and uploads the sealed result as the new global.
        auto mixed = engine.channel().open(stored);
        for (std::size_t p = 0; p < mixed.size(); ++p) mixed[p] = (1.0 - eta) * mixed[p] + eta * local[p];
        stored = engine.channel().seal(mixed, derive_seed(fed.seed, {kSealStream, static_cast<std::uint64_t>(round), arr.job}));
        engine.global() = mixed;
        base[i] = std::move(mixed);
      }
      ++version;
      base_version[i] = version;
      window_agents.push_back(arr.agent);
      sim::TimingSample s;
      s.agent_id = arr.agent;
      s.train_time = arr.draw.train_time;
      s.comm_time = s.link_time = arr.draw.uplink + arr.draw.downlink;
      s.data_size = fed.profiles[i].data_size;
      window_timings.push_back(s);
      queue.push(schedule(engine, arr.agent, arr.time + arr.draw.downlink, next_job++));
    }
    RoundRecord rec;
    rec.round_index = round;
    rec.strategy = res.strategy;
    std::sort(window_agents.begin(), window_agents.end());
    window_agents.erase(std::unique(window_agents.begin(), window_agents.end()), window_agents.end());
    rec.participants = std::move(window_agents);
    rec.virtual_time = engine.clock().now();
    rec.virtual_duration = rec.virtual_time - last_boundary;
    rec.bytes_up = per_round * res.model_bytes;
    rec.bytes_down = per_round * res.model_bytes;
    rec.global_eval = engine.evaluate_global();
    rec.timings = std::move(window_timings);
    res.records.push_back(std::move(rec));
    last_boundary = engine.clock().now();
    window_agents.clear();
    window_timings.clear();
  }
  return engine.finish();
}

RunResult run_strategy(StrategyKind kind, const Federation& fed, const StrategyConfig& cfg) {
  switch (kind) {
    case StrategyKind::kDyHfl: return run_dyhfl(fed, cfg);
    case StrategyKind::kSync: return run_sync(fed, cfg);
    case StrategyKind::kAsync: return run_async(fed, cfg);
    case StrategyKind::kFedBuff: return run_fedbuff(fed, cfg);
    case StrategyKind::kBfl: return run_bfl(fed, cfg);
    case StrategyKind::kAsrFed: return run_asr_fed(fed, cfg);
  }
  throw std::invalid_argument("unknown strategy");
}

}  // namespace dyhfl::fl

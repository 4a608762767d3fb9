#include "dyhfl/experiment.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "dyhfl/rng.hpp"
#include "json.hpp"

namespace dyhfl::exp {
namespace {

using nlohmann::json;

constexpr std::uint64_t kDataStream = 0xda7a;
constexpr std::uint64_t kPartitionStream = 0x9a27;
constexpr std::uint64_t kProfileStream = 0x9f01;

// Rejects keys outside `allowed` so typos fail loudly.
void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + (where.empty() ? "" : ".") + key + ": unknown key");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + (where.empty() ? "" : ".") + key + ": wrong type");
  }
}

std::string join_ids(const std::vector<int>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) s += ';';
    s += std::to_string(ids[i]);
  }
  return s;
}

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

std::filesystem::path ensure_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void ExperimentConfig::validate() const {
  if (strategies.empty()) throw std::invalid_argument("strategies: at least one strategy is required");
  for (const auto& s : strategies) {
    try {
      fl::parse_strategy(s);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(std::string("strategies: ") + e.what());
    }
  }
  if (agents.empty()) throw std::invalid_argument("agents: at least one agent count is required");
  for (int n : agents) {
    if (n < 1) throw std::invalid_argument("agents: counts must be positive");
    strategy.validate(n);
  }
  if (straggler_fractions.empty()) throw std::invalid_argument("straggler_fractions: at least one value is required");
  for (double f : straggler_fractions) {
    if (!(f >= 0 && f <= 1)) throw std::invalid_argument("straggler_fractions: values must be in [0, 1]");
  }
  if (repetitions < 1) throw std::invalid_argument("repetitions: must be >= 1");
  if (!(target_accuracy >= 0 && target_accuracy <= 1)) throw std::invalid_argument("target_accuracy: must be in [0, 1]");
  for (auto h : hidden_layers) {
    if (h < 1) throw std::invalid_argument("hidden_layers: widths must be positive");
  }
  try {
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("train: ") + e.what());
  }
  if (dataset.kind == "csv") {
    if (dataset.csv_path.empty()) throw std::invalid_argument("dataset.csv_path: required for csv datasets");
  } else if (dataset.kind == "synth") {
    if (dataset.synth_classes < 2 || dataset.synth_features < 1 || dataset.synth_samples_per_class < 1 ||
        !(dataset.synth_spread > 0)) {
      throw std::invalid_argument("dataset.synth: classes >= 2, features >= 1, samples >= 1, spread > 0");
    }
  } else {
    throw std::invalid_argument("dataset.kind: must be 'synth' or 'csv'");
  }
  if (partition == data::PartitionScheme::kDirichlet && !(dirichlet_alpha > 0)) {
    throw std::invalid_argument("partition.dirichlet_alpha: must be positive");
  }
  if (fairness.rounds < 2) throw std::invalid_argument("fairness.rounds: must be >= 2");
  if (commcost.frequency < 1) throw std::invalid_argument("commcost.frequency: must be >= 1");
  if (!(commcost.selected_fraction >= 0 && commcost.selected_fraction <= 1)) {
    throw std::invalid_argument("commcost.selected_fraction: must be in [0, 1]");
  }
}

ExperimentConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(root, "", {"strategies", "dataset", "partition", "agents", "straggler_fractions", "hidden_layers",
                        "strategy", "train", "target_accuracy", "out_dir", "seed", "repetitions", "export",
                        "fairness", "commcost", "repetition_seeds"});
  ExperimentConfig cfg;
  read(root, "strategies", cfg.strategies, "");
  read(root, "agents", cfg.agents, "");
  read(root, "straggler_fractions", cfg.straggler_fractions, "");
  read(root, "hidden_layers", cfg.hidden_layers, "");
  read(root, "target_accuracy", cfg.target_accuracy, "");
  read(root, "out_dir", cfg.out_dir, "");
  read(root, "seed", cfg.seed, "");
  read(root, "repetitions", cfg.repetitions, "");

  if (root.contains("dataset")) {
    const auto& d = root["dataset"];
    check_keys(d, "dataset", {"kind", "csv_path", "label_column", "drop_constant_columns", "synth"});
    read(d, "kind", cfg.dataset.kind, "dataset");
    read(d, "csv_path", cfg.dataset.csv_path, "dataset");
    read(d, "label_column", cfg.dataset.label_column, "dataset");
    read(d, "drop_constant_columns", cfg.dataset.drop_constant_columns, "dataset");
    if (d.contains("synth")) {
      const auto& s = d["synth"];
      check_keys(s, "dataset.synth", {"classes", "features", "samples_per_class", "spread"});
      read(s, "classes", cfg.dataset.synth_classes, "dataset.synth");
      read(s, "features", cfg.dataset.synth_features, "dataset.synth");
      read(s, "samples_per_class", cfg.dataset.synth_samples_per_class, "dataset.synth");
      read(s, "spread", cfg.dataset.synth_spread, "dataset.synth");
    }
  }
  if (root.contains("partition")) {
    const auto& p = root["partition"];
    check_keys(p, "partition", {"scheme", "dirichlet_alpha"});
    std::string scheme = data::to_string(cfg.partition);
    read(p, "scheme", scheme, "partition");
    try {
      cfg.partition = data::parse_partition_scheme(scheme);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("partition.scheme: ") + e.what());
    }
    read(p, "dirichlet_alpha", cfg.dirichlet_alpha, "partition");
  }
  if (root.contains("strategy")) {
    const auto& s = root["strategy"];
    const std::string w = "strategy";
    check_keys(s, w, {"total_rounds", "window_divisor", "alpha", "beta", "buffer_size", "async_mix_rate",
                      "async_frequency", "encryption", "rolling_selection", "comm_metric", "key_bits", "codec_scale",
                      "encryption_cost_per_param"});
    auto& c = cfg.strategy;
    read(s, "total_rounds", c.total_rounds, w);
    read(s, "window_divisor", c.window_divisor, w);
    read(s, "alpha", c.alpha, w);
    read(s, "beta", c.beta, w);
    read(s, "buffer_size", c.buffer_size, w);
    read(s, "async_mix_rate", c.async_mix_rate, w);
    read(s, "async_frequency", c.async_frequency, w);
    read(s, "rolling_selection", c.rolling_selection, w);
    read(s, "key_bits", c.key_bits, w);
    read(s, "codec_scale", c.codec_scale, w);
    read(s, "encryption_cost_per_param", c.encryption_cost_per_param, w);
    std::string enc = fl::to_string(c.encryption);
    read(s, "encryption", enc, w);
    try {
      c.encryption = fl::parse_encryption(enc);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("strategy.encryption: ") + e.what());
    }
    std::string metric = c.comm_metric == fl::CommMetric::kLinkOnly ? "link" : "round_trip";
    read(s, "comm_metric", metric, w);
    if (metric == "link") {
      c.comm_metric = fl::CommMetric::kLinkOnly;
    } else if (metric == "round_trip") {
      c.comm_metric = fl::CommMetric::kRoundTrip;
    } else {
      throw ConfigError("strategy.comm_metric: must be 'link' or 'round_trip'");
    }
  }
  if (root.contains("train")) {
    const auto& t = root["train"];
    check_keys(t, "train", {"learning_rate", "momentum", "batch_size", "local_epochs"});
    read(t, "learning_rate", cfg.train.learning_rate, "train");
    read(t, "momentum", cfg.train.momentum, "train");
    read(t, "batch_size", cfg.train.batch_size, "train");
    read(t, "local_epochs", cfg.train.local_epochs, "train");
  }
  if (root.contains("export")) {
    const auto& e = root["export"];
    check_keys(e, "export", {"timing", "shards"});
    read(e, "timing", cfg.export_timing, "export");
    read(e, "shards", cfg.export_shards, "export");
  }
  if (root.contains("fairness")) {
    const auto& f = root["fairness"];
    check_keys(f, "fairness", {"agents", "straggler_fractions", "rounds", "shard_size"});
    read(f, "agents", cfg.fairness.agents, "fairness");
    read(f, "straggler_fractions", cfg.fairness.straggler_fractions, "fairness");
    read(f, "rounds", cfg.fairness.rounds, "fairness");
    read(f, "shard_size", cfg.fairness.shard_size, "fairness");
  }
  if (root.contains("commcost")) {
    const auto& g = root["commcost"];
    check_keys(g, "commcost", {"agents", "model_mb", "selected_fraction", "frequency", "asr_buffer_fraction",
                               "asr_circumvent_threshold"});
    read(g, "agents", cfg.commcost.agents, "commcost");
    read(g, "model_mb", cfg.commcost.model_mb, "commcost");
    read(g, "selected_fraction", cfg.commcost.selected_fraction, "commcost");
    read(g, "frequency", cfg.commcost.frequency, "commcost");
    read(g, "asr_buffer_fraction", cfg.commcost.asr_buffer_fraction, "commcost");
    read(g, "asr_circumvent_threshold", cfg.commcost.asr_circumvent_threshold, "commcost");
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_json_text(const ExperimentConfig& cfg) {
  json j;
  j["strategies"] = cfg.strategies;
  j["dataset"] = {{"kind", cfg.dataset.kind},
                  {"csv_path", cfg.dataset.csv_path},
                  {"label_column", cfg.dataset.label_column},
                  {"drop_constant_columns", cfg.dataset.drop_constant_columns},
                  {"synth",
                   {{"classes", cfg.dataset.synth_classes},
                    {"features", cfg.dataset.synth_features},
                    {"samples_per_class", cfg.dataset.synth_samples_per_class},
                    {"spread", cfg.dataset.synth_spread}}}};
  j["partition"] = {{"scheme", data::to_string(cfg.partition)}, {"dirichlet_alpha", cfg.dirichlet_alpha}};
  j["agents"] = cfg.agents;
  j["straggler_fractions"] = cfg.straggler_fractions;
  j["hidden_layers"] = cfg.hidden_layers;
  const auto& c = cfg.strategy;
  j["strategy"] = {{"total_rounds", c.total_rounds},
                   {"window_divisor", c.window_divisor},
                   {"alpha", c.alpha},
                   {"beta", c.beta},
                   {"buffer_size", c.buffer_size},
                   {"async_mix_rate", c.async_mix_rate},
                   {"async_frequency", c.async_frequency},
                   {"encryption", fl::to_string(c.encryption)},
                   {"rolling_selection", c.rolling_selection},
                   {"comm_metric", c.comm_metric == fl::CommMetric::kLinkOnly ? "link" : "round_trip"},
                   {"key_bits", c.key_bits},
                   {"codec_scale", c.codec_scale},
                   {"encryption_cost_per_param", c.encryption_cost_per_param}};
  j["train"] = {{"learning_rate", cfg.train.learning_rate},
                {"momentum", cfg.train.momentum},
                {"batch_size", cfg.train.batch_size},
                {"local_epochs", cfg.train.local_epochs}};
  j["target_accuracy"] = cfg.target_accuracy;
  j["out_dir"] = cfg.out_dir;
  j["seed"] = cfg.seed;
  j["repetitions"] = cfg.repetitions;
  j["export"] = {{"timing", cfg.export_timing}, {"shards", cfg.export_shards}};
  j["fairness"] = {{"agents", cfg.fairness.agents},
                   {"straggler_fractions", cfg.fairness.straggler_fractions},
                   {"rounds", cfg.fairness.rounds},
                   {"shard_size", cfg.fairness.shard_size}};
  j["commcost"] = {{"agents", cfg.commcost.agents},
                   {"model_mb", cfg.commcost.model_mb},
                   {"selected_fraction", cfg.commcost.selected_fraction},
                   {"frequency", cfg.commcost.frequency},
                   {"asr_buffer_fraction", cfg.commcost.asr_buffer_fraction},
                   {"asr_circumvent_threshold", cfg.commcost.asr_circumvent_threshold}};
  std::vector<std::uint64_t> seeds;
  for (int r = 0; r < cfg.repetitions; ++r) seeds.push_back(repetition_seed(cfg, r));
  j["repetition_seeds"] = seeds;
  return j.dump(2) + "\n";
}

PreparedData prepare_data(const ExperimentConfig& cfg, std::uint64_t seed) {
  data::Dataset full;
  if (cfg.dataset.kind == "csv") {
    full = data::load_csv(cfg.dataset.csv_path, cfg.dataset.label_column, cfg.dataset.drop_constant_columns);
  } else {
    full = data::synth_generate(cfg.dataset.synth_classes, cfg.dataset.synth_features,
                                cfg.dataset.synth_samples_per_class, cfg.dataset.synth_spread,
                                derive_seed(seed, {kDataStream}));
  }
  auto split = data::split_80_10_10(full, derive_seed(seed, {kDataStream, 1}));
  const auto scaler = data::minmax_fit(split.train.features);
  split.train.features = data::minmax_transform(scaler, split.train.features);
  split.test.features = data::minmax_transform(scaler, split.test.features);
  return {std::move(split.train), std::move(split.test)};
}

fl::Federation build_federation(const ExperimentConfig& cfg, const PreparedData& prepared, int agents,
                                double straggler_fraction, std::uint64_t seed,
                                std::vector<data::IndexList>* shard_indices) {
  data::PartitionSpec spec;
  spec.scheme = cfg.partition;
  spec.agent_count = agents;
  spec.dirichlet_alpha = cfg.dirichlet_alpha;
  spec.rng_seed = derive_seed(seed, {kPartitionStream});
  auto indices = data::partition_indices(prepared.train, spec);

  fl::LearningTask task;
  std::vector<std::size_t> sizes;
  for (const auto& idx : indices) {
    task.shards.push_back(data::subset(prepared.train, idx));
    sizes.push_back(idx.size());
  }
  task.eval_set = prepared.test;
  task.train = cfg.train;

  fl::Federation fed;
  fed.profiles = sim::make_profiles(agents, straggler_fraction, sizes, derive_seed(seed, {kProfileStream}));
  fed.layer_dims.clear();
  fed.layer_dims.push_back(prepared.train.feature_count());
  for (auto h : cfg.hidden_layers) fed.layer_dims.push_back(h);
  fed.layer_dims.push_back(prepared.train.class_count);
  fed.task = std::move(task);
  fed.seed = seed;
  if (shard_indices) *shard_indices = std::move(indices);
  return fed;
}

int cmd_run(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto out = ensure_dir(cfg.out_dir);
  std::ostringstream rounds;
  rounds << "strategy,agents,straggler_pct,repetition,seed,round,participant_count,participants,virtual_duration,"
            "virtual_time,bytes_up,bytes_down,accuracy,precision,recall,f1,st_thrsh,lt_thrsh\n";
  std::ostringstream timing;
  timing << "strategy,agents,straggler_pct,repetition,round,agent_id,train_time,comm_time,data_size,selected\n";
  std::ostringstream shards_csv;
  shards_csv << "agents,straggler_pct,repetition,agent_id,sample_index\n";
  json summary = json::array();

  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    const std::uint64_t seed = repetition_seed(cfg, rep);
    const PreparedData prepared = prepare_data(cfg, seed);
    for (int n : cfg.agents) {
      for (double frac : cfg.straggler_fractions) {
        std::vector<data::IndexList> idx;
        const fl::Federation fed = build_federation(cfg, prepared, n, frac, seed, &idx);
        const std::string pct = format_double(std::round(frac * 1000) / 10);
        if (cfg.export_shards) {
          for (std::size_t a = 0; a < idx.size(); ++a) {
            for (auto s : idx[a]) shards_csv << n << ',' << pct << ',' << rep << ',' << a << ',' << s << '\n';
          }
        }
        for (const auto& name : cfg.strategies) {
          const auto kind = fl::parse_strategy(name);
          const fl::RunResult res = fl::run_strategy(kind, fed, cfg.strategy);
          std::uint64_t total_up = 0, total_down = 0;
          for (const auto& rec : res.records) {
            total_up += rec.bytes_up;
            total_down += rec.bytes_down;
            const auto& ev = rec.global_eval;
            rounds << name << ',' << n << ',' << pct << ',' << rep << ',' << seed << ',' << rec.round_index << ','
                   << rec.participants.size() << ',' << join_ids(rec.participants) << ','
                   << format_double(rec.virtual_duration) << ',' << format_double(rec.virtual_time) << ','
                   << rec.bytes_up << ',' << rec.bytes_down << ','
                   << (ev ? format_double(ev->accuracy) : "") << ',' << (ev ? format_double(ev->precision) : "")
                   << ',' << (ev ? format_double(ev->recall) : "") << ',' << (ev ? format_double(ev->f1) : "") << ','
                   << opt(rec.st_thrsh) << ',' << opt(rec.lt_thrsh) << '\n';
            if (cfg.export_timing) {
              // "selected": in the strategy's chosen set, or a participant when it has none.
              const auto& basis = res.selected_set.empty() ? rec.participants : res.selected_set;
              const std::set<int> chosen(basis.begin(), basis.end());
              for (const auto& s : rec.timings) {
                timing << name << ',' << n << ',' << pct << ',' << rep << ',' << rec.round_index << ',' << s.agent_id
                       << ',' << format_double(s.train_time) << ',' << format_double(s.comm_time) << ','
                       << s.data_size << ',' << (chosen.count(s.agent_id) ? "true" : "false") << '\n';
              }
            }
          }
          const auto conv = eval::convergence_round(res.records, cfg.target_accuracy);
          json cell = {{"strategy", name},
                       {"agents", n},
                       {"straggler_fraction", frac},
                       {"repetition", rep},
                       {"seed", seed},
                       {"rounds", res.records.size()},
                       {"virtual_time", res.records.empty() ? 0.0 : res.records.back().virtual_time},
                       {"bytes_up", total_up},
                       {"bytes_down", total_down},
                       {"convergence_round", eval::format_convergence(conv)},
                       {"selection_history", res.selection_history},
                       {"st_thrsh", res.st_history},
                       {"flagged", res.flagged}};
          if (res.flagged) cell["flag_reason"] = res.flag_reason;
          if (res.lt_thrsh) cell["lt_thrsh"] = *res.lt_thrsh;
          if (res.circumvent_threshold) cell["circumvent_threshold"] = *res.circumvent_threshold;
          if (!res.selected_set.empty()) {
            cell["selected_set"] = res.selected_set;
            const auto fair = eval::fairness(fed.profiles, res.selected_set);
            cell["srs"] = fair.srs;
            cell["frs"] = fair.frs;
          }
          if (!res.records.empty() && res.records.back().global_eval) {
            const auto& ev = *res.records.back().global_eval;
            cell["final"] = {{"accuracy", ev.accuracy}, {"precision", ev.precision}, {"recall", ev.recall},
                             {"f1", ev.f1}};
          }
          summary.push_back(std::move(cell));
        }
      }
    }
  }
  write_file_atomic(out / "rounds.csv", rounds.str());
  write_file_atomic(out / "summary.json", json{{"runs", summary}}.dump(2) + "\n");
  write_file_atomic(out / "manifest.json", to_json_text(cfg));
  if (cfg.export_timing) write_file_atomic(out / "timing.csv", timing.str());
  if (cfg.export_shards) write_file_atomic(out / "shards.csv", shards_csv.str());
  return 0;
}

int cmd_fairness(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto out = ensure_dir(cfg.out_dir);
  fl::StrategyConfig sc = cfg.strategy;
  sc.total_rounds = cfg.fairness.rounds;
  const std::string dataset = cfg.dataset.kind == "csv" ? std::filesystem::path(cfg.dataset.csv_path).stem().string()
                                                        : std::string("synth");
  std::ostringstream csv;
  csv << "method,dataset,agents,straggler_pct,srs,frs,conv_round,comm_cost_mb,repetition\n";

  for (auto kind : {fl::StrategyKind::kDyHfl, fl::StrategyKind::kBfl}) {
    const std::string method = fl::to_string(kind);
    for (int n : cfg.fairness.agents) {
      sc.validate(n);
      for (double frac : cfg.fairness.straggler_fractions) {
        const std::string pct = format_double(std::round(frac * 1000) / 10);
        double srs_sum = 0, frs_sum = 0, cost_sum = 0;
        for (int rep = 0; rep < cfg.repetitions; ++rep) {
          const std::uint64_t seed = repetition_seed(cfg, rep);
          fl::Federation fed;
          const std::vector<std::size_t> sizes(static_cast<std::size_t>(n), cfg.fairness.shard_size);
          fed.profiles = sim::make_profiles(n, frac, sizes, derive_seed(seed, {kProfileStream}));
          fed.layer_dims.clear();
          fed.layer_dims.push_back(cfg.dataset.synth_features);
          for (auto h : cfg.hidden_layers) fed.layer_dims.push_back(h);
          fed.layer_dims.push_back(cfg.dataset.synth_classes);
          fed.seed = seed;
          const auto res = fl::run_strategy(kind, fed, sc);
          const auto fair = eval::fairness(fed.profiles, res.selected_set);
          eval::CommCostInput in;
          in.model_mb = static_cast<double>(fed.model_bytes()) / 1e6;
          in.rounds = sc.total_rounds;
          in.agents = n;
          in.selected = static_cast<std::int64_t>(res.selected_set.size());
          in.sliding_window = sc.sliding_window();
          const double cost = eval::comm_cost(kind, in);
          srs_sum += fair.srs;
          frs_sum += fair.frs;
          cost_sum += cost;
          csv << method << ',' << dataset << ',' << n << ',' << pct << ',' << format_double(fair.srs) << ','
              << format_double(fair.frs) << ",n/a," << format_double(cost) << ',' << rep << '\n';
        }
        const double reps = cfg.repetitions;
        csv << method << ',' << dataset << ',' << n << ',' << pct << ',' << format_double(srs_sum / reps) << ','
            << format_double(frs_sum / reps) << ",n/a," << format_double(cost_sum / reps) << ",avg\n";
      }
    }
  }
  write_file_atomic(out / "fairness.csv", csv.str());
  write_file_atomic(out / "manifest.json", to_json_text(cfg));
  return 0;
}

int cmd_commcost(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto out = ensure_dir(cfg.out_dir);
  const auto& g = cfg.commcost;
  const auto& sc = cfg.strategy;
  std::ostringstream csv;
  csv << "method,agents,model_mb,comm_cost_mb,clamped\n";
  for (double m : g.model_mb) {
    for (int n : g.agents) {
      eval::CommCostInput in;
      in.model_mb = m;
      in.rounds = sc.total_rounds;
      in.agents = n;
      in.buffer_size = sc.resolved_buffer_size(n);
      in.selected = std::llround(g.selected_fraction * n);
      in.sliding_window = sc.sliding_window();
      in.frequency = g.frequency;
      in.asr_buffer = std::llround(g.asr_buffer_fraction * n);
      in.asr_circumvent = n - *in.asr_buffer;
      in.asr_threshold = g.asr_circumvent_threshold;
      for (auto kind : fl::all_strategies()) {
        const bool clamped = kind == fl::StrategyKind::kAsrFed && eval::asr_threshold_clamped(in);
        csv << fl::to_string(kind) << ',' << n << ',' << format_double(m) << ','
            << format_double(eval::comm_cost(kind, in)) << ',' << (clamped ? 1 : 0) << '\n';
      }
    }
  }
  write_file_atomic(out / "commcost.csv", csv.str());
  write_file_atomic(out / "manifest.json", to_json_text(cfg));
  return 0;
}

}  // namespace dyhfl::exp

#include "dyhfl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace dyhfl::eval {
namespace {

std::int64_t need(const std::optional<std::int64_t>& v, const char* field, StrategyKind method) {
  if (!v) throw std::invalid_argument(std::string(field) + ": required by " + fl::to_string(method) + " cost");
  if (*v < 0) throw std::invalid_argument(std::string(field) + ": must be non-negative");
  return *v;
}

std::int64_t model_bytes(double model_mb) {
  if (!(model_mb >= 0) || !std::isfinite(model_mb)) throw std::invalid_argument("model_mb: must be non-negative");
  return std::llround(model_mb * 1e6);
}

}  // namespace

std::int64_t transmission_count(StrategyKind method, const CommCostInput& in) {
  switch (method) {
    case StrategyKind::kFedBuff:
      return need(in.rounds, "T", method) * need(in.buffer_size, "B", method);
    case StrategyKind::kSync:
      return need(in.rounds, "T", method) * need(in.agents, "N", method);
    case StrategyKind::kBfl: {
      const auto t = need(in.rounds, "T", method);
      const auto n = need(in.agents, "N", method);
      const auto sel = need(in.selected, "N_sel", method);
      if (t < 1) throw std::invalid_argument("T: must be >= 1");
      return n + (t - 1) * sel;
    }
    case StrategyKind::kAsrFed: {
      const auto t = need(in.rounds, "T", method);
      const auto buffs = need(in.asr_buffer, "Buffs", method);
      const auto cirs = need(in.asr_circumvent, "Cirs", method);
      const auto cirt = need(in.asr_threshold, "CirT", method);
      return t * buffs + std::max<std::int64_t>(0, t - cirt) * cirs;
    }
    case StrategyKind::kDyHfl: {
      const auto t = need(in.rounds, "T", method);
      const auto sw = need(in.sliding_window, "SW", method);
      if (sw > t) throw std::invalid_argument("SW: must not exceed T");
      return sw * need(in.agents, "N", method) + (t - sw) * need(in.selected, "N_sel", method);
    }
    case StrategyKind::kAsync:
      return need(in.rounds, "T", method) * need(in.agents, "N", method) * need(in.frequency, "F", method);
  }
  throw std::invalid_argument("unknown method");
}

double comm_cost(StrategyKind method, const CommCostInput& in) {
  const std::int64_t bytes = transmission_count(method, in) * model_bytes(in.model_mb);
  return static_cast<double>(bytes) / 1e6;
}

bool asr_threshold_clamped(const CommCostInput& in) {
  return in.rounds && in.asr_threshold && *in.asr_threshold > *in.rounds;
}

FairnessReport fairness(std::span<const sim::AgentProfile> profiles, std::span<const int> selected) {
  FairnessReport r;
  std::map<int, sim::SpeedClass> classes;
  for (const auto& p : profiles) {
    classes[p.agent_id] = p.speed_class;
    (p.speed_class == sim::SpeedClass::kStraggler ? r.total_stragglers : r.total_fast)++;
  }
  const std::set<int> unique(selected.begin(), selected.end());
  for (int id : unique) {
    const auto it = classes.find(id);
    if (it == classes.end()) throw std::invalid_argument("selected agent " + std::to_string(id) + " is not in the population");
    (it->second == sim::SpeedClass::kStraggler ? r.selected_stragglers : r.selected_fast)++;
  }
  r.srs_vacuous = r.total_stragglers == 0;
  r.frs_vacuous = r.total_fast == 0;
  r.srs = r.srs_vacuous ? 1.0 : static_cast<double>(r.selected_stragglers) / r.total_stragglers;
  r.frs = r.frs_vacuous ? 1.0 : static_cast<double>(r.selected_fast) / r.total_fast;
  return r;
}

std::optional<int> convergence_round(std::span<const fl::RoundRecord> records, double target_accuracy) {
  for (const auto& rec : records) {
    if (rec.global_eval && rec.global_eval->accuracy >= target_accuracy) return rec.round_index;
  }
  return std::nullopt;
}

std::string format_convergence(const std::optional<int>& round) {
  return round ? std::to_string(*round) : "not converged";
}

std::vector<std::uint64_t> uploads_per_round(const fl::RunResult& run) {
  std::vector<std::uint64_t> out;
  for (const auto& rec : run.records) out.push_back(run.model_bytes ? rec.bytes_up / run.model_bytes : 0);
  return out;
}

ComplexityReport complexity_check(StrategyKind strategy, std::span<const PopulationMeasurement> measurements) {
  ComplexityReport rep;
  rep.strategy = fl::to_string(strategy);
  auto fail = [&](const std::string& msg) {
    rep.within_bound = false;
    rep.violations.push_back(msg);
  };
  std::set<int> sizes;
  for (const auto& m : measurements) sizes.insert(m.agents);
  if (sizes.size() < 2) fail("need measurements at two or more population sizes");

  for (const auto& m : measurements) {
    const std::string where = "N=" + std::to_string(m.agents);
    for (std::size_t r = 0; r < m.per_round_uploads.size(); ++r) {
      const auto got = m.per_round_uploads[r];
      const std::string at = where + " round " + std::to_string(r + 1) + ": " + std::to_string(got) + " uploads";
      switch (strategy) {
        case StrategyKind::kSync:
          rep.bound = "Theta(n)";
          if (got != static_cast<std::uint64_t>(m.agents)) fail(at + ", expected n");
          break;
        case StrategyKind::kFedBuff:
          rep.bound = "Theta(B)";
          if (got != static_cast<std::uint64_t>(m.buffer_size)) fail(at + ", expected B");
          break;
        case StrategyKind::kAsync:
          rep.bound = "Theta(n*F)";
          if (got != static_cast<std::uint64_t>(m.agents) * static_cast<std::uint64_t>(m.frequency)) {
            fail(at + ", expected n*F");
          }
          break;
        case StrategyKind::kDyHfl: {
          rep.bound = "Omega(k), O(n)";
          const bool preliminary = static_cast<int>(r) < m.sliding_window;
          const auto k = static_cast<std::uint64_t>(m.selected_set.size());
          if (got > static_cast<std::uint64_t>(m.agents)) fail(at + ", exceeds n");
          if (preliminary && got != static_cast<std::uint64_t>(m.agents)) fail(at + ", preliminary round expects n");
          if (!preliminary && (got == 0 || (k > 0 && got != k))) fail(at + ", expected k");
          break;
        }
        default:
          rep.bound = "unchecked";
          break;
      }
    }
  }
  return rep;
}

}  // namespace dyhfl::eval

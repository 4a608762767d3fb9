#include "dyhfl/selection.hpp"

namespace dyhfl::fl {

std::vector<GlobalMetricEntry> normalize_metrics(std::span<const RawMetrics> raw, double alpha, double beta) {
  if (raw.empty()) throw std::invalid_argument("normalize_metrics needs at least one agent");
  std::vector<double> train, comm, size;
  for (const auto& r : raw) {
    train.push_back(r.train_time);
    comm.push_back(r.comm_time);
    size.push_back(r.data_size);
  }
  const auto tn = minmax_scale<double>(train);
  const auto cn = minmax_scale<double>(comm);
  const auto sn = minmax_scale<double>(size);
  std::vector<GlobalMetricEntry> out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    GlobalMetricEntry e{raw[i].agent_id, tn[i], cn[i], sn[i], 0.0};
    e.global_mt = e.recompute(alpha, beta);
    out.push_back(e);
  }
  return out;
}

std::vector<double> global_mts(std::span<const GlobalMetricEntry> entries) {
  std::vector<double> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.global_mt);
  return out;
}

std::vector<int> select_agents(std::span<const GlobalMetricEntry> entries, double lt_thrsh) {
  if (entries.empty()) throw std::invalid_argument("select_agents needs at least one entry");
  std::vector<int> chosen;
  for (const auto& e : entries) {
    if (e.global_mt <= lt_thrsh) chosen.push_back(e.agent_id);
  }
  if (chosen.empty()) {
    const auto best = std::min_element(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
      return a.global_mt < b.global_mt || (a.global_mt == b.global_mt && a.agent_id < b.agent_id);
    });
    chosen.push_back(best->agent_id);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

SlidingWindow::SlidingWindow(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("sliding window capacity must be positive");
}

void SlidingWindow::push(double st_thrsh) {
  if (values_.size() == capacity_) values_.erase(values_.begin());
  values_.push_back(st_thrsh);
}

}  // namespace dyhfl::fl

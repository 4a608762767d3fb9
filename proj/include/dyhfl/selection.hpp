#ifndef DYHFL_SELECTION_HPP_
#define DYHFL_SELECTION_HPP_

#include <algorithm>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace dyhfl::fl {

// Added to every divisor in wam(); Min-Max normalization guarantees a zero
// whenever one agent is best on every metric.
template <typename Scalar>
Scalar wam_epsilon() {
  return Scalar(1) / (Scalar(1000000) * Scalar(1000000));
}

/// Short-term threshold from one round's Global_MT values.
///
/// Values are sorted descending, weighted by 1/(value + eps), and the weight
/// sequence is reversed before the weighted mean, so the largest value is
/// paired with the weight of the smallest one. Generic over the scalar type so
/// hand traces can be checked in exact rational arithmetic.
template <typename Scalar>
Scalar wam(std::span<const Scalar> global_mts) {
  if (global_mts.empty()) throw std::invalid_argument("wam of an empty sequence");
  std::vector<Scalar> sorted(global_mts.begin(), global_mts.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<Scalar>());
  std::vector<Scalar> weights;
  weights.reserve(sorted.size());
  for (const Scalar& v : sorted) {
    if (v < Scalar(0)) throw std::invalid_argument("wam expects non-negative values");
    weights.push_back(Scalar(1) / (v + wam_epsilon<Scalar>()));
  }
  std::reverse(weights.begin(), weights.end());
  Scalar num(0);
  Scalar den(0);
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    num += sorted[j] * weights[j];
    den += weights[j];
  }
  return num / den;
}

/// Weighted mean with triangular weights i(i+1)/2, i = 1 for the oldest
/// value, so recent thresholds dominate.
template <typename Scalar>
Scalar ewa(std::span<const Scalar> st_thrshs) {
  if (st_thrshs.empty()) throw std::invalid_argument("ewa of an empty sequence");
  Scalar num(0);
  Scalar den(0);
  for (std::size_t k = 0; k < st_thrshs.size(); ++k) {
    const Scalar w((k + 1) * (k + 2) / 2);
    num += w * st_thrshs[k];
    den += w;
  }
  return num / den;
}

// (ewa + max) / 2
template <typename Scalar>
Scalar lt_threshold(std::span<const Scalar> st_thrshs) {
  if (st_thrshs.empty()) throw std::invalid_argument("lt_threshold of an empty sequence");
  const Scalar top = *std::max_element(st_thrshs.begin(), st_thrshs.end());
  return (ewa(st_thrshs) + top) / Scalar(2);
}

// Braced-list conveniences: wam<double>({0.2, 0.8}).
template <typename Scalar>
Scalar wam(std::initializer_list<Scalar> v) {
  return wam(std::span<const Scalar>(v.begin(), v.size()));
}
template <typename Scalar>
Scalar ewa(std::initializer_list<Scalar> v) {
  return ewa(std::span<const Scalar>(v.begin(), v.size()));
}
template <typename Scalar>
Scalar lt_threshold(std::initializer_list<Scalar> v) {
  return lt_threshold(std::span<const Scalar>(v.begin(), v.size()));
}

// Min-Max scaling of one metric list; a constant list maps to zeros.
template <typename Scalar>
std::vector<Scalar> minmax_scale(std::span<const Scalar> values) {
  std::vector<Scalar> out(values.size(), Scalar(0));
  if (values.empty()) return out;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const Scalar range = *hi - *lo;
  if (!(range > Scalar(0))) return out;
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - *lo) / range;
  return out;
}

struct RawMetrics {
  int agent_id = 0;
  double train_time = 0;
  double comm_time = 0;
  double data_size = 0;
};

struct GlobalMetricEntry {
  int agent_id = 0;
  double train_time_norm = 0;
  double comm_time_norm = 0;
  double data_size_norm = 0;
  double global_mt = 0;

  double recompute(double alpha, double beta) const {
    return alpha * (train_time_norm + comm_time_norm) + beta * data_size_norm;
  }
};

/// Scales each metric list independently across agents, then
/// Global_MT = alpha * (train + comm) + beta * data_size.
std::vector<GlobalMetricEntry> normalize_metrics(std::span<const RawMetrics> raw, double alpha, double beta);

std::vector<double> global_mts(std::span<const GlobalMetricEntry> entries);

/// Agents with global_mt <= lt_thrsh, ascending by id. When nobody qualifies,
/// the single agent with the smallest global_mt is returned.
std::vector<int> select_agents(std::span<const GlobalMetricEntry> entries, double lt_thrsh);

/// Sliding window of short-term thresholds, capped at `capacity` entries.
class SlidingWindow {
 public:
  explicit SlidingWindow(std::size_t capacity);

  // Appends, evicting the oldest entry once full.
  void push(double st_thrsh);
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  std::size_t capacity() const { return capacity_; }
  double long_term_threshold() const { return lt_threshold(values()); }

 private:
  std::size_t capacity_;
  std::vector<double> values_;
};

}  // namespace dyhfl::fl

#endif  // DYHFL_SELECTION_HPP_

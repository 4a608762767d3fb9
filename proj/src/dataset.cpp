#include "dyhfl/dataset.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include "dyhfl/rng.hpp"

namespace dyhfl::data {
namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == ',' && !quoted) {
      cells.push_back(cell);
      cell.clear();
    } else if (ch != '\r') {
      cell.push_back(ch);
    }
  }
  cells.push_back(cell);
  for (auto& c : cells) {
    const auto b = c.find_first_not_of(" \t");
    const auto e = c.find_last_not_of(" \t");
    c = b == std::string::npos ? std::string() : c.substr(b, e - b + 1);
  }
  return cells;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtod(s.c_str(), &end);
  return errno == 0 && end == s.c_str() + s.size();
}

// Draws from a symmetric Dirichlet(alpha) over `k` components.
std::vector<double> dirichlet(Rng& rng, int k, double alpha) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> p(static_cast<std::size_t>(k));
  double total = 0;
  for (auto& v : p) {
    v = gamma(rng);
    total += v;
  }
  if (total <= 0) {
    // Every draw underflowed (tiny alpha); put all mass on one component.
    std::fill(p.begin(), p.end(), 0.0);
    p[std::uniform_int_distribution<std::size_t>(0, p.size() - 1)(rng)] = 1.0;
    return p;
  }
  for (auto& v : p) v /= total;
  return p;
}

// Largest-remainder rounding of total * weights, summing exactly to total.
std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& weights) {
  std::vector<std::size_t> counts(weights.size());
  std::vector<std::pair<double, std::size_t>> rema;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = static_cast<double>(total) * weights[i];
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[i];
    rema.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) counts[rema[i % rema.size()].second] += 1;
  return counts;
}

std::vector<IndexList> indices_by_class(const Dataset& ds) {
  std::vector<IndexList> by_class(static_cast<std::size_t>(ds.class_count));
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
  return by_class;
}

bool all_nonempty(const std::vector<IndexList>& shards) {
  return std::none_of(shards.begin(), shards.end(), [](const IndexList& s) { return s.empty(); });
}

// Moves single samples from the largest shards into empty ones.
void fill_empty(std::vector<IndexList>& shards) {
  for (auto& s : shards) {
    if (!s.empty()) continue;
    auto donor = std::max_element(shards.begin(), shards.end(),
                                  [](const IndexList& a, const IndexList& b) { return a.size() < b.size(); });
    s.push_back(donor->back());
    donor->pop_back();
  }
}

std::vector<IndexList> partition_identical(const Dataset& ds, const PartitionSpec& spec, Rng& rng) {
  IndexList order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const auto k = static_cast<std::size_t>(spec.agent_count);
  std::vector<IndexList> shards(k);
  const std::size_t base = ds.size() / k;
  const std::size_t extra = ds.size() % k;
  std::size_t pos = 0;
  for (std::size_t a = 0; a < k; ++a) {
    const std::size_t len = base + (a < extra ? 1 : 0);
    shards[a].assign(order.begin() + static_cast<std::ptrdiff_t>(pos), order.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  return shards;
}

std::vector<IndexList> partition_dirichlet(const Dataset& ds, const PartitionSpec& spec, Rng& rng) {
  constexpr int kMaxAttempts = 100;
  auto by_class = indices_by_class(ds);
  std::vector<IndexList> shards;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    shards.assign(static_cast<std::size_t>(spec.agent_count), {});
    for (auto& members : by_class) {
      std::shuffle(members.begin(), members.end(), rng);
      const auto counts = apportion(members.size(), dirichlet(rng, spec.agent_count, spec.dirichlet_alpha));
      std::size_t pos = 0;
      for (std::size_t a = 0; a < counts.size(); ++a) {
        for (std::size_t j = 0; j < counts[a]; ++j) shards[a].push_back(members[pos++]);
      }
    }
    if (all_nonempty(shards)) return shards;
  }
  fill_empty(shards);
  return shards;
}

// Shard sizes from Dirichlet(1); per-class counts are a controlled rounding
// of size_a * n_c / n, so each shard keeps the global label ratios to within
// one sample per class while row and column totals stay exact.
std::vector<IndexList> partition_no_label_skew(const Dataset& ds, const PartitionSpec& spec, Rng& rng) {
  const auto k = static_cast<std::size_t>(spec.agent_count);
  std::vector<std::size_t> sizes;
  for (int attempt = 0; attempt < 100; ++attempt) {
    sizes = apportion(ds.size(), dirichlet(rng, spec.agent_count, 1.0));
    if (std::all_of(sizes.begin(), sizes.end(), [](std::size_t s) { return s > 0; })) break;
  }
  for (auto& s : sizes) {
    if (s > 0) continue;
    auto donor = std::max_element(sizes.begin(), sizes.end());
    --*donor;
    s = 1;
  }

  auto by_class = indices_by_class(ds);
  const std::size_t classes = by_class.size();
  const double n = static_cast<double>(ds.size());

  std::vector<std::vector<std::size_t>> alloc(k, std::vector<std::size_t>(classes));
  std::vector<std::vector<double>> frac(k, std::vector<double>(classes));
  std::vector<std::size_t> row_need(k), col_need(classes);
  for (std::size_t c = 0; c < classes; ++c) col_need[c] = by_class[c].size();
  for (std::size_t a = 0; a < k; ++a) {
    row_need[a] = sizes[a];
    for (std::size_t c = 0; c < classes; ++c) {
      const double exact = static_cast<double>(sizes[a]) * static_cast<double>(by_class[c].size()) / n;
      alloc[a][c] = static_cast<std::size_t>(std::floor(exact));
      frac[a][c] = exact - std::floor(exact);
      row_need[a] -= alloc[a][c];
      col_need[c] -= alloc[a][c];
    }
  }
  // Greedy Gale-Ryser fill of the rounding residue: rows with the largest
  // residue first, each taking the columns with the most remaining need
  // (ties broken by the larger fractional part).
  std::vector<std::size_t> row_order(k);
  std::iota(row_order.begin(), row_order.end(), std::size_t{0});
  std::stable_sort(row_order.begin(), row_order.end(),
                   [&](std::size_t x, std::size_t y) { return row_need[x] > row_need[y]; });
  for (std::size_t a : row_order) {
    std::vector<std::size_t> cols(classes);
    std::iota(cols.begin(), cols.end(), std::size_t{0});
    std::stable_sort(cols.begin(), cols.end(), [&](std::size_t x, std::size_t y) {
      if (col_need[x] != col_need[y]) return col_need[x] > col_need[y];
      return frac[a][x] > frac[a][y];
    });
    for (std::size_t i = 0; i < classes && row_need[a] > 0; ++i) {
      const std::size_t c = cols[i];
      if (col_need[c] == 0) break;
      alloc[a][c] += 1;
      col_need[c] -= 1;
      row_need[a] -= 1;
    }
  }

  std::vector<IndexList> shards(k);
  for (std::size_t c = 0; c < classes; ++c) {
    auto& members = by_class[c];
    std::shuffle(members.begin(), members.end(), rng);
    std::size_t pos = 0;
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t j = 0; j < alloc[a][c] && pos < members.size(); ++j) shards[a].push_back(members[pos++]);
    }
    // Any leftovers (only possible if the greedy fill fell short) go round-robin.
    for (std::size_t a = 0; pos < members.size(); a = (a + 1) % k) shards[a].push_back(members[pos++]);
  }
  fill_empty(shards);
  return shards;
}

}  // namespace

void Dataset::validate() const {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw DataError("feature rows (" + std::to_string(features.rows()) + ") != label count (" +
                    std::to_string(labels.size()) + ")");
  }
  for (int y : labels) {
    if (y < 0 || y >= class_count) throw DataError("label " + std::to_string(y) + " outside class range");
  }
}

std::vector<std::size_t> Dataset::label_histogram() const {
  std::vector<std::size_t> h(static_cast<std::size_t>(class_count), 0);
  for (int y : labels) h[static_cast<std::size_t>(y)] += 1;
  return h;
}

Dataset subset(const Dataset& ds, std::span<const std::size_t> indices) {
  Dataset out;
  out.class_count = ds.class_count;
  out.name = ds.name;
  out.features.resize(static_cast<Eigen::Index>(indices.size()), ds.features.cols());
  out.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= ds.size()) throw DataError("subset index out of range");
    out.features.row(static_cast<Eigen::Index>(i)) = ds.features.row(static_cast<Eigen::Index>(indices[i]));
    out.labels.push_back(ds.labels[indices[i]]);
  }
  return out;
}

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column, bool drop_constant_columns) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV file: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("CSV file has no header: " + path.string());
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_csv_line(line);
  const auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end()) throw DataError("unknown label column '" + label_column + "'");
  const auto label_pos = static_cast<std::size_t>(label_it - header.begin());

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::unordered_map<std::string, int> label_ids;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                      " cells, got " + std::to_string(cells.size()));
    }
    std::vector<double> row;
    row.reserve(cells.size() - 1);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c == label_pos) continue;
      double v;
      if (!parse_double(cells[c], v)) {
        throw DataError("line " + std::to_string(line_no) + ", column '" + header[c] + "': non-numeric cell '" +
                        cells[c] + "'");
      }
      row.push_back(v);
    }
    auto [it, inserted] = label_ids.try_emplace(cells[label_pos], static_cast<int>(label_ids.size()));
    labels.push_back(it->second);
    rows.push_back(std::move(row));
  }

  const std::size_t width = header.size() - 1;
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < width; ++c) {
    bool constant = true;
    for (std::size_t r = 1; r < rows.size() && constant; ++r) constant = rows[r][c] == rows[0][c];
    if (!drop_constant_columns || !constant) keep.push_back(c);
  }

  Dataset ds;
  ds.name = path.stem().string();
  ds.class_count = static_cast<int>(label_ids.size());
  ds.labels = std::move(labels);
  ds.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t j = 0; j < keep.size(); ++j) {
      ds.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = rows[r][keep[j]];
    }
  }
  return ds;
}

ScalerParams minmax_fit(const FeatureMatrix& train_features) {
  if (train_features.rows() == 0) throw DataError("cannot fit a scaler on zero rows");
  return ScalerParams{train_features.colwise().minCoeff().transpose(), train_features.colwise().maxCoeff().transpose()};
}

FeatureMatrix minmax_transform(const ScalerParams& params, const FeatureMatrix& features) {
  if (features.cols() != params.min.size()) throw DataError("scaler width does not match features");
  FeatureMatrix out(features.rows(), features.cols());
  for (Eigen::Index c = 0; c < features.cols(); ++c) {
    const double range = params.max[c] - params.min[c];
    if (range > 0) {
      out.col(c) = (features.col(c).array() - params.min[c]) / range;
    } else {
      out.col(c).setZero();
    }
  }
  return out;
}

Split split_80_10_10(const Dataset& ds, std::uint64_t rng_seed) {
  if (ds.size() < 10) throw DataError("need at least 10 samples to split, got " + std::to_string(ds.size()));
  IndexList order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(rng_seed, {0x5917});
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_val = ds.size() / 10;
  const std::size_t n_test = ds.size() / 10;
  const std::size_t n_train = ds.size() - n_val - n_test;
  std::span<const std::size_t> all(order);
  return Split{subset(ds, all.subspan(0, n_train)), subset(ds, all.subspan(n_train, n_val)),
               subset(ds, all.subspan(n_train + n_val, n_test))};
}

PartitionScheme parse_partition_scheme(const std::string& name) {
  if (name == "identical") return PartitionScheme::kIdentical;
  if (name == "dirichlet") return PartitionScheme::kDirichlet;
  if (name == "no_label_skew") return PartitionScheme::kNoLabelSkew;
  throw DataError("unknown partition scheme '" + name + "'");
}

std::string to_string(PartitionScheme scheme) {
  switch (scheme) {
    case PartitionScheme::kIdentical: return "identical";
    case PartitionScheme::kDirichlet: return "dirichlet";
    case PartitionScheme::kNoLabelSkew: return "no_label_skew";
  }
  return "unknown";
}

std::vector<IndexList> partition_indices(const Dataset& ds, const PartitionSpec& spec) {
  if (spec.agent_count < 1) throw DataError("agent_count must be >= 1");
  if (static_cast<std::size_t>(spec.agent_count) > ds.size()) {
    throw DataError("agent_count (" + std::to_string(spec.agent_count) + ") exceeds sample count (" +
                    std::to_string(ds.size()) + ")");
  }
  if (spec.scheme == PartitionScheme::kDirichlet && !(spec.dirichlet_alpha > 0)) {
    throw DataError("dirichlet_alpha must be positive");
  }
  Rng rng = make_rng(spec.rng_seed, {0x9a27, static_cast<std::uint64_t>(spec.scheme)});
  switch (spec.scheme) {
    case PartitionScheme::kIdentical: return partition_identical(ds, spec, rng);
    case PartitionScheme::kDirichlet: return partition_dirichlet(ds, spec, rng);
    case PartitionScheme::kNoLabelSkew: return partition_no_label_skew(ds, spec, rng);
  }
  throw DataError("unknown partition scheme");
}

std::vector<Dataset> partition(const Dataset& ds, const PartitionSpec& spec) {
  std::vector<Dataset> shards;
  for (const auto& idx : partition_indices(ds, spec)) shards.push_back(subset(ds, idx));
  return shards;
}

Dataset synth_generate(int class_count, int feature_count, int samples_per_class, double cluster_spread,
                       std::uint64_t rng_seed) {
  if (class_count <= 0 || feature_count <= 0 || samples_per_class <= 0 || !(cluster_spread > 0)) {
    throw DataError("synth_generate arguments must be positive");
  }
  Rng rng = make_rng(rng_seed, {0x5e17});
  std::uniform_real_distribution<double> center_dist(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, cluster_spread);
  FeatureMatrix centers(class_count, feature_count);
  for (Eigen::Index i = 0; i < centers.size(); ++i) centers.data()[i] = center_dist(rng);
  // Spread the centers apart until every pair is at least 4 * cluster_spread away.
  double closest = std::numeric_limits<double>::infinity();
  for (int a = 0; a < class_count; ++a) {
    for (int b = a + 1; b < class_count; ++b) closest = std::min(closest, (centers.row(a) - centers.row(b)).norm());
  }
  if (class_count > 1 && closest < 4 * cluster_spread) centers *= 4 * cluster_spread / std::max(closest, 1e-12);

  Dataset ds;
  ds.name = "synthetic";
  ds.class_count = class_count;
  ds.features.resize(static_cast<Eigen::Index>(class_count) * samples_per_class, feature_count);
  ds.labels.reserve(static_cast<std::size_t>(class_count) * static_cast<std::size_t>(samples_per_class));
  Eigen::Index row = 0;
  for (int c = 0; c < class_count; ++c) {
    for (int s = 0; s < samples_per_class; ++s, ++row) {
      for (int f = 0; f < feature_count; ++f) ds.features(row, f) = centers(c, f) + noise(rng);
      ds.labels.push_back(c);
    }
  }
  return ds;
}

void write_shard_manifest(const std::filesystem::path& path, const std::vector<IndexList>& shards) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write shard manifest: " + path.string());
  out << "agent_id,sample_index\n";
  for (std::size_t a = 0; a < shards.size(); ++a) {
    for (std::size_t idx : shards[a]) out << a << ',' << idx << '\n';
  }
}

}  // namespace dyhfl::data

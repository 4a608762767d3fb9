#ifndef DYHFL_DATASET_HPP_
#define DYHFL_DATASET_HPP_

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dyhfl::data {

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using IndexList = std::vector<std::size_t>;

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Dataset {
  FeatureMatrix features;  // one sample per row
  std::vector<int> labels;
  int class_count = 0;
  std::string name;

  std::size_t size() const { return labels.size(); }
  Eigen::Index feature_count() const { return features.cols(); }

  // Throws DataError if rows != labels or a label is outside [0, class_count).
  void validate() const;
  std::vector<std::size_t> label_histogram() const;
};

// Rows `indices` of ds, in the given order.
Dataset subset(const Dataset& ds, std::span<const std::size_t> indices);

/// Reads a headered CSV. `label_column` is matched against the header; every
/// other column must be numeric. Labels are re-indexed densely in order of
/// first appearance. With `drop_constant_columns`, single-valued feature
/// columns are removed.
Dataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                 bool drop_constant_columns);

struct ScalerParams {
  Eigen::VectorXd min;
  Eigen::VectorXd max;
};

ScalerParams minmax_fit(const FeatureMatrix& train_features);
// (x - min) / (max - min); constant features map to 0. No clamping.
FeatureMatrix minmax_transform(const ScalerParams& params, const FeatureMatrix& features);

struct Split {
  Dataset train;
  Dataset validation;
  Dataset test;
};

// Seeded shuffle, then floor(10%) validation, floor(10%) test, rest train.
Split split_80_10_10(const Dataset& ds, std::uint64_t rng_seed);

enum class PartitionScheme { kIdentical, kDirichlet, kNoLabelSkew };

struct PartitionSpec {
  PartitionScheme scheme = PartitionScheme::kIdentical;
  int agent_count = 1;
  double dirichlet_alpha = 0.5;
  std::uint64_t rng_seed = 0;
};

PartitionScheme parse_partition_scheme(const std::string& name);
std::string to_string(PartitionScheme scheme);

// Disjoint cover of [0, ds.size()) with one non-empty index list per agent.
std::vector<IndexList> partition_indices(const Dataset& ds, const PartitionSpec& spec);
std::vector<Dataset> partition(const Dataset& ds, const PartitionSpec& spec);

// Gaussian blobs, one center per class drawn uniformly in [-1, 1]^d and then
// scaled up if needed so that centers are at least 4 * cluster_spread apart.
Dataset synth_generate(int class_count, int feature_count, int samples_per_class,
                       double cluster_spread, std::uint64_t rng_seed);

// CSV with header "agent_id,sample_index".
void write_shard_manifest(const std::filesystem::path& path, const std::vector<IndexList>& shards);

}  // namespace dyhfl::data

#endif  // DYHFL_DATASET_HPP_

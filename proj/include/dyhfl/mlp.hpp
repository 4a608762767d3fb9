#ifndef DYHFL_MLP_HPP_
#define DYHFL_MLP_HPP_

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dyhfl/dataset.hpp"
#include "dyhfl/rng.hpp"

namespace dyhfl::nn {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Dense ReLU network emitting logits, plus its heavy-ball velocity.
///
/// weights[i] has shape (dims[i+1] x dims[i]). The flat parameter order is
/// layer-major: weights[i] row-major, then biases[i].
template <typename Scalar>
struct Mlp {
  std::vector<Eigen::Index> layer_dims;
  std::vector<RowMatrix<Scalar>> weights;
  std::vector<Vector<Scalar>> biases;
  Vector<Scalar> velocity;  // empty until the first training step

  std::size_t layer_count() const { return weights.size(); }
};

using MlpModel = Mlp<double>;

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.8;
  int batch_size = 64;
  int local_epochs = 10;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (!(learning_rate >= 0)) throw std::invalid_argument("learning_rate must be >= 0");
    if (!(momentum >= 0 && momentum < 1)) throw std::invalid_argument("momentum must be in [0, 1)");
    if (batch_size <= 0) throw std::invalid_argument("batch_size must be positive");
    if (local_epochs <= 0) throw std::invalid_argument("local_epochs must be positive");
  }
};

enum class Averaging { kBinaryPositive, kMacro };

struct EvalReport {
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  Averaging averaging = Averaging::kMacro;
  Eigen::MatrixXi confusion;  // rows: true class, cols: predicted class
};

inline std::size_t parameter_count(std::span<const Eigen::Index> dims) {
  std::size_t total = 0;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    total += static_cast<std::size_t>(dims[i + 1] * (dims[i] + 1));
  }
  return total;
}

template <typename Scalar>
std::size_t parameter_count(const Mlp<Scalar>& model) {
  return parameter_count(std::span<const Eigen::Index>(model.layer_dims));
}

template <typename Scalar = double>
Mlp<Scalar> init_model(std::span<const Eigen::Index> dims, std::uint64_t rng_seed) {
  if (dims.size() < 2) throw std::invalid_argument("an MLP needs at least 2 layer dims");
  for (Eigen::Index d : dims) {
    if (d <= 0) throw std::invalid_argument("layer dims must be positive");
  }
  Mlp<Scalar> model;
  model.layer_dims.assign(dims.begin(), dims.end());
  Rng rng = make_rng(rng_seed, {0x1417});
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims[i]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    RowMatrix<Scalar> w(dims[i + 1], dims[i]);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = static_cast<Scalar>(dist(rng));
    }
    model.weights.push_back(std::move(w));
    model.biases.push_back(Vector<Scalar>::Zero(dims[i + 1]));
  }
  return model;
}

template <typename Scalar = double>
Mlp<Scalar> init_model(std::initializer_list<Eigen::Index> dims, std::uint64_t rng_seed) {
  std::vector<Eigen::Index> v(dims);
  return init_model<Scalar>(std::span<const Eigen::Index>(v), rng_seed);
}

template <typename Scalar>
Vector<Scalar> get_flat_params(const Mlp<Scalar>& model) {
  Vector<Scalar> flat(static_cast<Eigen::Index>(parameter_count(model)));
  Eigen::Index offset = 0;
  for (std::size_t i = 0; i < model.layer_count(); ++i) {
    const auto& w = model.weights[i];
    flat.segment(offset, w.size()) = Eigen::Map<const Vector<Scalar>>(w.data(), w.size());
    offset += w.size();
    flat.segment(offset, model.biases[i].size()) = model.biases[i];
    offset += model.biases[i].size();
  }
  return flat;
}

template <typename Scalar, typename Derived>
void set_flat_params(Mlp<Scalar>& model, const Eigen::MatrixBase<Derived>& flat) {
  const auto expected = static_cast<Eigen::Index>(parameter_count(model));
  if (flat.size() != expected) {
    throw std::invalid_argument("flat parameter length mismatch: expected " +
                                std::to_string(expected) + ", got " + std::to_string(flat.size()));
  }
  Eigen::Index offset = 0;
  for (std::size_t i = 0; i < model.layer_count(); ++i) {
    auto& w = model.weights[i];
    Eigen::Map<Vector<Scalar>>(w.data(), w.size()) = flat.segment(offset, w.size());
    offset += w.size();
    model.biases[i] = flat.segment(offset, model.biases[i].size());
    offset += model.biases[i].size();
  }
}

template <typename Scalar>
void set_flat_params(Mlp<Scalar>& model, std::span<const Scalar> flat) {
  const Eigen::Map<const Vector<Scalar>> view(flat.data(), static_cast<Eigen::Index>(flat.size()));
  set_flat_params(model, view);
}

// 32-bit float serialization convention.
template <typename Scalar>
std::size_t model_size_bytes(const Mlp<Scalar>& model) {
  return parameter_count(model) * 4;
}

// Little-endian float32 wire image of the flat parameters.
template <typename Scalar>
std::vector<std::uint8_t> to_float32_le(const Mlp<Scalar>& model) {
  const Vector<Scalar> flat = get_flat_params(model);
  std::vector<std::uint8_t> out;
  out.reserve(static_cast<std::size_t>(flat.size()) * 4);
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    const float f = static_cast<float>(flat[i]);
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof bits);
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
  }
  return out;
}

// Row-wise softmax with max subtraction.
template <typename Derived>
RowMatrix<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  RowMatrix<Scalar> p = logits;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    p.row(r).array() -= p.row(r).maxCoeff();
    p.row(r) = p.row(r).array().exp().matrix();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

namespace detail {

template <typename Scalar>
void check_inputs(const Mlp<Scalar>& model, Eigen::Index rows, Eigen::Index cols, std::span<const int> labels) {
  if (rows == 0) throw std::invalid_argument("empty data");
  if (cols != model.layer_dims.front()) {
    throw std::invalid_argument("feature width " + std::to_string(cols) + " does not match input dim " +
                                std::to_string(model.layer_dims.front()));
  }
  if (static_cast<Eigen::Index>(labels.size()) != rows) throw std::invalid_argument("label count mismatch");
  const auto classes = model.layer_dims.back();
  for (int y : labels) {
    if (y < 0 || y >= classes) throw std::invalid_argument("label out of range");
  }
}

// Activations a_0..a_L; a_L holds logits.
template <typename Scalar, typename Derived>
std::vector<RowMatrix<Scalar>> forward_all(const Mlp<Scalar>& model, const Eigen::MatrixBase<Derived>& x) {
  std::vector<RowMatrix<Scalar>> acts;
  acts.reserve(model.layer_count() + 1);
  acts.emplace_back(x.template cast<Scalar>());
  for (std::size_t i = 0; i < model.layer_count(); ++i) {
    RowMatrix<Scalar> z = acts.back() * model.weights[i].transpose();
    z.rowwise() += model.biases[i].transpose();
    if (i + 1 < model.layer_count()) z = z.cwiseMax(Scalar(0));
    acts.push_back(std::move(z));
  }
  return acts;
}

}  // namespace detail

template <typename Scalar, typename Derived>
RowMatrix<Scalar> forward_logits(const Mlp<Scalar>& model, const Eigen::MatrixBase<Derived>& x) {
  return std::move(detail::forward_all(model, x).back());
}

// Mean softmax cross-entropy.
template <typename Scalar, typename Derived>
Scalar loss(const Mlp<Scalar>& model, const Eigen::MatrixBase<Derived>& x, std::span<const int> labels) {
  detail::check_inputs(model, x.rows(), x.cols(), labels);
  const RowMatrix<Scalar> logits = forward_logits(model, x);
  Scalar total(0);
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const Scalar m = logits.row(r).maxCoeff();
    const Scalar lse = m + std::log((logits.row(r).array() - m).exp().sum());
    total += lse - logits(r, labels[static_cast<std::size_t>(r)]);
  }
  return total / static_cast<Scalar>(logits.rows());
}

/// Gradient of loss() with respect to the flat parameter vector.
template <typename Scalar, typename Derived>
Vector<Scalar> gradient(const Mlp<Scalar>& model, const Eigen::MatrixBase<Derived>& x, std::span<const int> labels) {
  detail::check_inputs(model, x.rows(), x.cols(), labels);
  const auto acts = detail::forward_all(model, x);
  const Eigen::Index batch = x.rows();

  RowMatrix<Scalar> delta = softmax_rows(acts.back());
  for (Eigen::Index r = 0; r < batch; ++r) delta(r, labels[static_cast<std::size_t>(r)]) -= Scalar(1);
  delta /= static_cast<Scalar>(batch);

  std::vector<RowMatrix<Scalar>> grad_w(model.layer_count());
  std::vector<Vector<Scalar>> grad_b(model.layer_count());
  for (std::size_t i = model.layer_count(); i-- > 0;) {
    grad_w[i] = delta.transpose() * acts[i];
    grad_b[i] = delta.colwise().sum().transpose();
    if (i > 0) {
      RowMatrix<Scalar> back = delta * model.weights[i];
      delta = back.array() * (acts[i].array() > Scalar(0)).template cast<Scalar>();
    }
  }

  Vector<Scalar> flat(static_cast<Eigen::Index>(parameter_count(model)));
  Eigen::Index offset = 0;
  for (std::size_t i = 0; i < model.layer_count(); ++i) {
    flat.segment(offset, grad_w[i].size()) = Eigen::Map<const Vector<Scalar>>(grad_w[i].data(), grad_w[i].size());
    offset += grad_w[i].size();
    flat.segment(offset, grad_b[i].size()) = grad_b[i];
    offset += grad_b[i].size();
  }
  return flat;
}

/// Mini-batch SGD with classical momentum:
///   v <- momentum * v - lr * grad;  theta <- theta + v
/// Batch order is a seeded shuffle per epoch; the last batch may be short.
template <typename Scalar, typename Derived>
void train_epochs(Mlp<Scalar>& model, const Eigen::MatrixBase<Derived>& x, std::span<const int> labels,
                  const TrainConfig& cfg) {
  cfg.validate();
  detail::check_inputs(model, x.rows(), x.cols(), labels);
  const auto n = static_cast<std::size_t>(x.rows());
  const auto count = static_cast<Eigen::Index>(parameter_count(model));
  if (model.velocity.size() != count) model.velocity = Vector<Scalar>::Zero(count);

  Vector<Scalar> theta = get_flat_params(model);
  std::vector<std::size_t> order(n);
  RowMatrix<Scalar> batch_x;
  std::vector<int> batch_y;
  for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(cfg.rng_seed, {static_cast<std::uint64_t>(epoch)});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      batch_x.resize(static_cast<Eigen::Index>(stop - start), x.cols());
      batch_y.resize(stop - start);
      for (std::size_t k = start; k < stop; ++k) {
        batch_x.row(static_cast<Eigen::Index>(k - start)) = x.row(static_cast<Eigen::Index>(order[k])).template cast<Scalar>();
        batch_y[k - start] = labels[order[k]];
      }
      const Vector<Scalar> g = gradient(model, batch_x, batch_y);
      model.velocity = static_cast<Scalar>(cfg.momentum) * model.velocity - static_cast<Scalar>(cfg.learning_rate) * g;
      theta += model.velocity;
      set_flat_params(model, theta);
    }
  }
}

template <typename Scalar>
void train_epochs(Mlp<Scalar>& model, const data::Dataset& shard, const TrainConfig& cfg) {
  if (shard.size() == 0) throw std::invalid_argument("cannot train on an empty shard");
  train_epochs(model, shard.features, shard.labels, cfg);
}

/// Accuracy, precision, recall and F1 from a confusion matrix.
///
/// Two classes: positive-class (label 1) metrics. More classes: unweighted
/// means of the per-class values, with macro-F1 the mean of per-class F1.
/// A class whose denominator is zero contributes 0.
inline EvalReport report_from_confusion(const Eigen::MatrixXi& confusion) {
  if (confusion.rows() != confusion.cols() || confusion.rows() == 0) {
    throw std::invalid_argument("confusion matrix must be square and non-empty");
  }
  const long total = confusion.cast<long>().sum();
  if (total == 0) throw std::invalid_argument("empty evaluation set");
  const Eigen::Index k = confusion.rows();

  EvalReport rep;
  rep.confusion = confusion;
  rep.accuracy = static_cast<double>(confusion.trace()) / static_cast<double>(total);

  auto per_class = [&](Eigen::Index c, double& p, double& r, double& f) {
    const double tp = confusion(c, c);
    const double predicted = confusion.col(c).sum();
    const double actual = confusion.row(c).sum();
    p = predicted > 0 ? tp / predicted : 0.0;
    r = actual > 0 ? tp / actual : 0.0;
    f = (p + r) > 0 ? 2 * p * r / (p + r) : 0.0;
  };

  if (k == 2) {
    rep.averaging = Averaging::kBinaryPositive;
    per_class(1, rep.precision, rep.recall, rep.f1);
    return rep;
  }
  rep.averaging = Averaging::kMacro;
  for (Eigen::Index c = 0; c < k; ++c) {
    double p, r, f;
    per_class(c, p, r, f);
    rep.precision += p;
    rep.recall += r;
    rep.f1 += f;
  }
  rep.precision /= static_cast<double>(k);
  rep.recall /= static_cast<double>(k);
  rep.f1 /= static_cast<double>(k);
  return rep;
}

inline EvalReport report_from_predictions(std::span<const int> truth, std::span<const int> predicted, int class_count) {
  if (truth.size() != predicted.size()) throw std::invalid_argument("prediction count mismatch");
  if (truth.empty()) throw std::invalid_argument("empty evaluation set");
  Eigen::MatrixXi confusion = Eigen::MatrixXi::Zero(class_count, class_count);
  for (std::size_t i = 0; i < truth.size(); ++i) confusion(truth[i], predicted[i]) += 1;
  return report_from_confusion(confusion);
}

template <typename Scalar, typename Derived>
std::vector<int> predict(const Mlp<Scalar>& model, const Eigen::MatrixBase<Derived>& x) {
  const RowMatrix<Scalar> logits = forward_logits(model, x);
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index arg;
    logits.row(r).maxCoeff(&arg);
    out[static_cast<std::size_t>(r)] = static_cast<int>(arg);
  }
  return out;
}

template <typename Scalar, typename Derived>
EvalReport evaluate(const Mlp<Scalar>& model, const Eigen::MatrixBase<Derived>& x, std::span<const int> labels) {
  detail::check_inputs(model, x.rows(), x.cols(), labels);
  const std::vector<int> pred = predict(model, x);
  return report_from_predictions(labels, pred, static_cast<int>(model.layer_dims.back()));
}

template <typename Scalar>
EvalReport evaluate(const Mlp<Scalar>& model, const data::Dataset& ds) {
  return evaluate(model, ds.features, ds.labels);
}

}  // namespace dyhfl::nn

#endif  // DYHFL_MLP_HPP_

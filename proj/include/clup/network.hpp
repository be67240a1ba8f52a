// SPDX-License-Identifier: Apache-2.0
//
// Copyright 2026 The clup Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Feed-forward networks with hand-written backpropagation.
//
// All types are templated on the storage scalar. Arithmetic runs in
// accum_t<Scalar> (at least double) and results are rounded back to Scalar
// only when stored, so float models train reproducibly and double models
// can be checked against finite differences.

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "clup/common.hpp"
#include "clup/features.hpp"
#include "clup/model_file.hpp"

namespace clup {

/// Affine layers with ReLU between them; the last layer is linear.
/// weights[l] has shape dims[l+1] x dims[l].
template <typename Scalar>
struct Mlp {
  std::vector<Matrix<Scalar>> weights;
  std::vector<Vector<Scalar>> biases;

  Index num_layers() const { return static_cast<Index>(weights.size()); }
  Index input_dim() const { return weights.front().cols(); }
  Index output_dim() const { return weights.back().rows(); }

  std::vector<Index> dims() const {
    std::vector<Index> d{input_dim()};
    for (const auto& w : weights) d.push_back(w.rows());
    return d;
  }

  template <typename Other>
  Mlp<Other> cast() const {
    Mlp<Other> out;
    for (const auto& w : weights) out.weights.push_back(w.template cast<Other>());
    for (const auto& b : biases) out.biases.push_back(b.template cast<Other>());
    return out;
  }

  bool operator==(const Mlp&) const = default;
};

/// Linear classifier producing N logits from Z features.
template <typename Scalar>
struct SoftmaxHead {
  Matrix<Scalar> weight;  // N x Z
  Vector<Scalar> bias;    // N

  Index num_classes() const { return weight.rows(); }
  Index input_dim() const { return weight.cols(); }

  template <typename Other>
  SoftmaxHead<Other> cast() const {
    return {weight.template cast<Other>(), bias.template cast<Other>()};
  }

  bool operator==(const SoftmaxHead&) const = default;
};

/// Uniform in [-a, a], a = sqrt(6 / (fan_in + fan_out)); biases zero.
template <typename Scalar>
Matrix<Scalar> glorot_uniform(Index rows, Index cols, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> u(-a, a);
  Matrix<Scalar> w(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) w(i, j) = static_cast<Scalar>(u(rng));
  return w;
}

template <typename Scalar>
Mlp<Scalar> make_mlp(std::span<const Index> dims, std::uint64_t seed) {
  if (dims.size() < 2) throw ShapeError("an MLP needs at least an input and an output dimension");
  for (auto d : dims) {
    if (d < 1) throw ShapeError("MLP layer dimensions must be >= 1");
  }
  std::mt19937_64 rng(seed);
  Mlp<Scalar> net;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    net.weights.push_back(glorot_uniform<Scalar>(dims[l + 1], dims[l], rng));
    net.biases.push_back(Vector<Scalar>::Zero(dims[l + 1]));
  }
  return net;
}

template <typename Scalar>
SoftmaxHead<Scalar> make_head(Index num_classes, Index feature_dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return {glorot_uniform<Scalar>(num_classes, feature_dim, rng), Vector<Scalar>::Zero(num_classes)};
}

/// Post-activation outputs of every layer; activations[0] is the input.
template <typename Acc>
struct ForwardTrace {
  std::vector<Matrix<Acc>> activations;
  const Matrix<Acc>& output() const { return activations.back(); }
};

template <typename Scalar, typename Derived>
ForwardTrace<accum_t<Scalar>> forward_trace(const Mlp<Scalar>& net, const Eigen::MatrixBase<Derived>& batch) {
  using Acc = accum_t<Scalar>;
  if (batch.cols() != net.input_dim()) {
    throw ShapeError("forward: batch has " + std::to_string(batch.cols()) + " columns but the network expects " +
                     std::to_string(net.input_dim()));
  }
  ForwardTrace<Acc> trace;
  trace.activations.reserve(net.weights.size() + 1);
  trace.activations.push_back(batch.template cast<Acc>());
  for (Index l = 0; l < net.num_layers(); ++l) {
    Matrix<Acc> next = trace.activations.back() * net.weights[l].template cast<Acc>().transpose();
    next.rowwise() += net.biases[l].template cast<Acc>().transpose();
    if (l + 1 < net.num_layers()) next = next.cwiseMax(Acc(0));
    trace.activations.push_back(std::move(next));
  }
  return trace;
}

/// B x Z output of the network.
template <typename Scalar, typename Derived>
Matrix<Scalar> forward(const Mlp<Scalar>& net, const Eigen::MatrixBase<Derived>& batch) {
  Matrix<Scalar> out = forward_trace(net, batch).output().template cast<Scalar>();
  if (!out.allFinite()) throw NumericError("forward: non-finite network output");
  return out;
}

/// Row-wise softmax with max subtraction.
template <typename Derived>
Matrix<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& logits) {
  using S = typename Derived::Scalar;
  Matrix<S> p = logits;
  for (Index i = 0; i < p.rows(); ++i) {
    p.row(i).array() -= p.row(i).maxCoeff();
    p.row(i) = p.row(i).array().exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

template <typename Acc>
struct Classification {
  Matrix<Acc> logits;
  Matrix<Acc> probs;
};

template <typename Scalar, typename Derived>
Classification<accum_t<Scalar>> classify(const SoftmaxHead<Scalar>& head, const Eigen::MatrixBase<Derived>& z) {
  using Acc = accum_t<Scalar>;
  if (z.cols() != head.input_dim()) {
    throw ShapeError("classify: features have " + std::to_string(z.cols()) + " columns but the head expects " +
                     std::to_string(head.input_dim()));
  }
  Classification<Acc> out;
  out.logits = z.template cast<Acc>() * head.weight.template cast<Acc>().transpose();
  out.logits.rowwise() += head.bias.template cast<Acc>().transpose();
  out.probs = softmax_rows(out.logits);
  return out;
}

inline constexpr double kProbabilityFloor = 1e-12;

struct LossReport {
  double value = 0.0;
  /// Number of target probabilities that were clamped to kProbabilityFloor.
  std::size_t clamped = 0;
};

/// Mean over rows of -log probs(i, targets[i]).
template <typename Derived>
LossReport cross_entropy(const Eigen::MatrixBase<Derived>& probs, std::span<const std::uint32_t> targets) {
  if (static_cast<Index>(targets.size()) != probs.rows()) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(probs.rows()) + " rows");
  }
  LossReport report;
  double sum = 0.0;
  for (Index i = 0; i < probs.rows(); ++i) {
    const auto t = targets[static_cast<std::size_t>(i)];
    if (t >= probs.cols()) throw RangeError("cross_entropy: target class out of range");
    double p = static_cast<double>(probs(i, t));
    if (p < kProbabilityFloor) {
      p = kProbabilityFloor;
      ++report.clamped;
    }
    sum -= std::log(p);
  }
  report.value = sum / static_cast<double>(probs.rows());
  return report;
}

/// Gradient buffers shaped like an Mlp, in the accumulation type.
template <typename Acc>
struct MlpGradients {
  std::vector<Matrix<Acc>> weights;
  std::vector<Vector<Acc>> biases;
};

template <typename Acc>
struct HeadGradients {
  Matrix<Acc> weight;
  Vector<Acc> bias;
};

/// Backpropagates d(loss)/d(output) through the network. When `input_grad`
/// is non-null it receives d(loss)/d(input).
template <typename Scalar>
MlpGradients<accum_t<Scalar>> mlp_backward(const Mlp<Scalar>& net, const ForwardTrace<accum_t<Scalar>>& trace,
                                           Matrix<accum_t<Scalar>> grad_out,
                                           Matrix<accum_t<Scalar>>* input_grad = nullptr) {
  using Acc = accum_t<Scalar>;
  const Index layers = net.num_layers();
  MlpGradients<Acc> g;
  g.weights.resize(static_cast<std::size_t>(layers));
  g.biases.resize(static_cast<std::size_t>(layers));
  for (Index l = layers - 1; l >= 0; --l) {
    if (l + 1 < layers) {
      grad_out.array() *= (trace.activations[l + 1].array() > Acc(0)).template cast<Acc>();
    }
    g.weights[l] = grad_out.transpose() * trace.activations[l];
    g.biases[l] = grad_out.colwise().sum().transpose();
    if (!g.weights[l].allFinite() || !g.biases[l].allFinite()) {
      throw NumericError("non-finite gradient in layer " + std::to_string(l));
    }
    if (l > 0 || input_grad) grad_out = grad_out * net.weights[l].template cast<Acc>();
  }
  if (input_grad) *input_grad = std::move(grad_out);
  return g;
}

template <typename Acc>
struct ClassifierGradients {
  LossReport loss;
  MlpGradients<Acc> net;
  HeadGradients<Acc> head;
};

/// Loss and gradients of the mean cross-entropy of head(net(batch)).
template <typename Scalar, typename Derived>
ClassifierGradients<accum_t<Scalar>> classifier_gradients(const Mlp<Scalar>& net, const SoftmaxHead<Scalar>& head,
                                                          const Eigen::MatrixBase<Derived>& batch,
                                                          std::span<const std::uint32_t> targets,
                                                          bool need_net = true) {
  using Acc = accum_t<Scalar>;
  const auto trace = forward_trace(net, batch);
  const auto cls = classify(head, trace.output());
  ClassifierGradients<Acc> out;
  out.loss = cross_entropy(cls.probs, targets);

  const Acc inv_b = Acc(1) / static_cast<Acc>(batch.rows());
  Matrix<Acc> dlogits = cls.probs;
  for (Index i = 0; i < dlogits.rows(); ++i) dlogits(i, targets[static_cast<std::size_t>(i)]) -= Acc(1);
  dlogits *= inv_b;

  out.head.weight = dlogits.transpose() * trace.output();
  out.head.bias = dlogits.colwise().sum().transpose();
  if (!out.head.weight.allFinite() || !out.head.bias.allFinite()) {
    throw NumericError("non-finite gradient in layer " + std::to_string(net.num_layers()) + " (classifier head)");
  }
  if (need_net) out.net = mlp_backward(net, trace, Matrix<Acc>(dlogits * head.weight.template cast<Acc>()));
  return out;
}

/// v <- momentum * v + grad;  param <- param - lr * v.
template <typename ParamDerived, typename Acc>
void momentum_update(Eigen::MatrixBase<ParamDerived>& param, Matrix<Acc>& velocity, const Matrix<Acc>& grad, double lr,
                     double momentum) {
  using S = typename ParamDerived::Scalar;
  if (velocity.size() == 0) velocity = Matrix<Acc>::Zero(grad.rows(), grad.cols());
  velocity = Acc(momentum) * velocity + grad;
  param = (param.template cast<Acc>() - Acc(lr) * velocity).template cast<S>();
}

/// Velocity buffers for momentum SGD, allocated lazily on first use.
template <typename Acc>
struct MomentumState {
  std::vector<Matrix<Acc>> weights;
  std::vector<Matrix<Acc>> biases;
  Matrix<Acc> head_weight;
  Matrix<Acc> head_bias;
  Matrix<Acc> extra;  // prototype bank during self-supervised training
};

template <typename Scalar, typename Acc>
void apply_mlp_update(Mlp<Scalar>& net, MomentumState<Acc>& state, const MlpGradients<Acc>& grads, double lr,
                      double momentum) {
  state.weights.resize(net.weights.size());
  state.biases.resize(net.biases.size());
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    momentum_update(net.weights[l], state.weights[l], grads.weights[l], lr, momentum);
    Matrix<Acc> gb = grads.biases[l];
    momentum_update(net.biases[l], state.biases[l], gb, lr, momentum);
  }
}

/// One momentum-SGD step on the mean cross-entropy of one batch. Returns the
/// loss evaluated before the update. With `freeze_extractor` only the head moves.
template <typename Scalar, typename Derived>
LossReport backward_step(Mlp<Scalar>& net, SoftmaxHead<Scalar>& head, MomentumState<accum_t<Scalar>>& state,
                         const Eigen::MatrixBase<Derived>& batch, std::span<const std::uint32_t> targets, double lr,
                         double momentum, bool freeze_extractor = false) {
  using Acc = accum_t<Scalar>;
  auto grads = classifier_gradients(net, head, batch, targets, !freeze_extractor);
  if (!freeze_extractor) apply_mlp_update(net, state, grads.net, lr, momentum);
  momentum_update(head.weight, state.head_weight, grads.head.weight, lr, momentum);
  Matrix<Acc> gb = grads.head.bias;
  momentum_update(head.bias, state.head_bias, gb, lr, momentum);
  return grads.loss;
}

/// lr_min + (lr0 - lr_min) * (1 + cos(pi * step / total)) / 2.
inline double cosine_lr(std::size_t step, std::size_t total, double lr0, double lr_min) {
  if (total < 1) throw RangeError("cosine_lr: total steps must be >= 1");
  if (step > total) {
    throw RangeError("cosine_lr: step " + std::to_string(step) + " exceeds total " + std::to_string(total));
  }
  const double t = static_cast<double>(step) / static_cast<double>(total);
  return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + std::cos(std::numbers::pi * t));
}

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double lr0 = 0.05;
  double lr_min = 0.0;
  double momentum = 0.9;
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(lr0 >= 0.0) || !(lr_min >= 0.0)) throw ConfigError("learning rates must be >= 0");
    if (lr0 > 0.0 ? !(lr0 > lr_min) : lr_min != 0.0) throw ConfigError("lr0 must exceed lr_min");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
  }
};

/// Fisher-Yates with an explicit engine, so the order does not depend on the
/// standard library's std::shuffle.
inline std::vector<std::uint32_t> shuffled_indices(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::uint32_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<std::uint32_t>(i);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

/// Per-epoch mean batch loss.
using LossLog = std::vector<double>;

/// Supervised training of head(net(x)) with momentum SGD and a cosine
/// schedule over all steps. Deterministic given cfg.seed; lr0 == 0 leaves
/// the parameters untouched.
template <typename Scalar>
LossLog train_classifier(Mlp<Scalar>& net, SoftmaxHead<Scalar>& head, const FeatureSet& data, const TrainConfig& cfg,
                         bool freeze_extractor = false) {
  using Acc = accum_t<Scalar>;
  cfg.validate();
  if (data.rows() < 1) throw Error("train_classifier: empty dataset");
  if (!data.labels) throw Error("train_classifier: dataset has no labels");
  if (data.cols() != net.input_dim()) {
    throw ShapeError("train_classifier: data has " + std::to_string(data.cols()) + " columns, network expects " +
                     std::to_string(net.input_dim()));
  }
  for (auto l : *data.labels) {
    if (l >= head.num_classes()) throw RangeError("train_classifier: label exceeds head class count");
  }

  const std::size_t m = static_cast<std::size_t>(data.rows());
  const std::size_t batch = std::min(cfg.batch_size, m);
  const std::size_t steps_per_epoch = (m + batch - 1) / batch;
  const std::size_t total = cfg.epochs * steps_per_epoch;

  std::mt19937_64 rng(cfg.seed);
  MomentumState<Acc> state;
  LossLog log;
  Matrix<Scalar> xb;
  std::vector<std::uint32_t> yb;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = shuffled_indices(m, rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < m; start += batch) {
      const std::size_t len = std::min(batch, m - start);
      xb.resize(static_cast<Index>(len), data.cols());
      yb.resize(len);
      for (std::size_t i = 0; i < len; ++i) {
        xb.row(static_cast<Index>(i)) = data.data.row(order[start + i]).template cast<Scalar>();
        yb[i] = (*data.labels)[order[start + i]];
      }
      const double lr = cosine_lr(step, total, cfg.lr0, cfg.lr_min);
      epoch_loss += backward_step(net, head, state, xb, yb, lr, cfg.momentum, freeze_extractor).value;
      ++step;
    }
    log.push_back(epoch_loss / static_cast<double>(steps_per_epoch));
  }
  return log;
}

/// Index of the largest entry in each row; ties go to the lowest index.
template <typename Derived>
Labels argmax_rows(const Eigen::MatrixBase<Derived>& m) {
  Labels out(static_cast<std::size_t>(m.rows()));
  for (Index i = 0; i < m.rows(); ++i) {
    Index best = 0;
    for (Index j = 1; j < m.cols(); ++j) {
      if (m(i, j) > m(i, best)) best = j;
    }
    out[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(best);
  }
  return out;
}

template <typename Scalar, typename Derived>
Labels predict(const Mlp<Scalar>& net, const SoftmaxHead<Scalar>& head, const Eigen::MatrixBase<Derived>& x) {
  return argmax_rows(classify(head, forward_trace(net, x).output()).probs);
}

/// Extractor plus optional head, in single precision.
struct Classifier {
  Mlp<float> extractor;
  SoftmaxHead<float> head;
};

ModelFile pack_classifier(const Classifier& model);
Classifier unpack_classifier(const ModelFile& file);

}  // namespace clup

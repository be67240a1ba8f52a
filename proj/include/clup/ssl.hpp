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

// Self-supervised pretraining by swapped prototype assignment.
//
// Each batch is augmented into several views. Every view is scored against a
// bank of unit-norm prototypes; Sinkhorn-Knopp turns the scores into balanced
// soft codes. The extractor and prototypes are trained so that each view
// predicts the codes of the other views. Codes are constants for the
// gradient.

#pragma once

#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include "clup/clustering.hpp"
#include "clup/common.hpp"
#include "clup/features.hpp"
#include "clup/network.hpp"

namespace clup {

template <typename Scalar>
struct PrototypeBank {
  Matrix<Scalar> prototypes;  // N^P x Z, unit rows

  Index size() const { return prototypes.rows(); }
  Index dim() const { return prototypes.cols(); }

  void normalize() {
    for (Index i = 0; i < prototypes.rows(); ++i) {
      Vector<accum_t<Scalar>> row = prototypes.row(i).transpose().template cast<accum_t<Scalar>>();
      const auto n = row.norm();
      if (!(n > 0)) throw NumericError("prototype " + std::to_string(i) + " has zero norm");
      prototypes.row(i) = (row / n).transpose().template cast<Scalar>();
    }
  }

  bool operator==(const PrototypeBank&) const = default;
};

template <typename Scalar>
PrototypeBank<Scalar> make_bank(Index count, Index dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  PrototypeBank<Scalar> bank;
  bank.prototypes.resize(count, dim);
  for (Index j = 0; j < dim; ++j)
    for (Index i = 0; i < count; ++i) bank.prototypes(i, j) = static_cast<Scalar>(normal(rng));
  bank.normalize();
  return bank;
}

struct AugmentationSpec {
  std::size_t num_views = 2;
  double noise_sigma = 0.1;
  double dropout_prob = 0.1;
  double scale_lo = 0.8;
  double scale_hi = 1.2;

  void validate() const {
    if (num_views < 2) throw ConfigError("augmentation needs at least 2 views");
    if (!(noise_sigma >= 0.0)) throw ConfigError("augmentation noise_sigma must be >= 0");
    if (!(dropout_prob >= 0.0 && dropout_prob < 1.0)) throw ConfigError("dropout_prob must lie in [0, 1)");
    if (!(scale_lo > 0.0 && scale_lo <= scale_hi)) throw ConfigError("scale range needs 0 < lo <= hi");
  }
};

/// view = (x * keep_mask) * scale + noise, with one scale per sample and an
/// independent random stream per view. Deterministic given seed.
template <typename Derived>
std::vector<Matrix<typename Derived::Scalar>> make_views(const Eigen::MatrixBase<Derived>& x,
                                                         const AugmentationSpec& spec, std::uint64_t seed) {
  using Scalar = typename Derived::Scalar;
  using Acc = accum_t<Scalar>;
  spec.validate();
  std::vector<Matrix<Scalar>> views;
  views.reserve(spec.num_views);
  for (std::size_t v = 0; v < spec.num_views; ++v) {
    std::mt19937_64 rng(mix_seed(seed, v));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix<Scalar> out(x.rows(), x.cols());
    for (Index i = 0; i < x.rows(); ++i) {
      const double scale =
          spec.scale_hi > spec.scale_lo ? spec.scale_lo + (spec.scale_hi - spec.scale_lo) * unit(rng) : spec.scale_lo;
      for (Index j = 0; j < x.cols(); ++j) {
        const bool keep = spec.dropout_prob == 0.0 || unit(rng) >= spec.dropout_prob;
        Acc value = keep ? static_cast<Acc>(x(i, j)) * static_cast<Acc>(scale) : Acc(0);
        if (spec.noise_sigma > 0.0) value += static_cast<Acc>(spec.noise_sigma * normal(rng));
        out(i, j) = static_cast<Scalar>(value);
      }
    }
    views.push_back(std::move(out));
  }
  return views;
}

/// Unit-normalised features and their norms. Throws on a zero row.
template <typename Derived>
std::pair<Matrix<double>, Vector<double>> normalize_features(const Eigen::MatrixBase<Derived>& z) {
  Matrix<double> zn = z.template cast<double>();
  Vector<double> norms(zn.rows());
  for (Index i = 0; i < zn.rows(); ++i) {
    norms(i) = zn.row(i).norm();
    if (!(norms(i) > 0.0)) throw NumericError("feature row " + std::to_string(i) + " has zero norm");
    zn.row(i) /= norms(i);
  }
  return {std::move(zn), std::move(norms)};
}

/// softmax(normalize(z) * P^T / temperature), row-wise.
template <typename Derived, typename Scalar>
Matrix<double> prototype_probs(const Eigen::MatrixBase<Derived>& z, const PrototypeBank<Scalar>& bank,
                               double temperature) {
  if (!(temperature > 0.0)) throw RangeError("temperature must be > 0");
  if (z.cols() != bank.dim()) {
    throw ShapeError("prototype_probs: features have " + std::to_string(z.cols()) + " columns, prototypes " +
                     std::to_string(bank.dim()));
  }
  const auto [zn, norms] = normalize_features(z);
  return softmax_rows((zn * bank.prototypes.template cast<double>().transpose()) / temperature);
}

/// Mean over rows of -sum_n q(i,n) log p(i,n).
inline LossReport code_loss(const Matrix<double>& p, const Matrix<double>& q) {
  if (p.rows() != q.rows() || p.cols() != q.cols()) {
    throw ShapeError("code_loss: p is " + shape_string(p.rows(), p.cols()) + ", q is " +
                     shape_string(q.rows(), q.cols()));
  }
  LossReport report;
  double sum = 0.0;
  for (Index i = 0; i < p.rows(); ++i) {
    for (Index n = 0; n < p.cols(); ++n) {
      if (q(i, n) == 0.0) continue;
      double pv = p(i, n);
      if (pv < kProbabilityFloor) {
        pv = kProbabilityFloor;
        ++report.clamped;
      }
      sum -= q(i, n) * std::log(pv);
    }
  }
  report.value = sum / static_cast<double>(p.rows());
  return report;
}

/// Mean over unordered view pairs (j, k) of code_loss(p_j, q_k) + code_loss(p_k, q_j).
inline double swapped_loss(const std::vector<std::pair<Matrix<double>, Matrix<double>>>& views_pq) {
  if (views_pq.size() < 2) throw RangeError("swapped_loss needs at least 2 views");
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t j = 0; j < views_pq.size(); ++j) {
    for (std::size_t k = j + 1; k < views_pq.size(); ++k) {
      total += code_loss(views_pq[j].first, views_pq[k].second).value +
               code_loss(views_pq[k].first, views_pq[j].second).value;
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

template <typename Acc>
struct SwappedGradients {
  double loss = 0.0;
  MlpGradients<Acc> net;
  Matrix<Acc> prototypes;
};

/// Forward pass of every view: features, probabilities and (detached) codes.
template <typename Scalar>
struct ViewPass {
  ForwardTrace<accum_t<Scalar>> trace;
  Matrix<double> normalized;
  Vector<double> norms;
  Matrix<double> probs;
};

template <typename Scalar>
ViewPass<Scalar> view_pass(const Mlp<Scalar>& net, const PrototypeBank<Scalar>& bank, const Matrix<Scalar>& view,
                           double temperature) {
  ViewPass<Scalar> pass;
  pass.trace = forward_trace(net, view);
  std::tie(pass.normalized, pass.norms) = normalize_features(pass.trace.output());
  pass.probs = softmax_rows((pass.normalized * bank.prototypes.template cast<double>().transpose()) / temperature);
  return pass;
}

/// Codes for each view from the current parameters.
template <typename Scalar>
std::vector<Matrix<double>> view_codes(const Mlp<Scalar>& net, const PrototypeBank<Scalar>& bank,
                                       const std::vector<Matrix<Scalar>>& views, const SinkhornConfig& sinkhorn) {
  std::vector<Matrix<double>> codes;
  for (const auto& v : views) {
    const auto [zn, norms] = normalize_features(forward_trace(net, v).output());
    codes.push_back(sinkhorn_codes(zn * bank.prototypes.template cast<double>().transpose(), sinkhorn));
  }
  return codes;
}

/// Swapped loss for fixed codes, and its gradient with respect to the
/// extractor and prototype parameters.
template <typename Scalar>
SwappedGradients<accum_t<Scalar>> swapped_loss_gradients(const Mlp<Scalar>& net, const PrototypeBank<Scalar>& bank,
                                                         const std::vector<Matrix<Scalar>>& views,
                                                         const std::vector<Matrix<double>>& codes, double temperature) {
  using Acc = accum_t<Scalar>;
  const std::size_t nv = views.size();
  if (nv < 2 || codes.size() != nv) throw RangeError("swapped loss needs >= 2 views with one code matrix each");

  std::vector<ViewPass<Scalar>> passes;
  std::vector<std::pair<Matrix<double>, Matrix<double>>> pq;
  for (std::size_t v = 0; v < nv; ++v) {
    passes.push_back(view_pass(net, bank, views[v], temperature));
    pq.emplace_back(passes.back().probs, codes[v]);
  }

  SwappedGradients<Acc> g;
  g.loss = swapped_loss(pq);
  const double pairs = static_cast<double>(nv * (nv - 1) / 2);
  const double b = static_cast<double>(views.front().rows());
  const Matrix<double> protos = bank.prototypes.template cast<double>();
  Matrix<double> grad_protos = Matrix<double>::Zero(protos.rows(), protos.cols());

  for (std::size_t j = 0; j < nv; ++j) {
    const auto& pass = passes[j];
    // d/d(scores): sum over partner views k of (p_j * rowsum(q_k) - q_k).
    Matrix<double> dscore = Matrix<double>::Zero(pass.probs.rows(), pass.probs.cols());
    for (std::size_t k = 0; k < nv; ++k) {
      if (k == j) continue;
      const Vector<double> mass = codes[k].rowwise().sum();
      dscore += (pass.probs.array().colwise() * mass.array()).matrix() - codes[k];
    }
    dscore /= pairs * b * temperature;

    grad_protos += dscore.transpose() * pass.normalized;
    const Matrix<double> dzn = dscore * protos;
    // Through z / |z|: (dzn - zn * <zn, dzn>) / |z|.
    const Vector<double> radial = (dzn.array() * pass.normalized.array()).rowwise().sum();
    Matrix<double> dz = dzn - (pass.normalized.array().colwise() * radial.array()).matrix();
    dz.array().colwise() /= pass.norms.array();

    auto layer_grads = mlp_backward(net, pass.trace, Matrix<Acc>(dz.template cast<Acc>()));
    if (j == 0) {
      g.net = std::move(layer_grads);
    } else {
      for (std::size_t l = 0; l < g.net.weights.size(); ++l) {
        g.net.weights[l] += layer_grads.weights[l];
        g.net.biases[l] += layer_grads.biases[l];
      }
    }
  }
  if (!grad_protos.allFinite()) throw NumericError("non-finite gradient in prototype bank");
  g.prototypes = grad_protos.template cast<Acc>();
  return g;
}

struct SslConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double temperature = 0.1;
  SinkhornConfig sinkhorn{};
  AugmentationSpec augment{};
  double lr0 = 0.05;
  double lr_min = 0.0;
  double momentum = 0.9;
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs < 1) throw ConfigError("ssl epochs must be >= 1");
    if (batch_size < 2) throw ConfigError("ssl batch_size must be >= 2");
    if (!(temperature > 0.0)) throw ConfigError("ssl temperature must be > 0");
    if (!(lr0 >= 0.0) || !(lr_min >= 0.0)) throw ConfigError("ssl learning rates must be >= 0");
    if (lr0 > 0.0 ? !(lr0 > lr_min) : lr_min != 0.0) throw ConfigError("ssl lr0 must exceed lr_min");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("ssl momentum must lie in [0, 1)");
    sinkhorn.validate();
    augment.validate();
  }
};

/// Trains extractor and prototypes in place. Returns the mean batch loss of
/// each epoch. Batches smaller than 2 samples are dropped.
template <typename Scalar>
LossLog ssl_train(Mlp<Scalar>& net, PrototypeBank<Scalar>& bank, const FeatureSet& target, const SslConfig& cfg) {
  using Acc = accum_t<Scalar>;
  cfg.validate();
  const std::size_t m = static_cast<std::size_t>(target.rows());
  if (cfg.batch_size > m) {
    throw ConfigError("ssl batch_size " + std::to_string(cfg.batch_size) + " exceeds sample count " +
                      std::to_string(m));
  }
  if (target.cols() != net.input_dim()) throw ShapeError("ssl_train: data width does not match the extractor");
  if (bank.dim() != net.output_dim()) throw ShapeError("ssl_train: prototype width does not match the extractor");

  std::size_t steps_per_epoch = m / cfg.batch_size + ((m % cfg.batch_size) >= 2 ? 1 : 0);
  const std::size_t total = cfg.epochs * steps_per_epoch;

  std::mt19937_64 rng(cfg.seed);
  MomentumState<Acc> state;
  LossLog log;
  Matrix<Scalar> xb;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = shuffled_indices(m, rng);
    double epoch_loss = 0.0;
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      const std::size_t start = s * cfg.batch_size;
      const std::size_t len = std::min(cfg.batch_size, m - start);
      xb.resize(static_cast<Index>(len), target.cols());
      for (std::size_t i = 0; i < len; ++i) {
        xb.row(static_cast<Index>(i)) = target.data.row(order[start + i]).template cast<Scalar>();
      }
      const auto views = make_views(xb, cfg.augment, mix_seed(cfg.seed, 1000 + step));
      const auto codes = view_codes(net, bank, views, cfg.sinkhorn);
      const auto g = swapped_loss_gradients(net, bank, views, codes, cfg.temperature);
      epoch_loss += g.loss;

      const double lr = cosine_lr(step, total, cfg.lr0, cfg.lr_min);
      if (lr > 0.0) {
        apply_mlp_update(net, state, g.net, lr, cfg.momentum);
        momentum_update(bank.prototypes, state.extra, g.prototypes, lr, cfg.momentum);
        bank.normalize();
      }
      ++step;
    }
    log.push_back(epoch_loss / static_cast<double>(steps_per_epoch));
  }
  return log;
}

/// Extractor layers followed by the bank as an extra layer (zero biases).
template <typename Scalar>
ModelFile pack_ssl(const Mlp<Scalar>& net, const PrototypeBank<Scalar>& bank) {
  ModelFile file;
  file.flags = kModelFlagPrototypes;
  for (Index l = 0; l < net.num_layers(); ++l) {
    file.layers.push_back({net.weights[l].template cast<float>(), net.biases[l].template cast<float>()});
  }
  file.layers.push_back({bank.prototypes.template cast<float>(), Vector<float>::Zero(bank.size())});
  return file;
}

inline std::pair<Mlp<float>, PrototypeBank<float>> unpack_ssl(const ModelFile& file) {
  if (!(file.flags & kModelFlagPrototypes) || (file.flags & (kModelFlagHead | kModelFlagCentroids)) ||
      file.layers.size() < 2) {
    throw FormatError("model file does not hold an extractor with a prototype bank");
  }
  Mlp<float> net;
  for (std::size_t l = 0; l + 1 < file.layers.size(); ++l) {
    net.weights.push_back(file.layers[l].weight);
    net.biases.push_back(file.layers[l].bias);
  }
  PrototypeBank<float> bank{file.layers.back().weight};
  if (bank.dim() != net.output_dim()) throw ShapeError("prototype width does not match extractor output");
  return {std::move(net), std::move(bank)};
}

}  // namespace clup

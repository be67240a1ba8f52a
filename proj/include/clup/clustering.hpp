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

// K-means over-clustering and Sinkhorn-Knopp code assignment.

#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "clup/common.hpp"
#include "clup/model_file.hpp"

namespace clup {

template <typename Scalar>
struct ClusterModel {
  Matrix<Scalar> centroids;  // K x Z
  Assignments assignments;   // one per fitted sample
  double inertia = 0.0;      // sum of squared distances to assigned centroids
  /// Inertia after every assignment step, the last entry equals `inertia`.
  std::vector<double> inertia_history;
  std::size_t iterations = 0;

  Index num_clusters() const { return centroids.rows(); }
};

struct KMeansOptions {
  std::size_t max_iter = 300;
  double tol = 1e-6;  // absolute centroid movement
  std::uint64_t seed = 0;
};

namespace detail {

template <typename A, typename B>
double squared_distance(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& c) {
  double d = 0.0;
  for (Index k = 0; k < x.size(); ++k) {
    const double diff = static_cast<double>(x(k)) - static_cast<double>(c(k));
    d += diff * diff;
  }
  return d;
}

/// Nearest centroid per row, strict '<' so ties keep the lowest index.
template <typename FDerived, typename CDerived>
double assign_nearest(const Eigen::MatrixBase<FDerived>& features, const Eigen::MatrixBase<CDerived>& centroids,
                      Assignments& out, std::vector<double>& distances) {
  const Index m = features.rows();
  out.resize(static_cast<std::size_t>(m));
  distances.resize(static_cast<std::size_t>(m));
  double total = 0.0;
  for (Index i = 0; i < m; ++i) {
    Index best = 0;
    double best_d = squared_distance(features.row(i), centroids.row(0));
    for (Index j = 1; j < centroids.rows(); ++j) {
      const double d = squared_distance(features.row(i), centroids.row(j));
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    out[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(best);
    distances[static_cast<std::size_t>(i)] = best_d;
    total += best_d;
  }
  return total;
}

}  // namespace detail

/// k-means++ seeding: first centre uniform, then D^2-weighted draws.
/// Duplicate-heavy data whose remaining weight is zero falls back to the
/// lowest-index point not yet chosen.
template <typename Derived>
Matrix<typename Derived::Scalar> kmeans_plus_plus(const Eigen::MatrixBase<Derived>& features, Index k,
                                                  std::mt19937_64& rng) {
  using Scalar = typename Derived::Scalar;
  const Index m = features.rows();
  Matrix<Scalar> centroids(k, features.cols());
  std::vector<char> chosen(static_cast<std::size_t>(m), 0);
  std::vector<double> d2(static_cast<std::size_t>(m), 0.0);

  const Index first = static_cast<Index>(rng() % static_cast<std::uint64_t>(m));
  centroids.row(0) = features.row(first);
  chosen[static_cast<std::size_t>(first)] = 1;
  for (Index i = 0; i < m; ++i) d2[static_cast<std::size_t>(i)] = detail::squared_distance(features.row(i), centroids.row(0));

  for (Index c = 1; c < k; ++c) {
    double total = 0.0;
    for (double d : d2) total += d;
    Index pick = -1;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      const double target = u(rng);
      double acc = 0.0;
      for (Index i = 0; i < m; ++i) {
        acc += d2[static_cast<std::size_t>(i)];
        if (d2[static_cast<std::size_t>(i)] > 0.0 && acc > target) {
          pick = i;
          break;
        }
      }
      if (pick < 0) {  // rounding at the tail of the cumulative sum
        for (Index i = m - 1; i >= 0; --i) {
          if (d2[static_cast<std::size_t>(i)] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      for (Index i = 0; i < m && pick < 0; ++i) {
        if (!chosen[static_cast<std::size_t>(i)]) pick = i;
      }
      if (pick < 0) pick = 0;
    }
    centroids.row(c) = features.row(pick);
    chosen[static_cast<std::size_t>(pick)] = 1;
    for (Index i = 0; i < m; ++i) {
      auto& d = d2[static_cast<std::size_t>(i)];
      d = std::min(d, detail::squared_distance(features.row(i), centroids.row(c)));
    }
  }
  return centroids;
}

/// Lloyd iterations from a k-means++ start. Empty clusters are re-seeded at
/// the point farthest from its centroid. The returned assignments are a fixed
/// point of kmeans_assign for the returned centroids.
template <typename Derived>
ClusterModel<typename Derived::Scalar> kmeans_fit(const Eigen::MatrixBase<Derived>& features, Index k,
                                                  const KMeansOptions& opt = {}) {
  using Scalar = typename Derived::Scalar;
  const Index m = features.rows();
  if (k < 1) throw RangeError("kmeans_fit: K must be >= 1");
  if (k > m) throw RangeError("kmeans_fit: K = " + std::to_string(k) + " exceeds sample count " + std::to_string(m));
  if (!features.allFinite()) throw NumericError("kmeans_fit: non-finite features");

  std::mt19937_64 rng(opt.seed);
  ClusterModel<Scalar> model;
  model.centroids = kmeans_plus_plus(features, k, rng);

  std::vector<double> dist;
  Matrix<double> sums(k, features.cols());
  std::vector<std::size_t> counts(static_cast<std::size_t>(k));
  for (std::size_t it = 0; it < opt.max_iter; ++it) {
    model.inertia_history.push_back(detail::assign_nearest(features, model.centroids, model.assignments, dist));
    ++model.iterations;

    sums.setZero();
    std::fill(counts.begin(), counts.end(), 0);
    for (Index i = 0; i < m; ++i) {
      const auto j = model.assignments[static_cast<std::size_t>(i)];
      sums.row(j) += features.row(i).template cast<double>();
      ++counts[j];
    }
    double movement = 0.0;
    for (Index j = 0; j < k; ++j) {
      Vector<double> next;
      if (counts[static_cast<std::size_t>(j)] > 0) {
        next = sums.row(j).transpose() / static_cast<double>(counts[static_cast<std::size_t>(j)]);
      } else {
        std::size_t far = 0;
        for (std::size_t i = 1; i < dist.size(); ++i) {
          if (dist[i] > dist[far]) far = i;
        }
        dist[far] = 0.0;
        next = features.row(static_cast<Index>(far)).transpose().template cast<double>();
      }
      const Vector<double> old = model.centroids.row(j).transpose().template cast<double>();
      movement = std::max(movement, (next - old).norm());
      model.centroids.row(j) = next.transpose().template cast<Scalar>();
    }
    if (movement < opt.tol) break;
  }
  model.inertia = detail::assign_nearest(features, model.centroids, model.assignments, dist);
  model.inertia_history.push_back(model.inertia);
  return model;
}

template <typename Scalar, typename Derived>
Assignments kmeans_assign(const ClusterModel<Scalar>& model, const Eigen::MatrixBase<Derived>& features) {
  if (features.cols() != model.centroids.cols()) {
    throw ShapeError("kmeans_assign: features have " + std::to_string(features.cols()) +
                     " columns, centroids have " + std::to_string(model.centroids.cols()));
  }
  Assignments out;
  std::vector<double> dist;
  detail::assign_nearest(features, model.centroids, out, dist);
  return out;
}

/// Rows scaled to unit L2 norm; zero rows are left as zero.
template <typename Derived>
Matrix<typename Derived::Scalar> l2_normalize_rows(const Eigen::MatrixBase<Derived>& x) {
  Matrix<typename Derived::Scalar> out = x;
  for (Index i = 0; i < out.rows(); ++i) {
    const auto n = out.row(i).norm();
    if (n > 0) out.row(i) /= n;
  }
  return out;
}

/// One-layer CMDL container: weights are the centroids, biases are zero.
template <typename Scalar>
ModelFile pack_centroids(const ClusterModel<Scalar>& model) {
  ModelFile file;
  file.flags = kModelFlagCentroids;
  file.layers.push_back({model.centroids.template cast<float>(), Vector<float>::Zero(model.centroids.rows())});
  return file;
}

inline ClusterModel<double> unpack_centroids(const ModelFile& file) {
  if (!(file.flags & kModelFlagCentroids) || file.layers.size() != 1) {
    throw FormatError("model file does not hold cluster centroids");
  }
  ClusterModel<double> model;
  model.centroids = file.layers.front().weight.cast<double>();
  return model;
}

struct SinkhornConfig {
  double epsilon = 0.05;
  std::size_t iterations = 3;

  void validate() const {
    if (!(epsilon > 0.0)) throw ConfigError("sinkhorn epsilon must be > 0");
    if (iterations < 1) throw ConfigError("sinkhorn iterations must be >= 1");
  }
};

/// Entropic transport plan for exp(scores / epsilon) with uniform marginals:
/// rows sum to 1/B, columns to 1/P. Each iteration scales columns then rows,
/// so row marginals are exact and column marginals converge.
template <typename Derived>
Matrix<double> sinkhorn_plan(const Eigen::MatrixBase<Derived>& scores, const SinkhornConfig& cfg) {
  cfg.validate();
  const Index b = scores.rows();
  const Index p = scores.cols();
  if (b < 1 || p < 1) throw ShapeError("sinkhorn: empty score matrix");
  if (!scores.allFinite()) throw NumericError("sinkhorn: non-finite scores");

  Matrix<double> q = scores.template cast<double>() / cfg.epsilon;
  q.array() -= q.maxCoeff();
  // Scalar exp on purpose: Eigen's vectorised exp clamps very negative
  // arguments to denormals instead of underflowing to zero.
  q = q.unaryExpr([](double v) { return std::exp(v); });
  const double total = q.sum();
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw NumericError("sinkhorn: exp(scores / epsilon) under- or overflowed; use a larger epsilon");
  }
  q /= total;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    for (Index j = 0; j < p; ++j) {
      const double s = q.col(j).sum();
      if (!(s > 0.0)) throw NumericError("sinkhorn: empty prototype column; use a larger epsilon");
      q.col(j) *= 1.0 / (static_cast<double>(p) * s);
    }
    for (Index i = 0; i < b; ++i) {
      const double s = q.row(i).sum();
      if (!(s > 0.0)) throw NumericError("sinkhorn: empty sample row; use a larger epsilon");
      q.row(i) *= 1.0 / (static_cast<double>(b) * s);
    }
  }
  return q;
}

/// Soft codes: the transport plan rescaled so each row is a distribution.
template <typename Derived>
Matrix<double> sinkhorn_codes(const Eigen::MatrixBase<Derived>& scores, const SinkhornConfig& cfg) {
  Matrix<double> q = sinkhorn_plan(scores, cfg);
  q *= static_cast<double>(scores.rows());
  return q;
}

}  // namespace clup

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

// Reference implementations used by the tests. They are written with plain
// loops over std::vector so that they share no code with the library.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;  // row-major

inline Mat matmul_t(const Mat& x, const Mat& w) {  // x * w^T
  Mat out(x.size(), Vec(w.size(), 0.0));
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t o = 0; o < w.size(); ++o)
      for (std::size_t k = 0; k < w[o].size(); ++k) out[i][o] += x[i][k] * w[o][k];
  return out;
}

/// Affine layers with ReLU on all but the last.
inline Mat mlp_forward(const Mat& x, const std::vector<Mat>& weights, const std::vector<Vec>& biases) {
  Mat a = x;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    Mat z = matmul_t(a, weights[l]);
    for (auto& row : z) {
      for (std::size_t o = 0; o < row.size(); ++o) {
        row[o] += biases[l][o];
        if (l + 1 < weights.size() && row[o] < 0.0) row[o] = 0.0;
      }
    }
    a = std::move(z);
  }
  return a;
}

inline Vec softmax(const Vec& logits) {
  long double m = logits[0];
  for (double v : logits) m = std::max<long double>(m, v);
  long double sum = 0;
  std::vector<long double> e(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) sum += e[i] = std::exp(static_cast<long double>(logits[i]) - m);
  Vec p(logits.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = static_cast<double>(e[i] / sum);
  return p;
}

/// Per-cluster histogram of labels, counted one sample at a time.
inline std::vector<std::vector<std::size_t>> histogram(const std::vector<std::uint32_t>& assign,
                                                       const std::vector<std::uint32_t>& labels, std::size_t k,
                                                       std::size_t n) {
  std::vector<std::vector<std::size_t>> h(k, std::vector<std::size_t>(n, 0));
  for (std::size_t i = 0; i < assign.size(); ++i) h[assign[i]][labels[i]] += 1;
  return h;
}

/// Nearest-rank quantile by exact integer arithmetic: the smallest r with
/// r / count >= q, where q = num / den.
inline double nearest_rank_quantile(std::vector<double> values, std::uint64_t num, std::uint64_t den) {
  std::sort(values.begin(), values.end());
  std::uint64_t r = (num * values.size() + den - 1) / den;
  if (r < 1) r = 1;
  return values[r - 1];
}

/// Alternating normalisation run until nothing changes.
inline Mat sinkhorn_fixed_point(const Mat& scores, double eps) {
  const std::size_t b = scores.size(), p = scores[0].size();
  Mat q(b, Vec(p));
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < p; ++j) q[i][j] = std::exp(scores[i][j] / eps);
  for (int it = 0; it < 100000; ++it) {
    double change = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      double s = 0;
      for (std::size_t i = 0; i < b; ++i) s += q[i][j];
      for (std::size_t i = 0; i < b; ++i) q[i][j] /= s * p;
    }
    for (std::size_t i = 0; i < b; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < p; ++j) s += q[i][j];
      change = std::max(change, std::abs(s * b - 1.0));
      for (std::size_t j = 0; j < p; ++j) q[i][j] /= s * b;
    }
    if (change < 1e-15) break;
  }
  for (auto& row : q)
    for (auto& v : row) v *= static_cast<double>(b);
  return q;
}

/// |a - n| / max(|a|, |n|, floor).
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Central difference of f with respect to *param.
inline double central_difference(double* param, const std::function<double()>& f, double h = 1e-5) {
  const double saved = *param;
  *param = saved + h;
  const double up = f();
  *param = saved - h;
  const double down = f();
  *param = saved;
  return (up - down) / (2.0 * h);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("clup_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle

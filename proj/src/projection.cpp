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

#include "clup/projection.hpp"

#include <cmath>
#include <cstdio>

namespace clup {

namespace {

constexpr std::size_t kMaxPowerIterations = 100000;

void fix_sign(Vector<double>& v) {
  Index best = 0;
  for (Index i = 1; i < v.size(); ++i) {
    if (std::abs(v(i)) > std::abs(v(best))) best = i;
  }
  if (v(best) < 0.0) v = -v;
}

// Dominant eigenpair of the PSD matrix c restricted to the complement of
// `against` (an orthonormal row set, possibly empty).
std::pair<Vector<double>, double> power_iteration(const Matrix<double>& c, const Matrix<double>& against) {
  const Index d = c.rows();
  auto orthogonalize = [&](Vector<double>& v) {
    for (Index r = 0; r < against.rows(); ++r) v -= against.row(r).dot(v) * against.row(r).transpose();
  };
  // Start from the column of c with the largest norm after projection.
  Vector<double> v = Vector<double>::Zero(d);
  double best = -1.0;
  for (Index j = 0; j < d; ++j) {
    Vector<double> col = c.col(j);
    orthogonalize(col);
    if (col.norm() > best) {
      best = col.norm();
      v = col;
    }
  }
  const double scale = std::max(c.diagonal().cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  if (!(v.norm() > 1e-12 * scale)) return {Vector<double>::Zero(d), 0.0};
  v.normalize();
  for (std::size_t it = 0; it < kMaxPowerIterations; ++it) {
    Vector<double> next = c * v;
    orthogonalize(next);
    const double n = next.norm();
    if (!(n > 1e-12 * scale)) return {Vector<double>::Zero(d), 0.0};
    next /= n;
    const double change = std::min((next - v).norm(), (next + v).norm());
    v = next;
    if (change < 1e-13) break;
  }
  fix_sign(v);
  return {v, v.dot(c * v)};
}

}  // namespace

Projection pca_2d(const Matrix<double>& x) {
  if (x.rows() < 1 || x.cols() < 1) throw ShapeError("pca_2d: empty data");
  if (!x.allFinite()) throw NumericError("pca_2d: non-finite data");
  Projection p;
  p.mean = x.colwise().mean().transpose();
  const Matrix<double> centered = x.rowwise() - p.mean.transpose();
  const Matrix<double> cov = centered.transpose() * centered / static_cast<double>(x.rows());

  p.components = Matrix<double>::Zero(2, x.cols());
  Matrix<double> found(0, x.cols());
  for (Index k = 0; k < 2; ++k) {
    auto [v, lambda] = power_iteration(cov, found);
    if (v.isZero(0.0)) {
      p.warning = "data has rank " + std::to_string(k) + " < 2; component " + std::to_string(k + 1) + " is zero";
      break;
    }
    p.components.row(k) = v.transpose();
    p.variance[k] = lambda;
    found.conservativeResize(k + 1, Eigen::NoChange);
    found.row(k) = v.transpose();
  }
  p.coords = centered * p.components.transpose();
  return p;
}

void save_projection_csv(const Projection& p, const std::optional<Labels>& labels, const std::filesystem::path& path) {
  if (labels && static_cast<Index>(labels->size()) != p.coords.rows()) {
    throw ShapeError("projection: label count does not match row count");
  }
  std::string out = labels ? "x,y,label\n" : "x,y\n";
  char buf[96];
  for (Index i = 0; i < p.coords.rows(); ++i) {
    std::snprintf(buf, sizeof buf, "%.9g,%.9g", p.coords(i, 0), p.coords(i, 1));
    out += buf;
    if (labels) out += "," + std::to_string((*labels)[static_cast<std::size_t>(i)]);
    out += "\n";
  }
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(out.data()), out.size()));
}

}  // namespace clup

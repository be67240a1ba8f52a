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

// Two-component PCA for plotting feature spaces.

#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "clup/common.hpp"
#include "clup/features.hpp"

namespace clup {

struct Projection {
  Matrix<double> coords;      // M x 2
  Matrix<double> components;  // 2 x D, orthonormal rows (a zero row if rank < 2)
  Vector<double> mean;        // D
  double variance[2] = {0.0, 0.0};  // eigenvalues of the covariance
  std::optional<std::string> warning;
};

/// Leading eigenvectors of the sample covariance by power iteration with
/// deflation. Each component is signed so its largest-magnitude entry is
/// positive. Data of rank < 2 gets a zero second component and a warning.
Projection pca_2d(const Matrix<double>& x);

template <typename Derived>
Projection pca_2d(const Eigen::MatrixBase<Derived>& x) {
  return pca_2d(Matrix<double>(x.template cast<double>()));
}

/// CSV with header "x,y,label" (or "x,y" when `labels` is empty).
void save_projection_csv(const Projection& p, const std::optional<Labels>& labels, const std::filesystem::path& path);

}  // namespace clup

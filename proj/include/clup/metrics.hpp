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

#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "clup/common.hpp"

namespace clup {

struct MetricsReport {
  double top1 = 0.0;
  /// Accuracy per class; NaN for classes absent from the ground truth.
  std::vector<double> per_class;
  std::vector<std::size_t> counts;  // ground-truth samples per class
  std::optional<double> coverage;
  /// Further name/value pairs printed after the fixed keys, in order.
  std::vector<std::pair<std::string, double>> extra;
  /// Wall-clock seconds per stage. Not part of format_metrics.
  std::vector<std::pair<std::string, double>> timings;
};

/// Top-1 and class-wise accuracy of `predicted` against `truth`.
MetricsReport evaluate_predictions(std::span<const std::uint32_t> predicted, std::span<const std::uint32_t> truth,
                                   std::size_t num_classes);

/// `name=value` lines, 6 decimals: top1, class_<n>, coverage, then `extra`.
/// Absent classes print "n/a".
std::string format_metrics(const MetricsReport& report);

}  // namespace clup

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

#include "clup/metrics.hpp"

#include <cmath>
#include <cstdio>

namespace clup {

MetricsReport evaluate_predictions(std::span<const std::uint32_t> predicted, std::span<const std::uint32_t> truth,
                                   std::size_t num_classes) {
  if (predicted.size() != truth.size()) {
    throw ShapeError(std::to_string(predicted.size()) + " predictions for " + std::to_string(truth.size()) + " labels");
  }
  if (truth.empty()) throw Error("evaluate_predictions: no samples");
  MetricsReport r;
  r.counts.assign(num_classes, 0);
  std::vector<std::size_t> correct(num_classes, 0);
  std::size_t total_correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= num_classes) throw RangeError("ground-truth label out of range");
    ++r.counts[truth[i]];
    if (predicted[i] == truth[i]) {
      ++correct[truth[i]];
      ++total_correct;
    }
  }
  r.top1 = static_cast<double>(total_correct) / static_cast<double>(truth.size());
  r.per_class.resize(num_classes);
  for (std::size_t n = 0; n < num_classes; ++n) {
    r.per_class[n] = r.counts[n] ? static_cast<double>(correct[n]) / static_cast<double>(r.counts[n])
                                 : std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

std::string format_metrics(const MetricsReport& report) {
  std::string out;
  char buf[64];
  auto line = [&](const std::string& name, double v) {
    if (std::isnan(v)) {
      out += name + "=n/a\n";
    } else {
      std::snprintf(buf, sizeof buf, "%.6f", v);
      out += name + "=" + buf + "\n";
    }
  };
  line("top1", report.top1);
  for (std::size_t n = 0; n < report.per_class.size(); ++n) line("class_" + std::to_string(n), report.per_class[n]);
  if (report.coverage) line("coverage", *report.coverage);
  for (const auto& [name, v] : report.extra) line(name, v);
  return out;
}

}  // namespace clup

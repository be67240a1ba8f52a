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

#include "clup/pseudo_label.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace clup {

namespace {

void check_same_length(std::span<const std::uint32_t> assignments, std::span<const std::uint32_t> labels) {
  if (assignments.size() != labels.size()) {
    throw ShapeError(std::to_string(assignments.size()) + " assignments for " + std::to_string(labels.size()) +
                     " labels");
  }
}

std::uint32_t max_label(std::span<const std::uint32_t> labels) {
  std::uint32_t m = 0;
  for (auto l : labels) {
    if (l == kNoLabel) throw RangeError("sample label must not be the empty-cluster sentinel");
    m = std::max(m, l);
  }
  return m;
}

}  // namespace

SamplePseudoLabels pseudo_labels_from_probs(const Matrix<double>& probs) {
  SamplePseudoLabels out;
  out.labels = argmax_rows(probs);
  out.confidences.resize(out.labels.size());
  for (std::size_t i = 0; i < out.labels.size(); ++i) {
    out.confidences[i] = probs(static_cast<Index>(i), out.labels[i]);
  }
  return out;
}

Labels cluster_majority(std::span<const std::uint32_t> assignments, std::span<const std::uint32_t> labels,
                        std::size_t num_clusters) {
  check_same_length(assignments, labels);
  const std::size_t n = labels.empty() ? 1 : static_cast<std::size_t>(max_label(labels)) + 1;
  std::vector<std::size_t> hist(num_clusters * n, 0);
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] >= num_clusters) throw RangeError("cluster assignment out of range");
    ++hist[assignments[i] * n + labels[i]];
  }
  Labels out(num_clusters, kNoLabel);
  for (std::size_t j = 0; j < num_clusters; ++j) {
    std::size_t best = 0;
    for (std::size_t c = 0; c < n; ++c) {
      if (hist[j * n + c] > best) {  // strict: ties keep the lowest class
        best = hist[j * n + c];
        out[j] = static_cast<std::uint32_t>(c);
      }
    }
  }
  return out;
}

ClusterPseudoLabels summarize_clusters(std::span<const std::uint32_t> assignments,
                                       std::span<const std::uint32_t> labels, std::size_t num_clusters) {
  ClusterPseudoLabels out;
  out.cluster_label = cluster_majority(assignments, labels, num_clusters);
  out.size.assign(num_clusters, 0);
  out.votes.assign(num_clusters, 0);
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    const auto j = assignments[i];
    ++out.size[j];
    if (labels[i] == out.cluster_label[j]) ++out.votes[j];
  }
  out.purity.assign(num_clusters, 0.0);
  for (std::size_t j = 0; j < num_clusters; ++j) {
    if (out.size[j] > 0) out.purity[j] = static_cast<double>(out.votes[j]) / static_cast<double>(out.size[j]);
  }
  return out;
}

std::vector<double> cluster_purity(std::span<const std::uint32_t> assignments, std::span<const std::uint32_t> labels,
                                   std::span<const std::uint32_t> cluster_labels, std::size_t num_clusters) {
  check_same_length(assignments, labels);
  if (cluster_labels.size() != num_clusters) throw ShapeError("cluster_purity: one cluster label per cluster expected");
  std::vector<std::size_t> size(num_clusters, 0);
  std::vector<std::size_t> agree(num_clusters, 0);
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    const auto j = assignments[i];
    if (j >= num_clusters) throw RangeError("cluster assignment out of range");
    ++size[j];
    if (labels[i] == cluster_labels[j]) ++agree[j];
  }
  std::vector<double> purity(num_clusters, 0.0);
  for (std::size_t j = 0; j < num_clusters; ++j) {
    if (size[j] > 0 && cluster_labels[j] != kNoLabel) {
      purity[j] = static_cast<double>(agree[j]) / static_cast<double>(size[j]);
    }
  }
  return purity;
}

std::size_t nearest_rank(double q, std::size_t count) {
  if (count == 0) throw RangeError("nearest_rank: empty set");
  const double r = std::ceil(q * static_cast<double>(count) - 1e-9);
  return std::clamp<std::size_t>(r < 1.0 ? 1 : static_cast<std::size_t>(r), 1, count);
}

std::vector<double> per_class_threshold(std::span<const std::uint32_t> cluster_labels,
                                        std::span<const double> purities, double q, std::size_t num_classes) {
  if (!(q > 0.0 && q < 1.0)) throw RangeError("per_class_threshold: Q must lie in (0, 1)");
  if (cluster_labels.size() != purities.size()) throw ShapeError("per_class_threshold: length mismatch");
  std::vector<std::vector<double>> by_class(num_classes);
  for (std::size_t j = 0; j < cluster_labels.size(); ++j) {
    if (cluster_labels[j] == kNoLabel) continue;
    if (cluster_labels[j] >= num_classes) throw RangeError("per_class_threshold: cluster label out of range");
    by_class[cluster_labels[j]].push_back(purities[j]);
  }
  std::vector<double> tau(num_classes, std::numeric_limits<double>::infinity());
  for (std::size_t n = 0; n < num_classes; ++n) {
    auto& v = by_class[n];
    if (v.empty()) continue;
    std::sort(v.begin(), v.end());
    tau[n] = v[nearest_rank(q, v.size()) - 1];
  }
  return tau;
}

RefinedSubset refine(std::span<const std::uint32_t> assignments, std::span<const std::uint32_t> cluster_labels,
                     std::span<const double> purities, std::span<const double> thresholds) {
  if (cluster_labels.size() != purities.size()) throw ShapeError("refine: length mismatch");
  std::vector<char> keep(cluster_labels.size(), 0);
  RefinedSubset out;
  out.thresholds.assign(thresholds.begin(), thresholds.end());
  for (std::size_t j = 0; j < cluster_labels.size(); ++j) {
    const auto label = cluster_labels[j];
    if (label == kNoLabel) continue;
    if (label >= thresholds.size()) throw RangeError("refine: cluster label has no threshold");
    if (purities[j] >= thresholds[label]) {
      keep[j] = 1;
      out.retained_clusters.push_back(static_cast<std::uint32_t>(j));
    }
  }
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    const auto j = assignments[i];
    if (j >= cluster_labels.size()) throw RangeError("refine: cluster assignment out of range");
    if (keep[j]) {
      out.indices.push_back(static_cast<std::uint32_t>(i));
      out.labels.push_back(cluster_labels[j]);
    }
  }
  if (out.indices.empty()) throw EmptyRefinementError("refinement retained no samples");
  return out;
}

RefinedSubset confidence_refine(const SamplePseudoLabels& pseudo, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw RangeError("confidence threshold must lie in [0, 1]");
  RefinedSubset out;
  for (std::size_t i = 0; i < pseudo.labels.size(); ++i) {
    if (pseudo.confidences[i] >= threshold) {
      out.indices.push_back(static_cast<std::uint32_t>(i));
      out.labels.push_back(pseudo.labels[i]);
    }
  }
  if (out.indices.empty()) {
    throw EmptyRefinementError("no sample reaches confidence " + std::to_string(threshold));
  }
  return out;
}

RefinedSubset confidence_refine_at_coverage(const SamplePseudoLabels& pseudo, double coverage) {
  if (!(coverage > 0.0 && coverage <= 1.0)) throw RangeError("coverage must lie in (0, 1]");
  const std::size_t m = pseudo.labels.size();
  if (m == 0) throw EmptyRefinementError("no samples");
  std::size_t keep = static_cast<std::size_t>(std::ceil(coverage * static_cast<double>(m) - 1e-9));
  keep = std::clamp<std::size_t>(keep, 1, m);
  std::vector<std::uint32_t> order(m);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return pseudo.confidences[a] > pseudo.confidences[b]; });
  order.resize(keep);
  std::sort(order.begin(), order.end());
  RefinedSubset out;
  out.indices = std::move(order);
  for (auto i : out.indices) out.labels.push_back(pseudo.labels[i]);
  return out;
}

SubsetScore subset_accuracy(const RefinedSubset& subset, std::span<const std::uint32_t> truth) {
  if (subset.indices.empty()) throw EmptyRefinementError("subset_accuracy: empty subset");
  std::size_t correct = 0;
  for (std::size_t r = 0; r < subset.indices.size(); ++r) {
    if (subset.indices[r] >= truth.size()) throw RangeError("subset index beyond ground truth");
    if (truth[subset.indices[r]] == subset.labels[r]) ++correct;
  }
  return {static_cast<double>(correct) / static_cast<double>(subset.size()),
          static_cast<double>(subset.size()) / static_cast<double>(truth.size())};
}

FeatureSet subset_to_features(const RefinedSubset& subset) {
  if (subset.indices.empty()) throw EmptyRefinementError("cannot export an empty subset");
  FeatureSet set;
  set.data.resize(static_cast<Index>(subset.size()), 1);
  for (std::size_t r = 0; r < subset.size(); ++r) {
    if (subset.indices[r] >= (1u << 24)) throw RangeError("sample index not representable as f32");
    set.data(static_cast<Index>(r), 0) = static_cast<float>(subset.indices[r]);
  }
  set.labels = subset.labels;
  return set;
}

RefinedSubset subset_from_features(const FeatureSet& set) {
  if (set.cols() != 1 || !set.labels) throw FormatError("subset file must have one index column and labels");
  RefinedSubset out;
  for (Index r = 0; r < set.rows(); ++r) {
    const float v = set.data(r, 0);
    if (v < 0.0f || v != std::floor(v)) throw FormatError("subset index is not a non-negative integer");
    out.indices.push_back(static_cast<std::uint32_t>(v));
  }
  out.labels = *set.labels;
  return out;
}

}  // namespace clup

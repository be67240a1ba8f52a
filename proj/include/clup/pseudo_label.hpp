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

// Cluster-level pseudo-labelling.
//
// A source classifier labels every target sample; k-means groups the samples;
// each cluster takes the majority of its members' labels and a purity score,
// the share of members agreeing with that majority. Clusters whose purity
// reaches the per-class Q-quantile of purities are kept, and all of their
// members are relabelled with the cluster label.

#pragma once

#include <span>
#include <vector>

#include "clup/common.hpp"
#include "clup/features.hpp"
#include "clup/network.hpp"

namespace clup {

struct SamplePseudoLabels {
  Labels labels;                   // argmax class per sample
  std::vector<double> confidences; // probability of that class
};

/// Arg-max labels and confidences from a B x N probability matrix.
/// Ties go to the lowest class index.
SamplePseudoLabels pseudo_labels_from_probs(const Matrix<double>& probs);

template <typename Scalar, typename Derived>
SamplePseudoLabels source_pseudo_labels(const Mlp<Scalar>& extractor, const SoftmaxHead<Scalar>& head,
                                        const Eigen::MatrixBase<Derived>& target) {
  return pseudo_labels_from_probs(classify(head, forward_trace(extractor, target).output()).probs);
}

/// Majority-voted label per cluster; kNoLabel for empty clusters.
Labels cluster_majority(std::span<const std::uint32_t> assignments, std::span<const std::uint32_t> labels,
                        std::size_t num_clusters);

/// Share of each cluster's members whose label equals the cluster label.
/// Empty clusters score 0.
std::vector<double> cluster_purity(std::span<const std::uint32_t> assignments, std::span<const std::uint32_t> labels,
                                   std::span<const std::uint32_t> cluster_labels, std::size_t num_clusters);

struct ClusterPseudoLabels {
  Labels cluster_label;
  std::vector<double> purity;
  std::vector<std::size_t> size;
  std::vector<std::size_t> votes;  // members agreeing with cluster_label; purity = votes / size
};

ClusterPseudoLabels summarize_clusters(std::span<const std::uint32_t> assignments,
                                       std::span<const std::uint32_t> labels, std::size_t num_clusters);

/// 1-based nearest rank ceil(q * count), clamped to [1, count]. A 1e-9 slack
/// absorbs binary rounding of q (0.7 * 10 must give 7, not 8).
std::size_t nearest_rank(double q, std::size_t count);

/// Per class n, the nearest-rank q-quantile of the purities of the clusters
/// labelled n. Classes with no cluster get +infinity.
std::vector<double> per_class_threshold(std::span<const std::uint32_t> cluster_labels,
                                        std::span<const double> purities, double q, std::size_t num_classes);

struct RefinedSubset {
  std::vector<std::uint32_t> indices;  // retained samples, ascending
  Labels labels;                       // pseudo-label of each retained sample
  std::vector<double> thresholds;      // per-class tau (purity refinement only)
  std::vector<std::uint32_t> retained_clusters;

  std::size_t size() const { return indices.size(); }
};

/// Keeps every member of each cluster j with purity[j] >= thresholds[label[j]],
/// labelled with the cluster label. Throws EmptyRefinementError if nothing
/// survives.
RefinedSubset refine(std::span<const std::uint32_t> assignments, std::span<const std::uint32_t> cluster_labels,
                     std::span<const double> purities, std::span<const double> thresholds);

/// Keeps samples with confidence >= threshold, labelled with their own label.
RefinedSubset confidence_refine(const SamplePseudoLabels& pseudo, double threshold);

/// Keeps the ceil(coverage * M) most confident samples (ties by index), for
/// comparisons at equal coverage.
RefinedSubset confidence_refine_at_coverage(const SamplePseudoLabels& pseudo, double coverage);

struct SubsetScore {
  double accuracy = 0.0;  // retained pseudo-labels matching truth
  double coverage = 0.0;  // retained / total
};

SubsetScore subset_accuracy(const RefinedSubset& subset, std::span<const std::uint32_t> truth);

/// Subset file: one f32 column holding sample indices, labels block set.
FeatureSet subset_to_features(const RefinedSubset& subset);
RefinedSubset subset_from_features(const FeatureSet& set);

}  // namespace clup

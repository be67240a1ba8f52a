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

// The three adaptation stages and the experiments built on them.
//
//   stage 1: source model -> target pseudo-labels -> clusters -> refined subset
//   stage 2: target data -> self-supervised extractor
//   stage 3: extractor + new head, trained on the refined subset
//
// Stages 1 and 2 share no state and may run in either order. Every stage
// draws its random streams from mix_seed(cfg.seed, <stage stream>).

#pragma once

#include <string>
#include <vector>

#include "clup/clustering.hpp"
#include "clup/config.hpp"
#include "clup/metrics.hpp"
#include "clup/network.hpp"
#include "clup/pseudo_label.hpp"
#include "clup/ssl.hpp"

namespace clup {

namespace streams {
inline constexpr std::uint64_t kSourceExtractor = 11;
inline constexpr std::uint64_t kSourceHead = 12;
inline constexpr std::uint64_t kSourceTrain = 13;
inline constexpr std::uint64_t kSourceSplit = 14;
inline constexpr std::uint64_t kSslExtractor = 21;
inline constexpr std::uint64_t kSslBank = 22;
inline constexpr std::uint64_t kSslTrain = 23;
inline constexpr std::uint64_t kKMeans = 31;
inline constexpr std::uint64_t kTargetHead = 41;
inline constexpr std::uint64_t kTargetTrain = 42;
}  // namespace streams

/// Fresh extractor [D, hidden, Z] for the given stream.
Mlp<float> make_extractor(const PipelineConfig& cfg, std::uint64_t stream);

struct SourceStage {
  Classifier model;
  double train_top1 = 0.0;
  double val_top1 = 0.0;  // NaN when source_val_fraction == 0
  LossLog log;
};

/// Trains the source classifier on a seeded train/validation split.
SourceStage train_source(const FeatureSet& source, const PipelineConfig& cfg);

struct ClusterStage {
  SamplePseudoLabels sample;        // source-model prediction per target sample
  ClusterModel<double> clusters;    // k-means on source-extractor features
  ClusterPseudoLabels summary;      // majority label, purity, size per cluster
};

/// Pseudo-labels the target set with the source model and over-clusters its
/// source-extractor features. Independent of Q.
ClusterStage cluster_target(const Classifier& source, const FeatureSet& target, const PipelineConfig& cfg);

/// Per-class Q-quantile thresholds and the clusters that reach them.
RefinedSubset purity_refine(const ClusterStage& stage, double q, std::size_t num_classes);

/// Human-readable stage 1 report: thresholds (full precision), retained
/// clusters per class, coverage, one line per cluster, and subset accuracy
/// when `truth` is given.
std::string purity_report(const ClusterStage& stage, const RefinedSubset& subset, double q,
                          const std::optional<Labels>& truth);

struct SslStage {
  Mlp<float> extractor;
  PrototypeBank<float> bank;
  LossLog log;
};

SslStage pretrain_ssl(const FeatureSet& target, const PipelineConfig& cfg);

/// Attaches a fresh head to `extractor` and trains on the subset rows of
/// `target` with their pseudo-labels. With cfg.target_freeze_extractor only
/// the head is trained.
Classifier train_target(const Mlp<float>& extractor, const FeatureSet& target, const RefinedSubset& subset,
                        const PipelineConfig& cfg, LossLog* log = nullptr);

/// Top-1 and class-wise accuracy of `model` on labelled data.
MetricsReport evaluate(const Classifier& model, const FeatureSet& data, std::size_t num_classes);

struct SweepRow {
  std::string method;  // "confidence" or "purity"
  double threshold = 0.0;
  double coverage = 0.0;
  double subset_accuracy = 0.0;
  double top1 = 0.0;
};

/// For every threshold, confidence refinement and purity refinement with
/// Q = threshold, each followed by stage 3 on `extractor`. Rows are grouped
/// by method, thresholds in the given order.
std::vector<SweepRow> run_sweep(const Classifier& source, const Mlp<float>& extractor, const FeatureSet& target,
                                const PipelineConfig& cfg);

std::string format_sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace clup

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

#include "clup/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace clup {

namespace {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string exact(double v) {
  if (std::isinf(v)) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double accuracy(const Labels& predicted, const Labels& truth) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += predicted[i] == truth[i];
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

TrainConfig seeded(TrainConfig tc, std::uint64_t seed, std::uint64_t stream) {
  tc.seed = mix_seed(seed, stream);
  return tc;
}

}  // namespace

Mlp<float> make_extractor(const PipelineConfig& cfg, std::uint64_t stream) {
  const Index dims[] = {cfg.synth.input_dim, cfg.hidden_dim, cfg.feature_dim};
  return make_mlp<float>(dims, mix_seed(cfg.seed, stream));
}

SourceStage train_source(const FeatureSet& source, const PipelineConfig& cfg) {
  if (!source.labels) throw ConfigError("source data has no labels");
  source.validate(cfg.num_classes());
  if (source.cols() != cfg.synth.input_dim) {
    throw ShapeError("source data has " + std::to_string(source.cols()) + " columns, input_dim is " +
                     std::to_string(cfg.synth.input_dim));
  }
  const std::size_t m = static_cast<std::size_t>(source.rows());
  std::mt19937_64 split_rng(mix_seed(cfg.seed, streams::kSourceSplit));
  auto order = shuffled_indices(m, split_rng);
  const auto n_val = static_cast<std::size_t>(std::floor(cfg.source_val_fraction * static_cast<double>(m)));
  if (n_val >= m) throw ConfigError("source_val_fraction leaves no training rows");
  std::vector<std::uint32_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::uint32_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  const FeatureSet train_set = source.gather(train);

  SourceStage out;
  out.model.extractor = make_extractor(cfg, streams::kSourceExtractor);
  out.model.head = make_head<float>(cfg.num_classes(), cfg.feature_dim, mix_seed(cfg.seed, streams::kSourceHead));
  out.log = train_classifier(out.model.extractor, out.model.head, train_set,
                             seeded(cfg.source_train, cfg.seed, streams::kSourceTrain));
  out.train_top1 = accuracy(predict(out.model.extractor, out.model.head, train_set.data), *train_set.labels);
  if (n_val > 0) {
    const FeatureSet val_set = source.gather(val);
    out.val_top1 = accuracy(predict(out.model.extractor, out.model.head, val_set.data), *val_set.labels);
  } else {
    out.val_top1 = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

ClusterStage cluster_target(const Classifier& source, const FeatureSet& target, const PipelineConfig& cfg) {
  if (target.cols() != source.extractor.input_dim()) {
    throw ShapeError("target data has " + std::to_string(target.cols()) + " columns, source model expects " +
                     std::to_string(source.extractor.input_dim()));
  }
  ClusterStage out;
  const auto trace = forward_trace(source.extractor, target.data);
  out.sample = pseudo_labels_from_probs(classify(source.head, trace.output()).probs);
  const Matrix<double> features = cfg.kmeans_normalize ? l2_normalize_rows(trace.output()) : trace.output();
  KMeansOptions opt;
  opt.max_iter = cfg.kmeans_max_iter;
  opt.tol = cfg.kmeans_tol;
  opt.seed = mix_seed(cfg.seed, streams::kKMeans);
  out.clusters = kmeans_fit(features, cfg.clusters, opt);
  out.summary = summarize_clusters(out.clusters.assignments, out.sample.labels, cfg.clusters);
  return out;
}

RefinedSubset purity_refine(const ClusterStage& stage, double q, std::size_t num_classes) {
  const auto tau = per_class_threshold(stage.summary.cluster_label, stage.summary.purity, q, num_classes);
  return refine(stage.clusters.assignments, stage.summary.cluster_label, stage.summary.purity, tau);
}

std::string purity_report(const ClusterStage& stage, const RefinedSubset& subset, double q,
                          const std::optional<Labels>& truth) {
  const std::size_t m = stage.clusters.assignments.size();
  const std::size_t k = stage.summary.cluster_label.size();
  const std::size_t n = subset.thresholds.size();
  std::vector<std::size_t> total(n, 0), kept(n, 0);
  std::vector<char> retained(k, 0);
  for (auto j : subset.retained_clusters) retained[j] = 1;
  for (std::size_t j = 0; j < k; ++j) {
    const auto label = stage.summary.cluster_label[j];
    if (label == kNoLabel) continue;
    ++total[label];
    kept[label] += retained[j];
  }

  std::string r;
  r += "samples=" + std::to_string(m) + "\n";
  r += "clusters=" + std::to_string(k) + "\n";
  r += "q=" + fixed6(q) + "\n";
  r += "retained_samples=" + std::to_string(subset.size()) + "\n";
  r += "coverage=" + fixed6(static_cast<double>(subset.size()) / static_cast<double>(m)) + "\n";
  if (truth) r += "subset_accuracy=" + fixed6(subset_accuracy(subset, *truth).accuracy) + "\n";
  for (std::size_t c = 0; c < n; ++c) {
    r += "class_" + std::to_string(c) + " tau=" + exact(subset.thresholds[c]) + " retained_clusters=" +
         std::to_string(kept[c]) + "/" + std::to_string(total[c]) + "\n";
  }
  for (std::size_t j = 0; j < k; ++j) {
    const auto label = stage.summary.cluster_label[j];
    r += "cluster_" + std::to_string(j) + " label=" + (label == kNoLabel ? std::string("none") : std::to_string(label)) +
         " size=" + std::to_string(stage.summary.size[j]) + " purity=" + fixed6(stage.summary.purity[j]) +
         " retained=" + (retained[j] ? "1" : "0") + "\n";
  }
  return r;
}

SslStage pretrain_ssl(const FeatureSet& target, const PipelineConfig& cfg) {
  if (target.cols() != cfg.synth.input_dim) {
    throw ShapeError("target data has " + std::to_string(target.cols()) + " columns, input_dim is " +
                     std::to_string(cfg.synth.input_dim));
  }
  SslStage out;
  out.extractor = make_extractor(cfg, streams::kSslExtractor);
  out.bank = make_bank<float>(cfg.prototype_count(), cfg.feature_dim, mix_seed(cfg.seed, streams::kSslBank));
  SslConfig ssl = cfg.ssl;
  ssl.seed = mix_seed(cfg.seed, streams::kSslTrain);
  out.log = ssl_train(out.extractor, out.bank, target, ssl);
  return out;
}

Classifier train_target(const Mlp<float>& extractor, const FeatureSet& target, const RefinedSubset& subset,
                        const PipelineConfig& cfg, LossLog* log) {
  if (subset.indices.empty()) throw EmptyRefinementError("refined subset is empty");
  for (auto i : subset.indices) {
    if (i >= target.rows()) throw RangeError("subset index " + std::to_string(i) + " beyond target rows");
  }
  FeatureSet train_set = target.gather(subset.indices);
  train_set.labels = subset.labels;
  Classifier model{extractor, make_head<float>(cfg.num_classes(), extractor.output_dim(),
                                               mix_seed(cfg.seed, streams::kTargetHead))};
  auto l = train_classifier(model.extractor, model.head, train_set, seeded(cfg.target_train, cfg.seed, streams::kTargetTrain),
                            cfg.target_freeze_extractor);
  if (log) *log = std::move(l);
  return model;
}

MetricsReport evaluate(const Classifier& model, const FeatureSet& data, std::size_t num_classes) {
  if (!data.labels) throw ConfigError("evaluation data has no labels");
  return evaluate_predictions(predict(model.extractor, model.head, data.data), *data.labels, num_classes);
}

std::vector<SweepRow> run_sweep(const Classifier& source, const Mlp<float>& extractor, const FeatureSet& target,
                                const PipelineConfig& cfg) {
  if (!target.labels) throw ConfigError("sweep needs target labels for evaluation");
  const auto stage = cluster_target(source, target, cfg);
  std::vector<SweepRow> rows;
  auto run = [&](const char* method, double t, const RefinedSubset& subset) {
    const auto score = subset_accuracy(subset, *target.labels);
    const auto model = train_target(extractor, target, subset, cfg);
    rows.push_back({method, t, score.coverage, score.accuracy, evaluate(model, target, cfg.num_classes()).top1});
  };
  for (double t : cfg.sweep_thresholds) run("confidence", t, confidence_refine(stage.sample, t));
  for (double t : cfg.sweep_thresholds) run("purity", t, purity_refine(stage, t, cfg.num_classes()));
  return rows;
}

std::string format_sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "method,threshold,coverage,subset_accuracy,top1\n";
  for (const auto& r : rows) {
    out += r.method + "," + fixed6(r.threshold) + "," + fixed6(r.coverage) + "," + fixed6(r.subset_accuracy) + "," +
           fixed6(r.top1) + "\n";
  }
  return out;
}

}  // namespace clup

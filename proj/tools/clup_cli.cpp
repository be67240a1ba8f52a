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

// Command-line driver for the adaptation pipeline.
//
// Exit codes: 0 ok, 2 configuration or input error, 3 numeric failure,
// 4 refinement kept no samples.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "clup/config.hpp"
#include "clup/features.hpp"
#include "clup/model_file.hpp"
#include "clup/pipeline.hpp"
#include "clup/projection.hpp"

namespace fs = std::filesystem;
using namespace clup;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitEmpty = 4;

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string model_path;
  std::string data_path;
  std::string backbone = "ssl";
  std::vector<double> thresholds;
  bool frozen = false;
};

class StageTimer {
 public:
  explicit StageTimer(std::string name) : name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    const std::chrono::duration<double> d = std::chrono::steady_clock::now() - start_;
    std::fprintf(stderr, "[time] %s %.3fs\n", name_.c_str(), d.count());
  }

 private:
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string fixed6(double v) {
  if (std::isnan(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

PipelineConfig resolve_config(const Options& o, std::map<std::string, std::string>* entries) {
  PipelineConfig cfg = o.config_path.empty() ? PipelineConfig{} : load_config(o.config_path, entries);
  if (o.seed) cfg.seed = *o.seed;
  cfg.synth.seed = cfg.seed;
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  if (!o.thresholds.empty()) cfg.sweep_thresholds = o.thresholds;
  if (o.frozen) cfg.target_freeze_extractor = true;
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  return cfg;
}

FeatureSet load_target(const PipelineConfig& cfg) {
  auto target = load_matrix(cfg.path("target_data"));
  target.validate(target.labels ? cfg.num_classes() : 0);
  return target;
}

/// Extractor of a classifier or self-supervised checkpoint.
Mlp<float> load_extractor(const fs::path& path) {
  const auto file = load_model(path);
  if (file.flags & kModelFlagPrototypes) return unpack_ssl(file).first;
  return unpack_classifier(file).extractor;
}

int cmd_make_synth(const Options& o) {
  std::map<std::string, std::string> entries;
  if (o.config_path.empty()) throw ConfigError("make-synth needs --config");
  auto cfg = resolve_config(o, &entries);
  for (const auto& key : synth_required_keys()) {
    if (key == "seed" && o.seed) continue;
    if (!entries.count(key)) throw ConfigError("missing required key '" + key + "'");
  }
  StageTimer t("make-synth");
  const auto [source, target] = synth_domains(cfg.synth);
  save_matrix(source, cfg.path("source_data"));
  save_matrix(target, cfg.path("target_data"));
  std::cout << "source rows=" << source.rows() << " target rows=" << target.rows() << "\n";
  return kExitOk;
}

int cmd_train_source(const Options& o) {
  const auto cfg = resolve_config(o, nullptr);
  const auto source = load_matrix(cfg.path("source_data"));
  if (!source.labels) throw ConfigError(cfg.path("source_data").string() + ": source data has no labels");
  StageTimer t("train-source");
  const auto stage = train_source(source, cfg);
  save_model(pack_classifier(stage.model), cfg.path("source_model"));
  std::cout << "source_train_top1=" << fixed6(stage.train_top1) << "\n"
            << "source_val_top1=" << fixed6(stage.val_top1) << "\n";
  return kExitOk;
}

int cmd_pseudo_label(const Options& o) {
  const auto cfg = resolve_config(o, nullptr);
  const auto source = unpack_classifier(load_model(cfg.path("source_model")));
  const auto target = load_target(cfg);
  StageTimer t("pseudo-label");
  const auto stage = cluster_target(source, target, cfg);
  save_model(pack_centroids(stage.clusters), cfg.path("centroids"));
  const auto subset = purity_refine(stage, cfg.purity_q, cfg.num_classes());
  save_matrix(subset_to_features(subset), cfg.path("subset"));
  const auto report = purity_report(stage, subset, cfg.purity_q, target.labels);
  write_text(cfg.path("purity_report"), report);
  std::cout << "retained " << subset.size() << " of " << target.rows() << " target samples\n";
  return kExitOk;
}

int cmd_ssl_pretrain(const Options& o) {
  const auto cfg = resolve_config(o, nullptr);
  const auto target = load_target(cfg);
  StageTimer t("ssl-pretrain");
  const auto stage = pretrain_ssl(target, cfg);
  save_model(pack_ssl(stage.extractor, stage.bank), cfg.path("ssl_model"));
  std::string log = "epoch,loss\n";
  char buf[64];
  for (std::size_t e = 0; e < stage.log.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g\n", e + 1, stage.log[e]);
    log += buf;
  }
  write_text(cfg.path("ssl_loss_log"), log);
  std::cout << "final ssl loss " << (stage.log.empty() ? 0.0 : stage.log.back()) << "\n";
  return kExitOk;
}

int cmd_train_target(const Options& o) {
  const auto cfg = resolve_config(o, nullptr);
  if (o.backbone != "ssl" && o.backbone != "source") throw ConfigError("--backbone must be 'ssl' or 'source'");
  const auto extractor = load_extractor(cfg.path(o.backbone == "ssl" ? "ssl_model" : "source_model"));
  const auto target = load_target(cfg);
  const auto subset = subset_from_features(load_matrix(cfg.path("subset")));
  StageTimer t("train-target");
  LossLog log;
  const auto model = train_target(extractor, target, subset, cfg, &log);
  save_model(pack_classifier(model), cfg.path("target_model"));

  FeatureSet train_set = target.gather(subset.indices);
  train_set.labels = subset.labels;
  const auto fit = evaluate(model, train_set, cfg.num_classes());
  MetricsReport report;
  if (target.labels) {
    report = evaluate(model, target, cfg.num_classes());
  } else {
    report.top1 = std::numeric_limits<double>::quiet_NaN();
  }
  report.coverage = static_cast<double>(subset.size()) / static_cast<double>(target.rows());
  report.extra.emplace_back("subset_train_top1", fit.top1);
  if (target.labels) report.extra.emplace_back("subset_accuracy", subset_accuracy(subset, *target.labels).accuracy);
  const auto text = format_metrics(report);
  write_text(cfg.path("metrics"), text);
  std::cout << text;
  return kExitOk;
}

int cmd_eval(const Options& o) {
  const auto cfg = resolve_config(o, nullptr);
  const fs::path model_path = o.model_path.empty() ? cfg.path("target_model") : fs::path(o.model_path);
  const fs::path data_path = o.data_path.empty() ? cfg.path("target_data") : fs::path(o.data_path);
  const auto model = unpack_classifier(load_model(model_path));
  const auto data = load_matrix(data_path);
  if (!data.labels) throw ConfigError(data_path.string() + ": evaluation data has no labels");
  std::cout << format_metrics(evaluate(model, data, cfg.num_classes()));
  return kExitOk;
}

int cmd_sweep(const Options& o) {
  const auto cfg = resolve_config(o, nullptr);
  const auto source = unpack_classifier(load_model(cfg.path("source_model")));
  const auto extractor = load_extractor(cfg.path("ssl_model"));
  const auto target = load_target(cfg);
  StageTimer t("sweep");
  const auto csv = format_sweep_csv(run_sweep(source, extractor, target, cfg));
  write_text(cfg.path("sweep_csv"), csv);
  std::cout << csv;
  return kExitOk;
}

int cmd_project(const Options& o) {
  const auto cfg = resolve_config(o, nullptr);
  const fs::path data_path = o.data_path.empty() ? cfg.path("target_data") : fs::path(o.data_path);
  const auto data = load_matrix(data_path);
  Projection p;
  if (o.model_path.empty()) {
    p = pca_2d(data.data);
  } else {
    p = pca_2d(forward_trace(load_extractor(o.model_path), data.data).output());
  }
  if (p.warning) std::cerr << "warning: " << *p.warning << "\n";
  save_projection_csv(p, data.labels, cfg.path("projection_csv"));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Source-free domain adaptation by cluster purity pseudo-labelling"};
  app.footer(config_help());
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config_path, "config file (key = value)");
  app.add_option("--seed", o.seed, "override the config seed");
  app.add_option("--out", o.out_dir, "directory for relative artifact paths");

  auto* make_synth = app.add_subcommand("make-synth", "generate labelled source and target sets");
  auto* train_src = app.add_subcommand("train-source", "train the source classifier");
  auto* pseudo = app.add_subcommand("pseudo-label", "stage 1: cluster pseudo-labels and purity refinement");
  auto* ssl = app.add_subcommand("ssl-pretrain", "stage 2: self-supervised target extractor");
  auto* train_tgt = app.add_subcommand("train-target", "stage 3: train on the refined subset");
  train_tgt->add_flag("--frozen", o.frozen, "train only the new head");
  train_tgt->add_option("--backbone", o.backbone, "extractor to adapt: ssl or source")->capture_default_str();
  auto* eval = app.add_subcommand("eval", "top-1 and class-wise accuracy");
  eval->add_option("--model", o.model_path, "classifier checkpoint (default: target_model)");
  eval->add_option("--data", o.data_path, "labelled data (default: target_data)");
  auto* sweep = app.add_subcommand("sweep", "confidence vs purity refinement over thresholds");
  sweep->add_option("--thresholds", o.thresholds, "override sweep_thresholds")->delimiter(',');
  auto* project = app.add_subcommand("project", "2D PCA projection CSV");
  project->add_option("--data", o.data_path, "data file (default: target_data)");
  project->add_option("--model", o.model_path, "project extractor features of this checkpoint");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (make_synth->parsed()) return cmd_make_synth(o);
    if (train_src->parsed()) return cmd_train_source(o);
    if (pseudo->parsed()) return cmd_pseudo_label(o);
    if (ssl->parsed()) return cmd_ssl_pretrain(o);
    if (train_tgt->parsed()) return cmd_train_target(o);
    if (eval->parsed()) return cmd_eval(o);
    if (sweep->parsed()) return cmd_sweep(o);
    if (project->parsed()) return cmd_project(o);
  } catch (const EmptyRefinementError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEmpty;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

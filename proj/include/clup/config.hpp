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

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "clup/features.hpp"
#include "clup/network.hpp"
#include "clup/ssl.hpp"

namespace clup {

/// Everything the pipeline stages read. Defaults come from `config_keys()`,
/// which is also what --help prints.
struct PipelineConfig {
  std::uint64_t seed;
  SynthConfig synth;

  std::uint32_t hidden_dim;
  std::uint32_t feature_dim;

  std::uint32_t clusters;
  std::uint32_t min_clusters_per_class;  // validate() requires clusters >= this * num_classes
  double purity_q;
  std::size_t kmeans_max_iter;
  double kmeans_tol;
  bool kmeans_normalize;

  TrainConfig source_train;
  double source_val_fraction;
  TrainConfig target_train;
  bool target_freeze_extractor;

  SslConfig ssl;
  std::uint32_t ssl_prototypes;  // 0 means 4 * num_classes

  std::vector<double> sweep_thresholds;

  std::filesystem::path out_dir = ".";
  std::map<std::string, std::string> paths;  // artifact name -> path, relative to out_dir

  PipelineConfig();

  std::uint32_t num_classes() const { return synth.num_classes; }
  std::uint32_t prototype_count() const { return ssl_prototypes ? ssl_prototypes : 4 * synth.num_classes; }

  /// Resolved path of a named artifact, e.g. path("target_model").
  std::filesystem::path path(const std::string& name) const;

  void validate() const;
};

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

/// Every accepted key with its default and a one-line description.
const std::vector<ConfigKey>& config_keys();

/// Keys that make-synth needs to be present in the file.
const std::vector<std::string>& synth_required_keys();

/// Parses `key = value` lines; '#' starts a comment. Throws ConfigError on
/// malformed lines and duplicate keys.
std::map<std::string, std::string> parse_config_text(std::string_view text);

/// Applies parsed entries onto the defaults. Throws ConfigError naming the
/// key for unknown keys or unparsable values.
PipelineConfig make_config(const std::map<std::string, std::string>& entries);

PipelineConfig load_config(const std::filesystem::path& path, std::map<std::string, std::string>* entries = nullptr);

/// Renders the key table for --help.
std::string config_help();

}  // namespace clup

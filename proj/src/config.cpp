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

#include "clup/config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <sstream>

namespace clup {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError("key '" + key + "': cannot parse '" + value + "' as " + expected);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto v = trim(value);
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) {
    bad_value(key, value, std::is_floating_point_v<T> ? "a number" : "a non-negative integer");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  const auto v = trim(value);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, value, "a boolean");
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& value) {
  std::vector<T> out;
  std::string_view rest = value;
  while (true) {
    const auto comma = rest.find(',');
    out.push_back(parse_number<T>(key, std::string(rest.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  return out;
}

using Setter = std::function<void(PipelineConfig&, const std::string& key, const std::string& value)>;

struct KeyEntry {
  ConfigKey key;
  Setter set;
};

template <typename T>
Setter number(T PipelineConfig::*member) {
  return [member](PipelineConfig& c, const std::string& k, const std::string& v) {
    c.*member = parse_number<T>(k, v);
  };
}

template <typename F>
Setter with(F f) {
  return [f](PipelineConfig& c, const std::string& k, const std::string& v) { f(c, k, v); };
}

Setter artifact(const std::string& name) {
  return [name](PipelineConfig& c, const std::string&, const std::string& v) { c.paths[name] = std::string(trim(v)); };
}

const std::vector<KeyEntry>& key_table() {
  static const std::vector<KeyEntry> table = [] {
    std::vector<KeyEntry> t;
    auto add = [&t](std::string name, std::string def, std::string help, Setter set) {
      t.push_back({{std::move(name), std::move(def), std::move(help)}, std::move(set)});
    };
    using P = PipelineConfig;
    add("seed", "0", "master seed; every stage derives its own stream", number(&P::seed));

    add("num_classes", "7", "class count N", with([](P& c, auto& k, auto& v) {
          c.synth.num_classes = parse_number<std::uint32_t>(k, v);
        }));
    add("input_dim", "16", "raw input dimension D", with([](P& c, auto& k, auto& v) {
          c.synth.input_dim = parse_number<std::uint32_t>(k, v);
        }));
    add("samples_per_class_source", "300,150,80,300,200,120,250", "source samples per class (N entries)",
        with([](P& c, auto& k, auto& v) { c.synth.samples_per_class_source = parse_list<std::uint32_t>(k, v); }));
    add("samples_per_class_target", "250,120,60,350,200,100,300", "target samples per class (N entries)",
        with([](P& c, auto& k, auto& v) { c.synth.samples_per_class_target = parse_list<std::uint32_t>(k, v); }));
    add("shift_rotation", "0.7", "target rotation angle in radians over coordinate pairs",
        with([](P& c, auto& k, auto& v) { c.synth.shift_rotation = parse_number<double>(k, v); }));
    add("shift_translation", "3.0", "length of each class's target offset",
        with([](P& c, auto& k, auto& v) { c.synth.shift_translation = parse_number<double>(k, v); }));
    add("noise_sigma", "1.0", "within-class standard deviation",
        with([](P& c, auto& k, auto& v) { c.synth.noise_sigma = parse_number<double>(k, v); }));

    add("hidden_dim", "64", "extractor hidden width", number(&P::hidden_dim));
    add("feature_dim", "32", "extractor output width Z", number(&P::feature_dim));

    add("clusters", "70", "k-means cluster count K", number(&P::clusters));
    add("min_clusters_per_class", "10", "over-clustering floor: K must be >= this * num_classes",
        number(&P::min_clusters_per_class));
    add("purity_q", "0.8", "per-class purity quantile Q in (0, 1)", number(&P::purity_q));
    add("kmeans_max_iter", "300", "Lloyd iteration cap", number(&P::kmeans_max_iter));
    add("kmeans_tol", "1e-6", "centroid movement stopping tolerance", number(&P::kmeans_tol));
    add("kmeans_normalize", "false", "L2-normalise features before k-means",
        with([](P& c, auto& k, auto& v) { c.kmeans_normalize = parse_bool(k, v); }));

    auto train_keys = [&](const std::string& prefix, TrainConfig P::*tc, const TrainConfig& d) {
      auto fmt = [](double x) {
        std::ostringstream s;
        s << x;
        return s.str();
      };
      add(prefix + "_epochs", std::to_string(d.epochs), prefix + " training epochs",
          with([tc](P& c, auto& k, auto& v) { (c.*tc).epochs = parse_number<std::size_t>(k, v); }));
      add(prefix + "_batch_size", std::to_string(d.batch_size), prefix + " mini-batch size",
          with([tc](P& c, auto& k, auto& v) { (c.*tc).batch_size = parse_number<std::size_t>(k, v); }));
      add(prefix + "_lr0", fmt(d.lr0), prefix + " initial learning rate",
          with([tc](P& c, auto& k, auto& v) { (c.*tc).lr0 = parse_number<double>(k, v); }));
      add(prefix + "_lr_min", fmt(d.lr_min), prefix + " final learning rate",
          with([tc](P& c, auto& k, auto& v) { (c.*tc).lr_min = parse_number<double>(k, v); }));
      add(prefix + "_momentum", fmt(d.momentum), prefix + " SGD momentum",
          with([tc](P& c, auto& k, auto& v) { (c.*tc).momentum = parse_number<double>(k, v); }));
    };
    train_keys("source", &P::source_train, TrainConfig{30, 32, 0.05, 0.0, 0.9, 0});
    add("source_val_fraction", "0.2", "share of source rows held out for validation",
        number(&P::source_val_fraction));
    train_keys("target", &P::target_train, TrainConfig{50, 32, 0.01, 0.0, 0.9, 0});
    add("target_freeze_extractor", "false", "train only the new head in stage 3",
        with([](P& c, auto& k, auto& v) { c.target_freeze_extractor = parse_bool(k, v); }));

    add("ssl_epochs", "100", "self-supervised epochs",
        with([](P& c, auto& k, auto& v) { c.ssl.epochs = parse_number<std::size_t>(k, v); }));
    add("ssl_batch_size", "64", "self-supervised batch size (>= 2)",
        with([](P& c, auto& k, auto& v) { c.ssl.batch_size = parse_number<std::size_t>(k, v); }));
    add("ssl_temperature", "0.1", "softmax temperature of prototype scores",
        with([](P& c, auto& k, auto& v) { c.ssl.temperature = parse_number<double>(k, v); }));
    add("ssl_prototypes", "0", "prototype count (0 means 4 * num_classes)", number(&P::ssl_prototypes));
    add("ssl_views", "2", "augmented views per sample (>= 2)",
        with([](P& c, auto& k, auto& v) { c.ssl.augment.num_views = parse_number<std::size_t>(k, v); }));
    add("ssl_noise_sigma", "0.1", "additive Gaussian noise of the augmentation",
        with([](P& c, auto& k, auto& v) { c.ssl.augment.noise_sigma = parse_number<double>(k, v); }));
    add("ssl_dropout", "0.1", "coordinate drop probability of the augmentation",
        with([](P& c, auto& k, auto& v) { c.ssl.augment.dropout_prob = parse_number<double>(k, v); }));
    add("ssl_scale_lo", "0.8", "lower bound of the per-sample scale",
        with([](P& c, auto& k, auto& v) { c.ssl.augment.scale_lo = parse_number<double>(k, v); }));
    add("ssl_scale_hi", "1.2", "upper bound of the per-sample scale",
        with([](P& c, auto& k, auto& v) { c.ssl.augment.scale_hi = parse_number<double>(k, v); }));
    add("sinkhorn_epsilon", "0.05", "entropic regularisation of code assignment",
        with([](P& c, auto& k, auto& v) { c.ssl.sinkhorn.epsilon = parse_number<double>(k, v); }));
    add("sinkhorn_iterations", "3", "Sinkhorn-Knopp iterations per batch",
        with([](P& c, auto& k, auto& v) { c.ssl.sinkhorn.iterations = parse_number<std::size_t>(k, v); }));
    add("ssl_lr0", "0.05", "self-supervised initial learning rate",
        with([](P& c, auto& k, auto& v) { c.ssl.lr0 = parse_number<double>(k, v); }));
    add("ssl_lr_min", "0", "self-supervised final learning rate",
        with([](P& c, auto& k, auto& v) { c.ssl.lr_min = parse_number<double>(k, v); }));
    add("ssl_momentum", "0.9", "self-supervised SGD momentum",
        with([](P& c, auto& k, auto& v) { c.ssl.momentum = parse_number<double>(k, v); }));

    add("sweep_thresholds", "0.5,0.6,0.7,0.8,0.9", "thresholds / Q values visited by sweep",
        with([](P& c, auto& k, auto& v) { c.sweep_thresholds = parse_list<double>(k, v); }));

    add("source_data", "source.clup", "labelled source set", artifact("source_data"));
    add("target_data", "target.clup", "target set (labels used for evaluation only)", artifact("target_data"));
    add("source_model", "source_model.cmdl", "source extractor + head checkpoint", artifact("source_model"));
    add("centroids", "centroids.cmdl", "k-means centroids of stage 1", artifact("centroids"));
    add("subset", "subset.clup", "refined subset (index column + pseudo-labels)", artifact("subset"));
    add("purity_report", "purity_report.txt", "stage 1 report", artifact("purity_report"));
    add("ssl_model", "ssl_model.cmdl", "self-supervised extractor + prototype bank", artifact("ssl_model"));
    add("ssl_loss_log", "ssl_loss.csv", "per-epoch self-supervised loss", artifact("ssl_loss_log"));
    add("target_model", "target_model.cmdl", "adapted target classifier", artifact("target_model"));
    add("metrics", "metrics.txt", "stage 3 metrics", artifact("metrics"));
    add("sweep_csv", "sweep.csv", "sweep output", artifact("sweep_csv"));
    add("projection_csv", "projection.csv", "2D projection output", artifact("projection_csv"));
    return t;
  }();
  return table;
}

}  // namespace

PipelineConfig::PipelineConfig() {
  // The key table is the single source of defaults.
  for (const auto& entry : key_table()) entry.set(*this, entry.key.name, entry.key.default_value);
}

std::filesystem::path PipelineConfig::path(const std::string& name) const {
  const auto it = paths.find(name);
  if (it == paths.end()) throw ConfigError("no artifact named '" + name + "'");
  const std::filesystem::path p(it->second);
  return p.is_absolute() ? p : out_dir / p;
}

void PipelineConfig::validate() const {
  synth.validate();
  if (hidden_dim < 1 || feature_dim < 1) throw ConfigError("hidden_dim and feature_dim must be >= 1");
  if (min_clusters_per_class < 1) throw ConfigError("min_clusters_per_class must be >= 1");
  if (clusters < static_cast<std::uint64_t>(min_clusters_per_class) * num_classes()) {
    throw ConfigError("clusters (K) must be >= min_clusters_per_class * num_classes = " +
                      std::to_string(static_cast<std::uint64_t>(min_clusters_per_class) * num_classes()));
  }
  if (!(purity_q > 0.0 && purity_q < 1.0)) throw ConfigError("purity_q must lie in (0, 1)");
  if (!(source_val_fraction >= 0.0 && source_val_fraction < 1.0)) {
    throw ConfigError("source_val_fraction must lie in [0, 1)");
  }
  source_train.validate();
  target_train.validate();
  ssl.validate();
  if (sweep_thresholds.empty()) throw ConfigError("sweep_thresholds must not be empty");
  for (double t : sweep_thresholds) {
    if (!(t > 0.0 && t < 1.0)) throw ConfigError("sweep_thresholds entries must lie in (0, 1)");
  }
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& e : key_table()) k.push_back(e.key);
    return k;
  }();
  return keys;
}

const std::vector<std::string>& synth_required_keys() {
  static const std::vector<std::string> keys{"seed",
                                             "num_classes",
                                             "input_dim",
                                             "samples_per_class_source",
                                             "samples_per_class_target",
                                             "shift_rotation",
                                             "shift_translation",
                                             "noise_sigma"};
  return keys;
}

std::map<std::string, std::string> parse_config_text(std::string_view text) {
  std::map<std::string, std::string> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    if (!out.emplace(key, value).second) throw ConfigError("duplicate key '" + key + "'");
  }
  return out;
}

PipelineConfig make_config(const std::map<std::string, std::string>& entries) {
  PipelineConfig cfg;
  for (const auto& [key, value] : entries) {
    const auto& table = key_table();
    const auto it = std::find_if(table.begin(), table.end(), [&](const KeyEntry& e) { return e.key.name == key; });
    if (it == table.end()) throw ConfigError("unknown key '" + key + "'");
    it->set(cfg, key, value);
  }
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path, std::map<std::string, std::string>* entries) {
  const auto bytes = read_file(path);
  auto parsed = parse_config_text(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  auto cfg = make_config(parsed);
  if (entries) *entries = std::move(parsed);
  return cfg;
}

std::string config_help() {
  std::ostringstream out;
  out << "Config keys (key = value, '#' comments):\n";
  for (const auto& k : config_keys()) {
    out << "  " << k.name << " = " << k.default_value << "\n      " << k.help << "\n";
  }
  return out.str();
}

}  // namespace clup

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

// Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
// (with runtime against its budget) and exits non-zero if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <typeinfo>

#include "clup/clustering.hpp"
#include "clup/config.hpp"
#include "clup/pipeline.hpp"
#include "clup/pseudo_label.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace clup;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

PipelineConfig benchmark_config(std::uint64_t seed) {
  auto cfg = load_config(CLUP_DEFAULT_CONFIG);
  cfg.seed = seed;
  cfg.synth.seed = seed;
  cfg.validate();
  return cfg;
}

// 1. Majority label and purity against brute-force counting.
Outcome purity_oracle() {
  Outcome o;
  for (std::uint64_t t = 0; t < 200; ++t) {
    std::mt19937_64 rng(mix_seed(1, t));
    const std::size_t m = 1 + rng() % 1000, k = 1 + rng() % 100, n = 1 + rng() % 10;
    Assignments a(m);
    Labels y(m);
    for (std::size_t i = 0; i < m; ++i) {
      a[i] = static_cast<std::uint32_t>(rng() % k);
      y[i] = static_cast<std::uint32_t>(rng() % n);
    }
    const auto h = oracle::histogram(a, y, k, n);
    const auto majority = cluster_majority(a, y, k);
    const auto purity = cluster_purity(a, y, majority, k);
    for (std::size_t j = 0; j < k; ++j) {
      std::size_t size = 0, best = 0;
      std::uint32_t label = kNoLabel;
      for (std::size_t c = 0; c < n; ++c) {
        size += h[j][c];
        if (h[j][c] > best) best = h[j][c], label = static_cast<std::uint32_t>(c);
      }
      o.require(majority[j] == label, "majority mismatch in trial " + std::to_string(t));
      const double want = size ? static_cast<double>(best) / static_cast<double>(size) : 0.0;
      o.require(purity[j] == want, "purity mismatch in trial " + std::to_string(t));
    }
  }
  if (o.pass) o.detail = "200 instances exact";
  return o;
}

// 2. Per-class thresholds against a sort oracle; refine keeps exactly the
// clusters reaching their class threshold.
Outcome threshold_oracle() {
  Outcome o;
  for (std::uint64_t t = 0; t < 200; ++t) {
    std::mt19937_64 rng(mix_seed(2, t));
    const std::size_t k = 1 + rng() % 100, n = 1 + rng() % 10;
    const std::uint64_t q_num = 1 + rng() % 99;
    const double q = static_cast<double>(q_num) / 100.0;
    Labels cl(k);
    std::vector<double> pur(k);
    for (std::size_t j = 0; j < k; ++j) {
      cl[j] = rng() % 20 == 0 ? kNoLabel : static_cast<std::uint32_t>(rng() % n);
      const std::uint64_t size = 1 + rng() % 50;
      pur[j] = cl[j] == kNoLabel ? 0.0 : static_cast<double>(1 + rng() % size) / static_cast<double>(size);
    }
    const auto tau = per_class_threshold(cl, pur, q, n);
    std::vector<char> class_present(n, 0);
    for (std::size_t c = 0; c < n; ++c) {
      std::vector<double> vals;
      for (std::size_t j = 0; j < k; ++j)
        if (cl[j] == c) vals.push_back(pur[j]);
      class_present[c] = !vals.empty();
      const double want = vals.empty() ? std::numeric_limits<double>::infinity()
                                       : oracle::nearest_rank_quantile(vals, q_num, 100);
      o.require(tau[c] == want, "threshold mismatch in trial " + std::to_string(t));
    }
    if (std::none_of(class_present.begin(), class_present.end(), [](char c) { return c; })) continue;

    Assignments a;
    for (std::size_t j = 0; j < k; ++j) a.push_back(static_cast<std::uint32_t>(j));
    const auto r = refine(a, cl, pur, tau);
    std::vector<std::uint32_t> want;
    std::vector<char> kept(n, 0);
    for (std::size_t j = 0; j < k; ++j) {
      if (cl[j] != kNoLabel && pur[j] >= tau[cl[j]]) want.push_back(static_cast<std::uint32_t>(j));
    }
    for (auto j : r.retained_clusters) kept[cl[j]] = 1;
    o.require(r.retained_clusters == want, "retained set mismatch in trial " + std::to_string(t));
    o.require(kept == class_present, "a non-empty class lost all clusters in trial " + std::to_string(t));
  }
  if (o.pass) o.detail = "200 instances exact";
  return o;
}

// 3. K-means monotone inertia, K = M, and the enumeration optimum.
Outcome kmeans_checks() {
  Outcome o;
  for (std::uint64_t t = 0; t < 50; ++t) {
    std::mt19937_64 rng(mix_seed(3, t));
    const Index m = 50 + static_cast<Index>(rng() % 300);
    const Index k = 2 + static_cast<Index>(rng() % 30);
    const Matrix<double> x = gradcheck::random_matrix(m, 2 + static_cast<Index>(rng() % 8), rng);
    const auto model = kmeans_fit(x, k, {300, 1e-6, t});
    for (std::size_t i = 1; i < model.inertia_history.size(); ++i) {
      o.require(model.inertia_history[i] <= model.inertia_history[i - 1],
                "inertia increased in run " + std::to_string(t));
    }
  }
  std::mt19937_64 rng(33);
  const Matrix<double> x = gradcheck::random_matrix(25, 3, rng);
  o.require(kmeans_fit(x, 25, {300, 1e-6, 1}).inertia == 0.0, "K = M inertia not 0");
  Matrix<double> four(4, 2);
  four << 0, 0, 0, 1, 10, 0, 10, 1;
  const double inertia = kmeans_fit(four, 2, {300, 1e-6, 0}).inertia;
  o.require(std::abs(inertia - 1.0) <= 1e-9, fmt("4-point inertia %.12g", inertia));
  if (o.pass) o.detail = "50 runs monotone, K=M inertia 0, 4-point inertia " + fmt("%.12g", inertia);
  return o;
}

// 4. Sinkhorn marginals. Half the trials use i.i.d. uniform [0, 1) scores,
// half use cosine similarities between random unit vectors in the default
// feature dimension, which is what the pretraining stage feeds in.
Outcome sinkhorn_checks() {
  Outcome o;
  double worst_row = 0.0, worst_col = 0.0;
  for (std::uint64_t t = 0; t < 50; ++t) {
    std::mt19937_64 rng(mix_seed(4, t));
    Matrix<double> scores(32, 16);
    if (t % 2 == 0) {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      scores = scores.unaryExpr([&](double) { return u(rng); });
    } else {
      const Matrix<double> z = l2_normalize_rows(gradcheck::random_matrix(32, 32, rng));
      const Matrix<double> p = l2_normalize_rows(gradcheck::random_matrix(16, 32, rng));
      scores = z * p.transpose();
    }
    const auto plan = sinkhorn_plan(scores, {0.05, 50});
    const Matrix<double> codes = plan * 32.0;
    for (Index i = 0; i < 32; ++i) worst_row = std::max(worst_row, std::abs(plan.row(i).sum() - 1.0 / 32.0));
    for (Index j = 0; j < 16; ++j) worst_col = std::max(worst_col, std::abs(codes.col(j).sum() - 32.0 / 16.0));
  }
  o.require(worst_row < 1e-4, fmt("row marginal error %.3g", worst_row));
  o.require(worst_col < 1e-4, fmt("column marginal error %.3g", worst_col));
  const auto uniform = sinkhorn_codes(Matrix<double>::Constant(32, 16, 0.7), {0.05, 50});
  const double dev = (uniform.array() - 1.0 / 16.0).abs().maxCoeff();
  o.require(dev < 1e-9, fmt("constant-score deviation %.3g", dev));
  if (o.pass) o.detail = fmt("max row error %.2e, max column error %.2e, constant deviation %.2e", worst_row, worst_col, dev);
  return o;
}

// 5. Analytic gradients against central differences.
Outcome gradient_checks() {
  Outcome o;
  double ce = 0.0, sw = 0.0;
  for (std::uint64_t t = 0; t < 20; ++t) {
    ce = std::max(ce, gradcheck::classifier_max_error(mix_seed(5, t)));
    sw = std::max(sw, gradcheck::swapped_max_error(mix_seed(6, t)));
  }
  o.require(ce < 1e-4, fmt("cross-entropy max relative error %.3g", ce));
  o.require(sw < 1e-4, fmt("swapped-loss max relative error %.3g", sw));
  if (o.pass) o.detail = fmt("max relative error: cross-entropy %.2e, swapped %.2e", ce, sw);
  return o;
}

// 6. Purity vs confidence refinement at matched coverage.
Outcome purity_vs_confidence() {
  Outcome o;
  const std::vector<double> qs{0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<double> purity(qs.size(), 0.0), confidence(qs.size(), 0.0), coverage(qs.size(), 0.0);
  const int seeds = 5;
  for (int s = 0; s < seeds; ++s) {
    const auto cfg = benchmark_config(static_cast<std::uint64_t>(s));
    const auto [source, target] = synth_domains(cfg.synth);
    const auto src = train_source(source, cfg);
    const auto stage = cluster_target(src.model, target, cfg);
    for (std::size_t i = 0; i < qs.size(); ++i) {
      const auto p = subset_accuracy(purity_refine(stage, qs[i], cfg.num_classes()), *target.labels);
      const auto c = subset_accuracy(confidence_refine_at_coverage(stage.sample, p.coverage), *target.labels);
      purity[i] += p.accuracy / seeds;
      confidence[i] += c.accuracy / seeds;
      coverage[i] += p.coverage / seeds;
    }
  }
  std::string table;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    table += fmt(" Q=%.1f:%.4f/%.4f", qs[i], purity[i], confidence[i]);
    o.require(purity[i] >= confidence[i] - 0.05, fmt("Q=%.1f purity %.4f < confidence %.4f - 0.05", qs[i], purity[i], confidence[i]));
    if (i > 0) {
      o.require(purity[i] >= purity[i - 1] - 0.02,
                fmt("subset accuracy drops from %.4f to %.4f at Q=%.1f", purity[i - 1], purity[i], qs[i]));
    }
  }
  if (o.pass) o.detail = "purity/confidence subset accuracy" + table;
  else o.detail += " |" + table;
  return o;
}

// 7. Full pipeline vs source-only transfer and vs confidence refinement.
Outcome full_pipeline_gain() {
  Outcome o;
  double zero_shot = 0.0, clup = 0.0, confidence = 0.0;
  const int seeds = 5;
  for (int s = 0; s < seeds; ++s) {
    const auto cfg = benchmark_config(static_cast<std::uint64_t>(s));
    const auto [source, target] = synth_domains(cfg.synth);
    const auto src = train_source(source, cfg);
    const auto stage = cluster_target(src.model, target, cfg);
    const auto ssl = pretrain_ssl(target, cfg);
    zero_shot += evaluate(src.model, target, cfg.num_classes()).top1 / seeds;
    const auto purity_subset = purity_refine(stage, cfg.purity_q, cfg.num_classes());
    clup += evaluate(train_target(ssl.extractor, target, purity_subset, cfg), target, cfg.num_classes()).top1 / seeds;
    const auto conf_subset = confidence_refine(stage.sample, cfg.purity_q);
    confidence +=
        evaluate(train_target(ssl.extractor, target, conf_subset, cfg), target, cfg.num_classes()).top1 / seeds;
  }
  o.detail = fmt("top-1 full %.4f, source-only %.4f, ", clup, zero_shot) +
             fmt("self-supervised + confidence %.4f", confidence);
  o.require(clup >= zero_shot + 0.02, "gain over source-only below 0.02: " + o.detail);
  o.require(clup >= confidence + 0.02, "gain over confidence refinement below 0.02: " + o.detail);
  return o;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(CLUP_CLI_PATH) + " " + args + " > " + log.string() + " 2> /dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// 8. Bitwise reproducibility of every subcommand, with stages 1 and 2 run
// in opposite orders in the two runs.
Outcome determinism() {
  Outcome o;
  const auto root = fs::temp_directory_path() / "clup_acceptance_determinism";
  fs::remove_all(root);
  const std::vector<std::vector<std::string>> orders{
      {"make-synth", "train-source", "pseudo-label", "ssl-pretrain", "train-target", "eval", "sweep", "project"},
      {"make-synth", "train-source", "ssl-pretrain", "pseudo-label", "train-target", "eval", "sweep", "project"}};
  std::vector<fs::path> dirs;
  for (std::size_t r = 0; r < orders.size(); ++r) {
    const auto dir = root / ("run" + std::to_string(r));
    fs::create_directories(dir);
    dirs.push_back(dir);
    for (const auto& cmd : orders[r]) {
      const std::string args = "--config " + std::string(CLUP_DEFAULT_CONFIG) + " --out " + dir.string() + " " + cmd;
      const int code = run_cli(args, dir / (cmd + ".stdout"));
      o.require(code == 0, cmd + " exited with " + std::to_string(code));
    }
  }
  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(dirs[0])) {
    const auto other = dirs[1] / entry.path().filename();
    const bool same = fs::exists(other) && read_file(entry.path()) == read_file(other);
    o.require(same, entry.path().filename().string() + " differs between runs");
    ++compared;
  }
  o.require(compared >= 18, "expected at least 18 artifacts, found " + std::to_string(compared));
  if (o.pass) o.detail = std::to_string(compared) + " files bitwise identical across runs with swapped stage order";
  return o;
}

// 9. Corrupted containers raise their named error; valid files round-trip.
Outcome format_robustness() {
  Outcome o;
  auto expect = [&](const std::function<void()>& f, const std::type_info& want, const std::string& label) {
    try {
      f();
      o.require(false, label + ": no error raised");
    } catch (const Error& e) {
      o.require(typeid(e) == want, label + ": raised " + typeid(e).name());
    }
  };
  auto reseal = [](std::vector<std::uint8_t>& b) {
    std::uint8_t x = 0;
    for (std::size_t i = 0; i + 1 < b.size(); ++i) x ^= b[i];
    b.back() = x;
  };
  std::mt19937_64 rng(9);
  FeatureSet set;
  set.data = gradcheck::random_matrix(17, 5, rng).cast<float>();
  set.labels = Labels(17, 3);
  const Index dims[] = {5, 9, 4};
  const Classifier model{make_mlp<float>(dims, 1), make_head<float>(3, 4, 2)};

  const std::vector<std::pair<std::string, std::vector<std::uint8_t>>> files{
      {"matrix", encode_matrix(set)}, {"model", encode_model(pack_classifier(model))}};
  // First weight byte: after magic, version, flags and dims (plus the layer
  // count and first layer dims for models).
  const std::map<std::string, std::size_t> payload_offset{{"matrix", 24}, {"model", 18}};
  for (const auto& [name, good] : files) {
    auto decode = [&, name = name](const std::vector<std::uint8_t>& b) {
      if (name == "matrix") decode_matrix(b);
      else decode_model(b);
    };
    auto magic = good;
    magic[0] = 'X';
    reseal(magic);
    expect([&] { decode(magic); }, typeid(BadMagicError), name + " magic");
    const std::vector<std::uint8_t> truncated(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(good.size() / 2));
    expect([&] { decode(truncated); }, typeid(TruncatedError), name + " truncation");
    // A flipped payload byte and a flipped checksum byte. Header dimension
    // fields are structure, not payload: corrupting them reads as truncation.
    auto flipped = good;
    flipped[payload_offset.at(name) + 2] ^= 0x01;
    expect([&] { decode(flipped); }, typeid(ChecksumError), name + " payload flip");
    auto bad_sum = good;
    bad_sum.back() ^= 0x80;
    expect([&] { decode(bad_sum); }, typeid(ChecksumError), name + " checksum byte flip");
  }

  const auto dir = fs::temp_directory_path() / "clup_acceptance_formats";
  fs::remove_all(dir);
  fs::create_directories(dir);
  save_matrix(set, dir / "m.clup");
  const auto back = load_matrix(dir / "m.clup");
  o.require(back == set && encode_matrix(back) == files[0].second, "matrix round trip not bit-exact");
  save_model(pack_classifier(model), dir / "c.cmdl");
  o.require(encode_model(load_model(dir / "c.cmdl")) == files[1].second, "model round trip not bit-exact");
  if (o.pass) o.detail = "magic/truncation/checksum errors distinct for both containers; round trips bit-exact";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "cluster majority and purity oracle", 5, purity_oracle},
      {2, "per-class threshold and refinement oracle", 5, threshold_oracle},
      {3, "k-means inertia and optimum", 10, kmeans_checks},
      {4, "Sinkhorn marginals", 5, sinkhorn_checks},
      {5, "finite-difference gradient checks", 30, gradient_checks},
      {6, "purity vs confidence at matched coverage", 300, purity_vs_confidence},
      {7, "full pipeline beats source-only and confidence baselines", 600, full_pipeline_gain},
      {8, "bitwise determinism and stage order independence", 300, determinism},
      {9, "container format robustness", 2, format_robustness},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs >= c.budget_s) {
      out.pass = false;
      out.detail += fmt(" | over time budget (%.1fs >= %.0fs)", secs, c.budget_s);
    }
    failed += !out.pass;
    std::printf("[%s] criterion %d: %s (%.2fs / %.0fs) %s\n", out.pass ? "PASS" : "FAIL", c.id, c.name, secs,
                c.budget_s, out.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

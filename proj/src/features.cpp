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

#include "clup/features.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "byte_io.hpp"

namespace clup {

namespace {

constexpr std::uint8_t kMagic[4] = {0x43, 0x4C, 0x55, 0x50};  // "CLUP"

}  // namespace

void FeatureSet::validate(std::uint32_t num_classes) const {
  if (rows() < 1 || cols() < 1) {
    throw ShapeError("feature set must be non-empty, got " + shape_string(rows(), cols()));
  }
  if (!data.allFinite()) throw NumericError("feature set contains non-finite values");
  if (labels) {
    if (static_cast<Index>(labels->size()) != rows()) {
      throw ShapeError("label count " + std::to_string(labels->size()) + " does not match " +
                       std::to_string(rows()) + " rows");
    }
    if (num_classes > 0) {
      for (std::size_t i = 0; i < labels->size(); ++i) {
        if ((*labels)[i] >= num_classes) {
          throw RangeError("label " + std::to_string((*labels)[i]) + " at row " + std::to_string(i) +
                           " is outside [0, " + std::to_string(num_classes) + ")");
        }
      }
    }
  }
}

FeatureSet FeatureSet::gather(std::span<const std::uint32_t> indices) const {
  FeatureSet out;
  out.data.resize(static_cast<Index>(indices.size()), cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= rows()) throw RangeError("row index " + std::to_string(indices[r]) + " out of range");
    out.data.row(static_cast<Index>(r)) = data.row(indices[r]);
  }
  if (labels) {
    Labels picked;
    picked.reserve(indices.size());
    for (auto i : indices) picked.push_back((*labels)[i]);
    out.labels = std::move(picked);
  }
  return out;
}

bool FeatureSet::operator==(const FeatureSet& other) const {
  if (rows() != other.rows() || cols() != other.cols() || labels != other.labels) return false;
  // Bitwise comparison; NaN payloads never reach a validated set.
  return std::memcmp(data.data(), other.data.data(), sizeof(float) * static_cast<std::size_t>(data.size())) == 0;
}

std::vector<std::uint8_t> encode_matrix(const FeatureSet& set) {
  detail::ByteWriter w;
  w.put_bytes(kMagic);
  w.put<std::uint16_t>(kMatrixFormatVersion);
  w.put<std::uint16_t>(set.labels ? kMatrixFlagLabels : 0);
  w.put<std::uint64_t>(static_cast<std::uint64_t>(set.rows()));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(set.cols()));
  for (Index r = 0; r < set.rows(); ++r) {
    for (Index c = 0; c < set.cols(); ++c) w.put<float>(set.data(r, c));
  }
  if (set.labels) {
    for (auto label : *set.labels) w.put<std::uint32_t>(label);
  }
  return w.finish_with_checksum();
}

FeatureSet decode_matrix(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  r.require(4, "magic");
  if (!std::equal(kMagic, kMagic + 4, bytes.begin())) throw BadMagicError("bad magic: not a CLUP matrix file");
  for (int i = 0; i < 4; ++i) r.get<std::uint8_t>("magic");

  const auto version = r.get<std::uint16_t>("version");
  if (version != kMatrixFormatVersion) {
    throw BadVersionError("unsupported CLUP matrix version " + std::to_string(version));
  }
  const auto flags = r.get<std::uint16_t>("flags");
  if (flags & ~kMatrixFlagLabels) throw FormatError("reserved flag bits set in CLUP matrix header");
  const auto rows = r.get<std::uint64_t>("rows");
  const auto cols = r.get<std::uint64_t>("cols");
  if (rows == 0 || cols == 0) throw FormatError("CLUP matrix has zero rows or columns");

  constexpr std::uint64_t kLimit = std::uint64_t{1} << 40;
  if (rows > kLimit || cols > kLimit || rows * cols > kLimit) {
    throw FormatError("CLUP matrix dimensions " + std::to_string(rows) + "x" + std::to_string(cols) +
                      " are implausibly large");
  }
  const bool has_labels = flags & kMatrixFlagLabels;
  const std::uint64_t body = rows * cols * 4 + (has_labels ? rows * 4 : 0);
  if (r.remaining() < body + 1) throw TruncatedError("truncated CLUP matrix payload");
  if (r.remaining() > body + 1) throw FormatError("trailing bytes after CLUP matrix checksum");
  if (detail::xor_bytes(bytes.first(bytes.size() - 1)) != bytes.back()) {
    throw ChecksumError("CLUP matrix checksum mismatch");
  }

  FeatureSet set;
  set.data.resize(static_cast<Index>(rows), static_cast<Index>(cols));
  for (Index i = 0; i < set.rows(); ++i) {
    for (Index j = 0; j < set.cols(); ++j) {
      const float v = r.get<float>("payload");
      if (!std::isfinite(v)) {
        throw NonFiniteError("non-finite value at row " + std::to_string(i) + ", column " + std::to_string(j));
      }
      set.data(i, j) = v;
    }
  }
  if (has_labels) {
    Labels labels(rows);
    for (auto& l : labels) l = r.get<std::uint32_t>("labels");
    set.labels = std::move(labels);
  }
  return set;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

void save_matrix(const FeatureSet& set, const std::filesystem::path& path) {
  set.validate();
  write_file(path, encode_matrix(set));
}

FeatureSet load_matrix(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_matrix(bytes);
  } catch (const BadMagicError& e) {
    throw BadMagicError(path.string() + ": " + e.what());
  } catch (const BadVersionError& e) {
    throw BadVersionError(path.string() + ": " + e.what());
  } catch (const TruncatedError& e) {
    throw TruncatedError(path.string() + ": " + e.what());
  } catch (const ChecksumError& e) {
    throw ChecksumError(path.string() + ": " + e.what());
  } catch (const NonFiniteError& e) {
    throw NonFiniteError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

FeatureSet parse_csv(std::string_view text, bool has_labels) {
  std::vector<float> values;
  Labels labels;
  std::size_t width = 0;
  std::size_t rows = 0;
  std::size_t line_no = 0;

  while (!text.empty()) {
    ++line_no;
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (has_labels && fields.size() < 2) throw ParseError(line_no, "expected at least one feature and a label");
    const std::size_t n_features = has_labels ? fields.size() - 1 : fields.size();
    if (rows == 0) {
      width = n_features;
    } else if (n_features != width) {
      throw ParseError(line_no, "ragged row: expected " + std::to_string(width) + " features, found " +
                                    std::to_string(n_features));
    }
    for (std::size_t f = 0; f < n_features; ++f) {
      auto field = fields[f];
      while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
      while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
      if (!field.empty() && field.front() == '+') field.remove_prefix(1);
      float v = 0.0f;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty() || !std::isfinite(v)) {
        throw ParseError(line_no, "non-numeric field '" + std::string(fields[f]) + "' in column " +
                                      std::to_string(f + 1));
      }
      values.push_back(v);
    }
    if (has_labels) {
      auto field = fields.back();
      while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
      while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
      std::uint32_t label = 0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), label);
      if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty()) {
        throw ParseError(line_no, "invalid label '" + std::string(fields.back()) + "'");
      }
      labels.push_back(label);
    }
    ++rows;
  }
  if (rows == 0) throw ParseError(line_no, "no data rows");

  FeatureSet set;
  set.data = Eigen::Map<const RowMatrix<float>>(values.data(), static_cast<Index>(rows), static_cast<Index>(width));
  if (has_labels) set.labels = std::move(labels);
  return set;
}

FeatureSet load_csv(const std::filesystem::path& path, bool has_labels) {
  const auto bytes = read_file(path);
  return parse_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), has_labels);
}

void save_csv(const FeatureSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << std::setprecision(std::numeric_limits<float>::max_digits10);
  for (Index r = 0; r < set.rows(); ++r) {
    for (Index c = 0; c < set.cols(); ++c) {
      if (c) out << ',';
      out << set.data(r, c);
    }
    if (set.labels) out << ',' << (*set.labels)[static_cast<std::size_t>(r)];
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void SynthConfig::validate() const {
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (input_dim < 1) throw ConfigError("input_dim must be >= 1");
  if (samples_per_class_source.size() != num_classes || samples_per_class_target.size() != num_classes) {
    throw ConfigError("per-class sample counts must have num_classes entries");
  }
  for (auto c : samples_per_class_source) {
    if (c < 1) throw ConfigError("per-class source counts must be >= 1");
  }
  for (auto c : samples_per_class_target) {
    if (c < 1) throw ConfigError("per-class target counts must be >= 1");
  }
  if (!(noise_sigma > 0.0) || !std::isfinite(noise_sigma)) throw ConfigError("noise_sigma must be > 0");
  if (!std::isfinite(shift_rotation) || !std::isfinite(shift_translation)) {
    throw ConfigError("shift parameters must be finite");
  }
}

namespace {

Vector<double> random_direction(std::mt19937_64& rng, Index dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector<double> v(dim);
  do {
    for (Index i = 0; i < dim; ++i) v(i) = normal(rng);
  } while (v.norm() == 0.0);
  return v.normalized();
}

FeatureSet sample_domain(const Matrix<double>& centers, std::span<const std::uint32_t> counts, double sigma,
                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::size_t total = 0;
  for (auto c : counts) total += c;

  FeatureSet set;
  set.data.resize(static_cast<Index>(total), centers.cols());
  Labels labels;
  labels.reserve(total);
  Index row = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    for (std::uint32_t s = 0; s < counts[k]; ++s, ++row) {
      for (Index d = 0; d < centers.cols(); ++d) {
        set.data(row, d) = static_cast<float>(centers(static_cast<Index>(k), d) + sigma * normal(rng));
      }
      labels.push_back(static_cast<std::uint32_t>(k));
    }
  }
  set.labels = std::move(labels);
  return set;
}

}  // namespace

DomainCenters synth_centers(const SynthConfig& cfg) {
  cfg.validate();
  const Index n = cfg.num_classes;
  const Index d = cfg.input_dim;
  const double radius = 10.0 * cfg.noise_sigma;

  DomainCenters out;
  out.source.resize(n, d);
  std::mt19937_64 center_rng(mix_seed(cfg.seed, 0));
  for (Index k = 0; k < n; ++k) out.source.row(k) = radius * random_direction(center_rng, d).transpose();

  // Givens rotations over (0,1), (2,3), ...; an odd trailing axis is untouched.
  out.target = out.source;
  const double c = std::cos(cfg.shift_rotation);
  const double s = std::sin(cfg.shift_rotation);
  for (Index a = 0; a + 1 < d; a += 2) {
    const Vector<double> x = out.target.col(a);
    const Vector<double> y = out.target.col(a + 1);
    out.target.col(a) = c * x - s * y;
    out.target.col(a + 1) = s * x + c * y;
  }

  std::mt19937_64 offset_rng(mix_seed(cfg.seed, 3));
  for (Index k = 0; k < n; ++k) {
    out.target.row(k) += cfg.shift_translation * random_direction(offset_rng, d).transpose();
  }
  return out;
}

std::pair<FeatureSet, FeatureSet> synth_domains(const SynthConfig& cfg) {
  const auto centers = synth_centers(cfg);
  auto source = sample_domain(centers.source, cfg.samples_per_class_source, cfg.noise_sigma, mix_seed(cfg.seed, 1));
  auto target = sample_domain(centers.target, cfg.samples_per_class_target, cfg.noise_sigma, mix_seed(cfg.seed, 2));
  return {std::move(source), std::move(target)};
}

}  // namespace clup

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
#include <optional>
#include <span>
#include <utility>

#include "clup/common.hpp"

namespace clup {

/// A dataset: M samples of dimension D, optionally labelled.
///
/// Storage is single precision, row-major, which is also the on-disk layout.
struct FeatureSet {
  RowMatrix<float> data;
  std::optional<Labels> labels;

  Index rows() const { return data.rows(); }
  Index cols() const { return data.cols(); }
  bool has_labels() const { return labels.has_value(); }

  /// Checks rows/cols >= 1, finite data, label count, and (when
  /// num_classes > 0) label range. Throws Error on violation.
  void validate(std::uint32_t num_classes = 0) const;

  /// Rows selected by `indices`, in order, with labels if present.
  FeatureSet gather(std::span<const std::uint32_t> indices) const;

  bool operator==(const FeatureSet& other) const;
};

// Binary container ("CLUP" matrix file), little-endian:
//   magic "CLUP" | version u16 = 1 | flags u16 (bit 0: labels present)
//   rows u64 | cols u64 | rows*cols f32 row-major | [rows u32 labels]
//   checksum u8 = XOR of all preceding bytes
inline constexpr std::uint16_t kMatrixFormatVersion = 1;
inline constexpr std::uint16_t kMatrixFlagLabels = 1u << 0;

/// Encodes to the binary container. Bytes are independent of host endianness.
std::vector<std::uint8_t> encode_matrix(const FeatureSet& set);

/// Decodes the binary container. Throws BadMagicError, BadVersionError,
/// FormatError (reserved flag bits, trailing bytes), TruncatedError,
/// ChecksumError, NonFiniteError.
FeatureSet decode_matrix(std::span<const std::uint8_t> bytes);

void save_matrix(const FeatureSet& set, const std::filesystem::path& path);
FeatureSet load_matrix(const std::filesystem::path& path);

/// Comma separated decimal rows; with `has_labels` the last column is a
/// non-negative integer class index. LF and CRLF line endings are accepted;
/// blank lines are skipped. Throws ParseError with the 1-based line number.
FeatureSet parse_csv(std::string_view text, bool has_labels);
FeatureSet load_csv(const std::filesystem::path& path, bool has_labels);

/// Writes rows with max_digits10 precision so parse_csv reads them back exactly.
void save_csv(const FeatureSet& set, const std::filesystem::path& path);

/// Reads the whole file. Throws IoError naming the path.
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Parameters of the synthetic two-domain generator.
struct SynthConfig {
  std::uint32_t num_classes = 7;
  std::uint32_t input_dim = 16;
  std::vector<std::uint32_t> samples_per_class_source;
  std::vector<std::uint32_t> samples_per_class_target;
  /// Givens angle (radians) applied to coordinate planes (0,1), (2,3), ...
  double shift_rotation = 0.0;
  /// Length of the per-class target offset vector.
  double shift_translation = 0.0;
  double noise_sigma = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Per-class centres of both domains, exposed for tests.
struct DomainCenters {
  Matrix<double> source;  // N x D
  Matrix<double> target;  // N x D
};

DomainCenters synth_centers(const SynthConfig& cfg);

/// Labelled source and target sets. Class centres lie on a sphere of radius
/// 10 * noise_sigma; target centres are the source centres rotated and then
/// offset per class. Samples are isotropic Gaussians around their centre.
/// Pure function of `cfg`.
std::pair<FeatureSet, FeatureSet> synth_domains(const SynthConfig& cfg);

}  // namespace clup

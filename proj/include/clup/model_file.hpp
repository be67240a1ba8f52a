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
#include <span>
#include <vector>

#include "clup/common.hpp"

namespace clup {

// Model container ("CMDL"), little-endian:
//   magic "CMDL" | version u16 = 1 | flags u16 | layer count u16
//   per layer: rows u32 | cols u32 | rows*cols f32 row-major | rows f32 bias
//   checksum u8 = XOR of all preceding bytes
inline constexpr std::uint16_t kModelFormatVersion = 1;
inline constexpr std::uint16_t kModelFlagHead = 1u << 0;       // last layer is a SoftmaxHead
inline constexpr std::uint16_t kModelFlagCentroids = 1u << 1;  // single layer holds cluster centroids
inline constexpr std::uint16_t kModelFlagPrototypes = 1u << 2; // last layer is a prototype bank

struct ModelLayer {
  Matrix<float> weight;
  Vector<float> bias;
};

struct ModelFile {
  std::uint16_t flags = 0;
  std::vector<ModelLayer> layers;
};

std::vector<std::uint8_t> encode_model(const ModelFile& model);
ModelFile decode_model(std::span<const std::uint8_t> bytes);
void save_model(const ModelFile& model, const std::filesystem::path& path);
ModelFile load_model(const std::filesystem::path& path);

}  // namespace clup

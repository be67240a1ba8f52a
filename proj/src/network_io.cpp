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

#include <cmath>

#include "byte_io.hpp"
#include "clup/network.hpp"

namespace clup {

namespace {

constexpr std::uint8_t kModelMagic[4] = {0x43, 0x4D, 0x44, 0x4C};  // "CMDL"
constexpr std::uint16_t kKnownModelFlags = kModelFlagHead | kModelFlagCentroids | kModelFlagPrototypes;

}  // namespace

std::vector<std::uint8_t> encode_model(const ModelFile& model) {
  if (model.layers.empty() || model.layers.size() > 0xFFFF) throw FormatError("model must have 1..65535 layers");
  detail::ByteWriter w;
  w.put_bytes(kModelMagic);
  w.put<std::uint16_t>(kModelFormatVersion);
  w.put<std::uint16_t>(model.flags);
  w.put<std::uint16_t>(static_cast<std::uint16_t>(model.layers.size()));
  for (const auto& layer : model.layers) {
    if (layer.bias.size() != layer.weight.rows()) throw ShapeError("layer bias length must equal weight rows");
    w.put<std::uint32_t>(static_cast<std::uint32_t>(layer.weight.rows()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(layer.weight.cols()));
    for (Index r = 0; r < layer.weight.rows(); ++r)
      for (Index c = 0; c < layer.weight.cols(); ++c) w.put<float>(layer.weight(r, c));
    for (Index r = 0; r < layer.bias.size(); ++r) w.put<float>(layer.bias(r));
  }
  return w.finish_with_checksum();
}

ModelFile decode_model(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  r.require(4, "magic");
  if (!std::equal(kModelMagic, kModelMagic + 4, bytes.begin())) throw BadMagicError("bad magic: not a CMDL model file");
  for (int i = 0; i < 4; ++i) r.get<std::uint8_t>("magic");
  const auto version = r.get<std::uint16_t>("version");
  if (version != kModelFormatVersion) throw BadVersionError("unsupported CMDL version " + std::to_string(version));

  ModelFile model;
  model.flags = r.get<std::uint16_t>("flags");
  if (model.flags & ~kKnownModelFlags) throw FormatError("reserved flag bits set in CMDL header");
  const auto count = r.get<std::uint16_t>("layer count");
  if (count == 0) throw FormatError("CMDL file has no layers");

  // Size scan: every layer header must be present and the payload complete
  // before the checksum is meaningful.
  {
    detail::ByteReader scan = r;
    for (std::uint16_t l = 0; l < count; ++l) {
      const auto rows = scan.get<std::uint32_t>("layer rows");
      const auto cols = scan.get<std::uint32_t>("layer cols");
      const std::uint64_t body = (std::uint64_t{rows} * cols + rows) * 4;
      scan.require(body, "layer payload");
      scan.skip(body);
    }
    scan.require(1, "checksum");
    if (scan.remaining() != 1) throw FormatError("trailing bytes after CMDL checksum");
  }
  if (detail::xor_bytes(bytes.first(bytes.size() - 1)) != bytes.back()) {
    throw ChecksumError("CMDL checksum mismatch");
  }

  for (std::uint16_t l = 0; l < count; ++l) {
    const auto rows = r.get<std::uint32_t>("rows");
    const auto cols = r.get<std::uint32_t>("cols");
    if (rows == 0 || cols == 0) throw FormatError("CMDL layer " + std::to_string(l) + " is empty");
    ModelLayer layer;
    layer.weight.resize(rows, cols);
    layer.bias.resize(rows);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) layer.weight(i, j) = r.get<float>("weights");
    for (Index i = 0; i < rows; ++i) layer.bias(i) = r.get<float>("bias");
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) {
      throw NonFiniteError("non-finite parameter in CMDL layer " + std::to_string(l));
    }
    model.layers.push_back(std::move(layer));
  }
  return model;
}

void save_model(const ModelFile& model, const std::filesystem::path& path) {
  write_file(path, encode_model(model));
}

ModelFile load_model(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_model(bytes);
  } catch (const TruncatedError& e) {
    throw TruncatedError(path.string() + ": " + e.what());
  } catch (const BadMagicError& e) {
    throw BadMagicError(path.string() + ": " + e.what());
  } catch (const ChecksumError& e) {
    throw ChecksumError(path.string() + ": " + e.what());
  } catch (const NonFiniteError& e) {
    throw NonFiniteError(path.string() + ": " + e.what());
  } catch (const BadVersionError& e) {
    throw BadVersionError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

ModelFile pack_classifier(const Classifier& model) {
  ModelFile file;
  file.flags = kModelFlagHead;
  for (Index l = 0; l < model.extractor.num_layers(); ++l) {
    file.layers.push_back({model.extractor.weights[l], model.extractor.biases[l]});
  }
  file.layers.push_back({model.head.weight, model.head.bias});
  return file;
}

Classifier unpack_classifier(const ModelFile& file) {
  if (!(file.flags & kModelFlagHead) || (file.flags & (kModelFlagCentroids | kModelFlagPrototypes))) {
    throw FormatError("model file does not hold a classifier (flags " + std::to_string(file.flags) + ")");
  }
  if (file.layers.size() < 2) throw FormatError("classifier needs an extractor layer and a head");
  Classifier model;
  for (std::size_t l = 0; l + 1 < file.layers.size(); ++l) {
    if (l > 0 && file.layers[l].weight.cols() != file.layers[l - 1].weight.rows()) {
      throw ShapeError("layer " + std::to_string(l) + " input does not match previous output");
    }
    model.extractor.weights.push_back(file.layers[l].weight);
    model.extractor.biases.push_back(file.layers[l].bias);
  }
  model.head.weight = file.layers.back().weight;
  model.head.bias = file.layers.back().bias;
  if (model.head.input_dim() != model.extractor.output_dim()) {
    throw ShapeError("head input " + std::to_string(model.head.input_dim()) + " does not match extractor output " +
                     std::to_string(model.extractor.output_dim()));
  }
  return model;
}

}  // namespace clup

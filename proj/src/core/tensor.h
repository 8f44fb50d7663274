/* Copyright 2026 The attnseg Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef ATTNSEG_CORE_TENSOR_H_
#define ATTNSEG_CORE_TENSOR_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace attnseg {

inline constexpr uint8_t kDefaultIgnoreValue = 255;

// Dense per-image features, row-major (height, width, channels).
struct FeatureMap {
  size_t height = 0;
  size_t width = 0;
  size_t channels = 0;
  std::vector<float> data;

  static FeatureMap zeros(size_t height, size_t width, size_t channels) {
    return {height, width, channels,
            std::vector<float>(height * width * channels, 0.0f)};
  }

  float at(size_t y, size_t x, size_t c) const {
    return data[(y * width + x) * channels + c];
  }
  float& at(size_t y, size_t x, size_t c) {
    return data[(y * width + x) * channels + c];
  }
  std::span<const float> pixel(size_t y, size_t x) const {
    return {data.data() + (y * width + x) * channels, channels};
  }

  bool operator==(const FeatureMap&) const = default;
};

// Per-pixel class indices, row-major (height, width).
struct LabelMask {
  size_t height = 0;
  size_t width = 0;
  std::vector<uint8_t> data;
  uint8_t ignore_value = kDefaultIgnoreValue;

  static LabelMask filled(size_t height, size_t width, uint8_t value) {
    return {height, width, std::vector<uint8_t>(height * width, value),
            kDefaultIgnoreValue};
  }

  uint8_t at(size_t y, size_t x) const { return data[y * width + x]; }
  uint8_t& at(size_t y, size_t x) { return data[y * width + x]; }

  bool operator==(const LabelMask&) const = default;
};

namespace tensorio {

enum class Dtype { kFloat32, kUInt8 };

struct Header {
  Dtype dtype = Dtype::kFloat32;
  std::vector<size_t> shape;
  size_t payload_offset = 0;
  size_t payload_bytes = 0;
};

using Tensor = std::variant<FeatureMap, LabelMask>;

// Parses and validates the fixed preamble and header dict. `data` must hold
// at least the preamble and header; the payload need not be present.
Header parse_header(std::span<const uint8_t> data);

std::vector<uint8_t> encode(const FeatureMap& map);
std::vector<uint8_t> encode(const LabelMask& mask);
Tensor decode(std::span<const uint8_t> data);

Tensor read_tensor(const std::filesystem::path& path);
FeatureMap read_feature_map(const std::filesystem::path& path);
LabelMask read_label_mask(const std::filesystem::path& path,
                          uint8_t ignore_value = kDefaultIgnoreValue);
// Reads only the preamble and header.
Header read_header(const std::filesystem::path& path);

void write_tensor(const FeatureMap& map, const std::filesystem::path& path);
void write_tensor(const LabelMask& mask, const std::filesystem::path& path);

}  // namespace tensorio
}  // namespace attnseg

#endif  // ATTNSEG_CORE_TENSOR_H_

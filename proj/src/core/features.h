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

#ifndef ATTNSEG_CORE_FEATURES_H_
#define ATTNSEG_CORE_FEATURES_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "core/datasets.h"
#include "core/gbdt.h"
#include "core/parallel.h"
#include "core/tensor.h"

namespace attnseg {

// Sampled training pixels: row-major feature values plus aligned labels.
struct PixelTable {
  struct Origin {
    uint32_t entry = 0;  // index into entry_ids
    uint32_t y = 0;
    uint32_t x = 0;
    bool operator==(const Origin&) const = default;
  };

  size_t num_features = 0;
  std::vector<float> values;
  std::vector<uint8_t> labels;
  std::vector<Origin> provenance;
  std::vector<std::string> entry_ids;

  size_t num_rows() const { return labels.size(); }
  std::span<const float> row(size_t i) const {
    return {values.data() + i * num_features, num_features};
  }

  bool operator==(const PixelTable&) const = default;
};

struct SamplingPolicy {
  size_t max_pixels_per_class_per_image = 2000;
  uint64_t seed = 0;
};

// Source coordinate for output index `i` under the half-pixel convention,
// clamped to the input extent.
struct AxisSample {
  size_t lo = 0;
  size_t hi = 0;
  double frac = 0.0;
};
AxisSample axis_sample(size_t i, size_t in_size, size_t out_size);

FeatureMap upsample_bilinear(const FeatureMap& map, size_t out_h,
                             size_t out_w);

// Lazily evaluates the channel-stacked, upsampled view of several feature
// maps one pixel at a time. Produces the same bits as concat_models.
class ConcatSampler {
 public:
  // The maps must outlive the sampler.
  ConcatSampler(std::span<const FeatureMap> maps, size_t out_h, size_t out_w);

  size_t height() const { return out_h_; }
  size_t width() const { return out_w_; }
  size_t channels() const { return channels_; }

  // Writes channels() values for output pixel (y, x).
  void sample(size_t y, size_t x, std::span<float> out) const;

 private:
  struct Source {
    const FeatureMap* map;
    size_t offset;
  };
  std::vector<Source> sources_;
  size_t out_h_;
  size_t out_w_;
  size_t channels_ = 0;
};

FeatureMap concat_models(std::span<const FeatureMap> maps, size_t out_h,
                         size_t out_w);

using MaskProvider = std::function<LabelMask(const PatchEntry&)>;
using FeatureProvider =
    std::function<FeatureMap(const PatchEntry&, const std::string& model_id)>;

// Reservoir sample (algorithm R) of up to `k` items from [0, n); the
// returned indices are in reservoir-slot order.
std::vector<size_t> reservoir_sample(size_t n, size_t k, uint64_t seed);

// Samples up to policy.max pixels per class per entry, features taken from
// the concatenated model maps at mask resolution. Rows are ordered by entry,
// then class, then reservoir slot.
PixelTable build_pixel_table(std::span<const PatchEntry* const> entries,
                             std::span<const std::string> model_ids,
                             const MaskProvider& masks,
                             const FeatureProvider& features,
                             const SamplingPolicy& policy,
                             uint8_t ignore_value, WorkerPool* pool = nullptr);

LabelMask predict_mask(const gbdt::BoostedEnsemble& model,
                       const FeatureMap& map, WorkerPool* pool = nullptr);

// Same as predict_mask(model, concat_models(maps, out_h, out_w)) without
// materializing the concatenated map.
LabelMask predict_mask(const gbdt::BoostedEnsemble& model,
                       const ConcatSampler& sampler,
                       WorkerPool* pool = nullptr);

}  // namespace attnseg

#endif  // ATTNSEG_CORE_FEATURES_H_

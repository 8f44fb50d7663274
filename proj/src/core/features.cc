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

#include "core/features.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "core/error.h"
#include "core/rng.h"

namespace attnseg {
namespace {

float blend(const FeatureMap& map, const AxisSample& sy, const AxisSample& sx,
            size_t c) {
  const double a = map.at(sy.lo, sx.lo, c);
  const double b = map.at(sy.lo, sx.hi, c);
  const double d = map.at(sy.hi, sx.lo, c);
  const double e = map.at(sy.hi, sx.hi, c);
  const double top = (1.0 - sx.frac) * a + sx.frac * b;
  const double bottom = (1.0 - sx.frac) * d + sx.frac * e;
  return static_cast<float>((1.0 - sy.frac) * top + sy.frac * bottom);
}

void check_output_size(size_t out_h, size_t out_w) {
  if (out_h == 0 || out_w == 0) {
    fail(ErrorKind::kArgument, "output size must be at least 1x1");
  }
}

// Per-entry slice of the table, merged in entry order afterwards.
struct EntryRows {
  size_t num_features = 0;
  std::vector<float> values;
  std::vector<uint8_t> labels;
  std::vector<PixelTable::Origin> provenance;
};

}  // namespace

AxisSample axis_sample(size_t i, size_t in_size, size_t out_size) {
  double s = (static_cast<double>(i) + 0.5) * static_cast<double>(in_size) /
                 static_cast<double>(out_size) -
             0.5;
  s = std::clamp(s, 0.0, static_cast<double>(in_size - 1));
  AxisSample out;
  out.lo = static_cast<size_t>(std::floor(s));
  out.hi = std::min(out.lo + 1, in_size - 1);
  out.frac = s - static_cast<double>(out.lo);
  return out;
}

FeatureMap upsample_bilinear(const FeatureMap& map, size_t out_h,
                             size_t out_w) {
  check_output_size(out_h, out_w);
  std::vector<AxisSample> cols(out_w);
  for (size_t x = 0; x < out_w; ++x) cols[x] = axis_sample(x, map.width, out_w);
  FeatureMap out = FeatureMap::zeros(out_h, out_w, map.channels);
  for (size_t y = 0; y < out_h; ++y) {
    const AxisSample sy = axis_sample(y, map.height, out_h);
    for (size_t x = 0; x < out_w; ++x) {
      for (size_t c = 0; c < map.channels; ++c) {
        out.at(y, x, c) = blend(map, sy, cols[x], c);
      }
    }
  }
  return out;
}

ConcatSampler::ConcatSampler(std::span<const FeatureMap> maps, size_t out_h,
                             size_t out_w)
    : out_h_(out_h), out_w_(out_w) {
  if (maps.empty()) fail(ErrorKind::kArgument, "no feature maps to concatenate");
  check_output_size(out_h, out_w);
  for (const auto& map : maps) {
    sources_.push_back({&map, channels_});
    channels_ += map.channels;
  }
}

void ConcatSampler::sample(size_t y, size_t x, std::span<float> out) const {
  for (const auto& source : sources_) {
    const FeatureMap& map = *source.map;
    const AxisSample sy = axis_sample(y, map.height, out_h_);
    const AxisSample sx = axis_sample(x, map.width, out_w_);
    for (size_t c = 0; c < map.channels; ++c) {
      out[source.offset + c] = blend(map, sy, sx, c);
    }
  }
}

FeatureMap concat_models(std::span<const FeatureMap> maps, size_t out_h,
                         size_t out_w) {
  const ConcatSampler sampler(maps, out_h, out_w);
  FeatureMap out = FeatureMap::zeros(out_h, out_w, sampler.channels());
  for (size_t y = 0; y < out_h; ++y) {
    for (size_t x = 0; x < out_w; ++x) {
      sampler.sample(y, x,
                     {out.data.data() + (y * out_w + x) * out.channels,
                      out.channels});
    }
  }
  return out;
}

std::vector<size_t> reservoir_sample(size_t n, size_t k, uint64_t seed) {
  k = std::min(n, k);
  std::vector<size_t> reservoir(k);
  for (size_t i = 0; i < k; ++i) reservoir[i] = i;
  if (k == n) return reservoir;
  Xoshiro256 rng(seed);
  for (size_t i = k; i < n; ++i) {
    const uint64_t j = rng.bounded(i + 1);
    if (j < k) reservoir[j] = i;
  }
  return reservoir;
}

PixelTable build_pixel_table(std::span<const PatchEntry* const> entries,
                             std::span<const std::string> model_ids,
                             const MaskProvider& masks,
                             const FeatureProvider& features,
                             const SamplingPolicy& policy,
                             uint8_t ignore_value, WorkerPool* pool) {
  if (model_ids.empty()) fail(ErrorKind::kArgument, "empty model set");
  if (policy.max_pixels_per_class_per_image < 1) {
    fail(ErrorKind::kArgument, "max_pixels_per_class_per_image must be >= 1");
  }
  if (entries.size() > std::numeric_limits<uint32_t>::max()) {
    fail(ErrorKind::kArgument, "too many entries");
  }

  std::vector<EntryRows> parts(entries.size());
  auto work = [&](size_t index) {
    const PatchEntry& entry = *entries[index];
    LabelMask mask = masks(entry);
    mask.ignore_value = ignore_value;
    std::vector<FeatureMap> maps;
    maps.reserve(model_ids.size());
    for (const auto& id : model_ids) maps.push_back(features(entry, id));
    const ConcatSampler sampler(maps, mask.height, mask.width);

    std::vector<std::vector<uint32_t>> by_class(256);
    for (size_t p = 0; p < mask.data.size(); ++p) {
      const uint8_t label = mask.data[p];
      if (label != ignore_value) by_class[label].push_back(static_cast<uint32_t>(p));
    }

    EntryRows& rows = parts[index];
    rows.num_features = sampler.channels();
    const uint64_t entry_seed = derive_seed(policy.seed, fnv1a64(entry.id));
    for (size_t cls = 0; cls < by_class.size(); ++cls) {
      const auto& pixels = by_class[cls];
      if (pixels.empty()) continue;
      const auto picks =
          reservoir_sample(pixels.size(), policy.max_pixels_per_class_per_image,
                           derive_seed(entry_seed, cls));
      const size_t base = rows.values.size();
      rows.values.resize(base + picks.size() * rows.num_features);
      for (size_t r = 0; r < picks.size(); ++r) {
        const uint32_t p = pixels[picks[r]];
        const uint32_t y = p / static_cast<uint32_t>(mask.width);
        const uint32_t x = p % static_cast<uint32_t>(mask.width);
        sampler.sample(y, x,
                       {rows.values.data() + base + r * rows.num_features,
                        rows.num_features});
        rows.labels.push_back(static_cast<uint8_t>(cls));
        rows.provenance.push_back({static_cast<uint32_t>(index), y, x});
      }
    }
  };
  if (pool != nullptr) {
    pool->run(entries.size(), work);
  } else {
    for (size_t i = 0; i < entries.size(); ++i) work(i);
  }

  PixelTable table;
  for (size_t i = 0; i < entries.size(); ++i) {
    table.entry_ids.push_back(entries[i]->id);
    if (i == 0) {
      table.num_features = parts[i].num_features;
    } else if (parts[i].num_features != table.num_features) {
      fail(ErrorKind::kShape,
           "entry '" + entries[i]->id + "' yields " +
               std::to_string(parts[i].num_features) + " channels, expected " +
               std::to_string(table.num_features));
    }
  }
  size_t total = 0;
  for (const auto& part : parts) total += part.labels.size();
  table.values.reserve(total * table.num_features);
  table.labels.reserve(total);
  table.provenance.reserve(total);
  for (auto& part : parts) {
    table.values.insert(table.values.end(), part.values.begin(),
                        part.values.end());
    table.labels.insert(table.labels.end(), part.labels.begin(),
                        part.labels.end());
    table.provenance.insert(table.provenance.end(), part.provenance.begin(),
                            part.provenance.end());
  }
  return table;
}

namespace {

template <typename RowFn>
LabelMask predict_rows(const gbdt::BoostedEnsemble& model, size_t height,
                       size_t width, size_t channels, RowFn fill_row,
                       WorkerPool* pool) {
  if (channels != model.num_features) {
    fail(ErrorKind::kShape, "feature map has " + std::to_string(channels) +
                                " channels, model expects " +
                                std::to_string(model.num_features));
  }
  LabelMask mask = LabelMask::filled(height, width, 0);
  auto work = [&](size_t y) {
    std::vector<float> row(width * channels);
    fill_row(y, row);
    for (size_t x = 0; x < width; ++x) {
      mask.at(y, x) = static_cast<uint8_t>(model.predict_class(
          {row.data() + x * channels, channels}));
    }
  };
  if (pool != nullptr) {
    pool->run(height, work);
  } else {
    for (size_t y = 0; y < height; ++y) work(y);
  }
  return mask;
}

}  // namespace

LabelMask predict_mask(const gbdt::BoostedEnsemble& model,
                       const FeatureMap& map, WorkerPool* pool) {
  return predict_rows(
      model, map.height, map.width, map.channels,
      [&](size_t y, std::vector<float>& row) {
        const float* begin = map.data.data() + y * map.width * map.channels;
        std::copy(begin, begin + row.size(), row.begin());
      },
      pool);
}

LabelMask predict_mask(const gbdt::BoostedEnsemble& model,
                       const ConcatSampler& sampler, WorkerPool* pool) {
  const size_t channels = sampler.channels();
  return predict_rows(
      model, sampler.height(), sampler.width(), channels,
      [&](size_t y, std::vector<float>& row) {
        for (size_t x = 0; x < sampler.width(); ++x) {
          sampler.sample(y, x, {row.data() + x * channels, channels});
        }
      },
      pool);
}

}  // namespace attnseg

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

#include "core/synth.h"

#include <algorithm>

#include "core/error.h"
#include "core/rng.h"

namespace attnseg::synth {
namespace {

constexpr uint64_t kMaskStream = 1;
constexpr uint64_t kFirstStream = 2;
constexpr uint64_t kSecondStream = 3;

std::vector<size_t> all_classes(size_t num_classes) {
  std::vector<size_t> out(num_classes);
  for (size_t c = 0; c < num_classes; ++c) out[c] = c;
  return out;
}

}  // namespace

void SynthSpec::validate() const {
  if (height == 0 || width == 0) {
    fail(ErrorKind::kArgument, "synthetic scenes need positive height and width");
  }
  if (num_classes < 1 || num_classes > 255) {
    fail(ErrorKind::kArgument, "num_classes must lie in [1, 255]");
  }
  if (!(noise_sigma >= 0.0)) {
    fail(ErrorKind::kArgument, "noise_sigma must be >= 0");
  }
  if (channels_per_class < 1) {
    fail(ErrorKind::kArgument, "channels_per_class must be >= 1");
  }
  if (token_stride < 1) fail(ErrorKind::kArgument, "token_stride must be >= 1");
  for (size_t c : informative_classes) {
    if (c >= num_classes) {
      fail(ErrorKind::kArgument, "informative class " + std::to_string(c) +
                                     " is not below num_classes");
    }
  }
}

LabelMask generate_mask(const SynthSpec& spec) {
  spec.validate();
  LabelMask mask = LabelMask::filled(spec.height, spec.width, 0);
  Xoshiro256 rng(derive_seed(spec.seed, kMaskStream));
  for (size_t b = 0; b < spec.blob_count; ++b) {
    const auto cls = static_cast<uint8_t>(rng.bounded(spec.num_classes));
    const size_t y0 = rng.bounded(spec.height);
    const size_t x0 = rng.bounded(spec.width);
    const size_t h = 1 + rng.bounded(std::max<size_t>(1, spec.height / 2));
    const size_t w = 1 + rng.bounded(std::max<size_t>(1, spec.width / 2));
    for (size_t y = y0; y < std::min(spec.height, y0 + h); ++y) {
      for (size_t x = x0; x < std::min(spec.width, x0 + w); ++x) {
        mask.at(y, x) = cls;
      }
    }
  }
  return mask;
}

FeatureMap render_features(const LabelMask& mask, const SynthSpec& spec,
                           const std::vector<size_t>& informative,
                           uint64_t stream_seed) {
  spec.validate();
  std::vector<size_t> classes = informative;
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.empty()) {
    fail(ErrorKind::kArgument, "at least one informative class is required");
  }

  const size_t stride = spec.token_stride;
  const size_t grid_h = (mask.height + stride - 1) / stride;
  const size_t grid_w = (mask.width + stride - 1) / stride;
  FeatureMap map =
      FeatureMap::zeros(grid_h, grid_w, classes.size() * spec.channels_per_class);
  Xoshiro256 rng(stream_seed);
  std::vector<size_t> counts(256);
  for (size_t gy = 0; gy < grid_h; ++gy) {
    for (size_t gx = 0; gx < grid_w; ++gx) {
      std::fill(counts.begin(), counts.end(), 0);
      size_t area = 0;
      for (size_t y = gy * stride; y < std::min(mask.height, (gy + 1) * stride); ++y) {
        for (size_t x = gx * stride; x < std::min(mask.width, (gx + 1) * stride); ++x) {
          ++counts[mask.at(y, x)];
          ++area;
        }
      }
      for (size_t i = 0; i < classes.size(); ++i) {
        const double indicator = static_cast<double>(counts[classes[i]]) /
                                 static_cast<double>(area);
        for (size_t j = 0; j < spec.channels_per_class; ++j) {
          const double noise =
              spec.noise_sigma > 0.0 ? spec.noise_sigma * rng.normal() : 0.0;
          map.at(gy, gx, i * spec.channels_per_class + j) =
              static_cast<float>(indicator + noise);
        }
      }
    }
  }
  return map;
}

Scene generate_scene(const SynthSpec& spec) {
  Scene scene;
  scene.mask = generate_mask(spec);
  const auto informative = spec.informative_classes.empty()
                               ? all_classes(spec.num_classes)
                               : spec.informative_classes;
  scene.features = render_features(scene.mask, spec, informative,
                                   derive_seed(spec.seed, kFirstStream));
  return scene;
}

ComplementaryScene generate_complementary_pair(const SynthSpec& spec) {
  if (spec.num_classes < 4) {
    fail(ErrorKind::kArgument, "complementary pairs need at least 4 classes");
  }
  ComplementaryScene scene;
  scene.mask = generate_mask(spec);
  const size_t half = spec.num_classes / 2;
  std::vector<size_t> lower, upper;
  for (size_t c = 0; c < spec.num_classes; ++c) {
    (c < half ? lower : upper).push_back(c);
  }
  scene.first = render_features(scene.mask, spec, lower,
                                derive_seed(spec.seed, kFirstStream));
  scene.second = render_features(scene.mask, spec, upper,
                                 derive_seed(spec.seed, kSecondStream));
  return scene;
}

}  // namespace attnseg::synth

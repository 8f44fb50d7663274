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

#ifndef ATTNSEG_CORE_SYNTH_H_
#define ATTNSEG_CORE_SYNTH_H_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "core/tensor.h"

namespace attnseg::synth {

struct SynthSpec {
  size_t height = 64;
  size_t width = 64;
  size_t num_classes = 4;
  size_t blob_count = 12;
  double noise_sigma = 0.1;
  // Classes that receive signal channels; empty means all classes.
  std::vector<size_t> informative_classes;
  size_t channels_per_class = 2;
  // Feature grid cell size in mask pixels. 1 gives mask-resolution features;
  // larger values mimic a coarse token grid that has to be upsampled.
  size_t token_stride = 1;
  uint64_t seed = 0;

  void validate() const;
};

struct Scene {
  LabelMask mask;
  FeatureMap features;
};

struct ComplementaryScene {
  LabelMask mask;
  FeatureMap first;   // informative for the lower half of the classes
  FeatureMap second;  // informative for the upper half
};

// Class 0 background overwritten by `blob_count` random axis-aligned blobs.
LabelMask generate_mask(const SynthSpec& spec);

// Signal channels for `informative` classes over `mask`: class-indicator
// (area fraction when token_stride > 1) plus Gaussian noise drawn from the
// stream keyed by `stream_seed`, in (y, x, channel) order.
FeatureMap render_features(const LabelMask& mask, const SynthSpec& spec,
                           const std::vector<size_t>& informative,
                           uint64_t stream_seed);

Scene generate_scene(const SynthSpec& spec);

// Requires num_classes >= 4.
ComplementaryScene generate_complementary_pair(const SynthSpec& spec);

}  // namespace attnseg::synth

#endif  // ATTNSEG_CORE_SYNTH_H_

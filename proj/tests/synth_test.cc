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

#include <cmath>
#include <numeric>
#include <vector>

#include "core/error.h"
#include "core/synth.h"
#include "gtest/gtest.h"

namespace attnseg::synth {
namespace {

TEST(SynthTest, NoiselessArgmaxReproducesMask) {
  SynthSpec spec;
  spec.noise_sigma = 0.0;
  spec.seed = 3;
  const Scene scene = generate_scene(spec);
  ASSERT_EQ(scene.features.channels, spec.num_classes * spec.channels_per_class);
  for (size_t y = 0; y < spec.height; ++y) {
    for (size_t x = 0; x < spec.width; ++x) {
      size_t best = 0;
      for (size_t c = 1; c < spec.num_classes; ++c) {
        if (scene.features.at(y, x, c * spec.channels_per_class) >
            scene.features.at(y, x, best * spec.channels_per_class)) {
          best = c;
        }
      }
      ASSERT_EQ(best, scene.mask.at(y, x));
    }
  }
}

TEST(SynthTest, DeterministicInSeed) {
  SynthSpec spec;
  spec.seed = 10;
  const Scene a = generate_scene(spec);
  const Scene b = generate_scene(spec);
  EXPECT_EQ(a.mask, b.mask);
  EXPECT_EQ(a.features, b.features);
  spec.seed = 11;
  const Scene c = generate_scene(spec);
  EXPECT_EQ(c.mask.data.size(), a.mask.data.size());
  EXPECT_EQ(c.features.data.size(), a.features.data.size());
  EXPECT_NE(c.features, a.features);
}

TEST(SynthTest, MaskValuesInRange) {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    SynthSpec spec;
    spec.seed = seed;
    spec.num_classes = 2 + seed % 5;
    spec.height = 5 + seed;
    spec.width = 40 - seed;
    for (uint8_t v : generate_mask(spec).data) EXPECT_LT(v, spec.num_classes);
  }
}

TEST(SynthTest, UninformativeClassesCarryNoSignal) {
  SynthSpec spec;
  spec.height = 128;
  spec.width = 128;
  spec.blob_count = 40;
  spec.informative_classes = {0, 1};
  spec.seed = 4;
  const Scene scene = generate_scene(spec);
  ASSERT_EQ(scene.features.channels, 2 * spec.channels_per_class);
  double sum = 0;
  size_t count = 0;
  for (size_t y = 0; y < spec.height; ++y) {
    for (size_t x = 0; x < spec.width; ++x) {
      if (scene.mask.at(y, x) < 2) continue;
      for (size_t c = 0; c < scene.features.channels; ++c) {
        sum += scene.features.at(y, x, c);
        ++count;
      }
    }
  }
  ASSERT_GT(count, 1000u);
  const double mean = sum / static_cast<double>(count);
  EXPECT_LT(std::abs(mean), 4 * spec.noise_sigma / std::sqrt(count));
}

TEST(SynthTest, ComplementaryHalves) {
  SynthSpec spec;
  spec.noise_sigma = 0.0;
  spec.seed = 5;
  const auto pair = generate_complementary_pair(spec);
  EXPECT_EQ(pair.mask, generate_mask(spec));
  ASSERT_EQ(pair.first.channels, 2 * spec.channels_per_class);
  ASSERT_EQ(pair.second.channels, 2 * spec.channels_per_class);
  for (size_t y = 0; y < spec.height; ++y) {
    for (size_t x = 0; x < spec.width; ++x) {
      const uint8_t cls = pair.mask.at(y, x);
      EXPECT_EQ(pair.first.at(y, x, 0), cls == 0 ? 1.0f : 0.0f);
      EXPECT_EQ(pair.first.at(y, x, spec.channels_per_class), cls == 1 ? 1.0f : 0.0f);
      EXPECT_EQ(pair.second.at(y, x, 0), cls == 2 ? 1.0f : 0.0f);
      EXPECT_EQ(pair.second.at(y, x, spec.channels_per_class), cls == 3 ? 1.0f : 0.0f);
    }
  }
  spec.num_classes = 3;
  EXPECT_THROW(generate_complementary_pair(spec), Error);
}

TEST(SynthTest, TokenStrideAveragesCells) {
  SynthSpec spec;
  spec.noise_sigma = 0.0;
  spec.token_stride = 4;
  spec.height = 30;
  spec.width = 17;
  const Scene scene = generate_scene(spec);
  EXPECT_EQ(scene.features.height, 8u);
  EXPECT_EQ(scene.features.width, 5u);
  for (size_t gy = 0; gy < 8; ++gy) {
    for (size_t gx = 0; gx < 5; ++gx) {
      float total = 0;
      for (size_t c = 0; c < spec.num_classes; ++c) {
        total += scene.features.at(gy, gx, c * spec.channels_per_class);
      }
      EXPECT_NEAR(total, 1.0f, 1e-6);
    }
  }
}

TEST(SynthTest, ValidatesSpec) {
  SynthSpec spec;
  spec.height = 0;
  EXPECT_THROW(generate_scene(spec), Error);
  spec = {};
  spec.num_classes = 0;
  EXPECT_THROW(generate_scene(spec), Error);
  spec = {};
  spec.noise_sigma = -1;
  EXPECT_THROW(generate_scene(spec), Error);
  spec = {};
  spec.informative_classes = {7};
  EXPECT_THROW(generate_scene(spec), Error);
  spec = {};
  spec.channels_per_class = 0;
  EXPECT_THROW(generate_scene(spec), Error);
}

}  // namespace
}  // namespace attnseg::synth

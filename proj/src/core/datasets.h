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

#ifndef ATTNSEG_CORE_DATASETS_H_
#define ATTNSEG_CORE_DATASETS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "core/tensor.h"

namespace attnseg {

enum class SplitTag { kUnassigned, kTrain, kTest };
enum class SplitPolicy { kAuthorGiven, kRandom };

const char* split_tag_name(SplitTag tag);

struct PatchEntry {
  std::string id;
  std::filesystem::path mask_path;
  // model id -> feature file. Models may have been run at different native
  // resolutions, so feature maps of one patch need not share a size.
  std::map<std::string, std::filesystem::path> feature_paths;
  SplitTag split = SplitTag::kUnassigned;
};

struct DatasetManifest {
  std::string name;
  size_t num_classes = 0;
  std::vector<std::string> class_names;
  uint8_t ignore_value = kDefaultIgnoreValue;
  std::string magnification;
  size_t patch_height = 0;
  size_t patch_width = 0;
  SplitPolicy split_policy = SplitPolicy::kRandom;
  std::vector<PatchEntry> entries;

  // Entries carrying `tag`, in manifest order.
  std::vector<const PatchEntry*> select(SplitTag tag) const;
  // True when every entry lists a feature file for every id.
  bool has_models(std::span<const std::string> model_ids) const;
};

// Parses manifest JSON. Relative paths are resolved against `base_dir`.
// Throws Error(kManifest) naming the offending field path.
DatasetManifest parse_manifest(std::string_view json_text,
                               const std::filesystem::path& base_dir);

// Loads and validates a manifest file. With `strict`, every mask and feature
// file is also opened and checked; otherwise files are checked when used.
DatasetManifest load_manifest(const std::filesystem::path& path,
                              bool strict = false);

// Opens every file the manifest references and checks shapes and labels.
void verify_files(const DatasetManifest& manifest);

LabelMask load_entry_mask(const DatasetManifest& manifest,
                          const PatchEntry& entry);
FeatureMap load_entry_features(const PatchEntry& entry,
                               const std::string& model_id);

// Serializes with paths relative to the directory of `path`.
void save_manifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path);
std::string manifest_to_json(const DatasetManifest& manifest,
                             const std::filesystem::path& base_dir);

// Permutation of [0, count) from a seeded Fisher-Yates shuffle.
std::vector<size_t> shuffled_indices(size_t count, uint64_t seed);

inline constexpr double kDefaultTestFraction = 0.2;

// Assigns train/test tags for random-policy manifests. The first
// ceil((1 - test_fraction) * N) shuffled entries become train. Manifests that
// are already fully assigned come back unchanged.
DatasetManifest materialize_split(const DatasetManifest& manifest,
                                  uint64_t seed,
                                  double test_fraction = kDefaultTestFraction);

enum class FeatureKind { kClsAttentionHeads, kDenseEmbedding };

struct ModelRegistryEntry {
  std::string_view model_id;
  std::string_view display_name;
  std::string_view backbone;
  size_t native_height;
  size_t native_width;
  FeatureKind feature_kind;
};

std::span<const ModelRegistryEntry> model_registry();
const ModelRegistryEntry* find_model(std::string_view model_id);

}  // namespace attnseg

#endif  // ATTNSEG_CORE_DATASETS_H_

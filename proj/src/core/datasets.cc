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

#include "core/datasets.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "core/error.h"
#include "core/rng.h"

namespace attnseg {
namespace {

using nlohmann::json;

[[noreturn]] void manifest_error(const std::string& field,
                                 const std::string& message) {
  fail(ErrorKind::kManifest, "manifest field `" + field + "`: " + message);
}

const json& require(const json& object, const char* key,
                    const std::string& prefix) {
  const auto it = object.find(key);
  if (it == object.end()) manifest_error(prefix + key, "missing");
  return *it;
}

std::string as_string(const json& value, const std::string& field) {
  if (!value.is_string()) manifest_error(field, "expected a string");
  return value.get<std::string>();
}

size_t as_count(const json& value, const std::string& field) {
  if (!value.is_number_unsigned() && !value.is_number_integer()) {
    manifest_error(field, "expected a non-negative integer");
  }
  if (value.is_number_integer() && value.get<int64_t>() < 0) {
    manifest_error(field, "expected a non-negative integer");
  }
  return value.get<size_t>();
}

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::string& path) {
  const std::filesystem::path p(path);
  return p.is_absolute() ? p : (base / p).lexically_normal();
}

std::string relative_to(const std::filesystem::path& path,
                        const std::filesystem::path& base) {
  if (base.empty()) return path.generic_string();
  const auto rel = path.lexically_relative(base);
  return rel.empty() ? path.generic_string() : rel.generic_string();
}

SplitTag parse_split(const json& value, const std::string& field) {
  const std::string text = as_string(value, field);
  if (text == "train") return SplitTag::kTrain;
  if (text == "test") return SplitTag::kTest;
  if (text == "unassigned") return SplitTag::kUnassigned;
  manifest_error(field, "expected one of train, test, unassigned");
}

}  // namespace

const char* split_tag_name(SplitTag tag) {
  switch (tag) {
    case SplitTag::kTrain: return "train";
    case SplitTag::kTest: return "test";
    case SplitTag::kUnassigned: return "unassigned";
  }
  return "unassigned";
}

std::vector<const PatchEntry*> DatasetManifest::select(SplitTag tag) const {
  std::vector<const PatchEntry*> out;
  for (const auto& entry : entries) {
    if (entry.split == tag) out.push_back(&entry);
  }
  return out;
}

bool DatasetManifest::has_models(std::span<const std::string> model_ids) const {
  for (const auto& entry : entries) {
    for (const auto& id : model_ids) {
      if (!entry.feature_paths.contains(id)) return false;
    }
  }
  return true;
}

DatasetManifest parse_manifest(std::string_view json_text,
                               const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kManifest, std::string("manifest is not valid JSON: ") +
                                   e.what());
  }
  if (!root.is_object()) manifest_error("$", "expected an object");

  DatasetManifest m;
  m.name = as_string(require(root, "name", ""), "name");
  m.num_classes = as_count(require(root, "num_classes", ""), "num_classes");
  if (m.num_classes < 1 || m.num_classes > 255) {
    manifest_error("num_classes", "must lie in [1, 255]");
  }

  const json& names = require(root, "class_names", "");
  if (!names.is_array()) manifest_error("class_names", "expected an array");
  for (size_t i = 0; i < names.size(); ++i) {
    m.class_names.push_back(
        as_string(names[i], "class_names[" + std::to_string(i) + "]"));
  }
  if (m.class_names.size() != m.num_classes) {
    manifest_error("class_names", "has " + std::to_string(m.class_names.size()) +
                                      " names but num_classes is " +
                                      std::to_string(m.num_classes));
  }

  if (root.contains("ignore_value")) {
    const size_t ignore = as_count(root["ignore_value"], "ignore_value");
    if (ignore > 255) manifest_error("ignore_value", "must fit in 8 bits");
    m.ignore_value = static_cast<uint8_t>(ignore);
  }
  if (m.ignore_value < m.num_classes) {
    manifest_error("ignore_value", "collides with a class index");
  }
  if (root.contains("magnification")) {
    m.magnification = as_string(root["magnification"], "magnification");
  }

  const json& shape = require(root, "patch_shape", "");
  if (!shape.is_array() || shape.size() != 2) {
    manifest_error("patch_shape", "expected [height, width]");
  }
  m.patch_height = as_count(shape[0], "patch_shape[0]");
  m.patch_width = as_count(shape[1], "patch_shape[1]");
  if (m.patch_height == 0 || m.patch_width == 0) {
    manifest_error("patch_shape", "dimensions must be positive");
  }

  const std::string policy =
      as_string(require(root, "split_policy", ""), "split_policy");
  if (policy == "author_given") {
    m.split_policy = SplitPolicy::kAuthorGiven;
  } else if (policy == "random") {
    m.split_policy = SplitPolicy::kRandom;
  } else {
    manifest_error("split_policy", "expected author_given or random");
  }

  const json& entries = require(root, "entries", "");
  if (!entries.is_array()) manifest_error("entries", "expected an array");
  std::set<std::string> seen;
  for (size_t i = 0; i < entries.size(); ++i) {
    const std::string prefix = "entries[" + std::to_string(i) + "].";
    const json& e = entries[i];
    if (!e.is_object()) manifest_error(prefix.substr(0, prefix.size() - 1),
                                       "expected an object");
    PatchEntry entry;
    entry.id = as_string(require(e, "id", prefix), prefix + "id");
    if (entry.id.empty()) manifest_error(prefix + "id", "must not be empty");
    if (!seen.insert(entry.id).second) {
      manifest_error(prefix + "id", "duplicate entry id '" + entry.id + "'");
    }
    entry.mask_path =
        resolve(base_dir, as_string(require(e, "mask", prefix), prefix + "mask"));
    const json& features = require(e, "features", prefix);
    if (!features.is_object()) {
      manifest_error(prefix + "features", "expected an object");
    }
    for (const auto& [model, path] : features.items()) {
      entry.feature_paths[model] =
          resolve(base_dir, as_string(path, prefix + "features." + model));
    }
    if (e.contains("split")) entry.split = parse_split(e["split"], prefix + "split");
    if (m.split_policy == SplitPolicy::kAuthorGiven &&
        entry.split == SplitTag::kUnassigned) {
      manifest_error(prefix + "split",
                     "author_given manifests need train or test on every entry");
    }
    m.entries.push_back(std::move(entry));
  }
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path, bool strict) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open manifest " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  DatasetManifest m = parse_manifest(text.str(), path.parent_path());
  if (strict) verify_files(m);
  return m;
}

LabelMask load_entry_mask(const DatasetManifest& manifest,
                          const PatchEntry& entry) {
  LabelMask mask = tensorio::read_label_mask(entry.mask_path,
                                             manifest.ignore_value);
  if (mask.height != manifest.patch_height ||
      mask.width != manifest.patch_width) {
    fail(ErrorKind::kData,
         "entry '" + entry.id + "': mask is " + std::to_string(mask.height) +
             "x" + std::to_string(mask.width) + ", patch_shape is " +
             std::to_string(manifest.patch_height) + "x" +
             std::to_string(manifest.patch_width));
  }
  for (uint8_t v : mask.data) {
    if (v != mask.ignore_value && v >= manifest.num_classes) {
      fail(ErrorKind::kData, "entry '" + entry.id + "': mask holds class " +
                                 std::to_string(v) + " >= num_classes");
    }
  }
  return mask;
}

FeatureMap load_entry_features(const PatchEntry& entry,
                               const std::string& model_id) {
  const auto it = entry.feature_paths.find(model_id);
  if (it == entry.feature_paths.end()) {
    fail(ErrorKind::kData, "entry '" + entry.id + "' has no features for model '" +
                               model_id + "'");
  }
  return tensorio::read_feature_map(it->second);
}

void verify_files(const DatasetManifest& manifest) {
  for (const auto& entry : manifest.entries) {
    load_entry_mask(manifest, entry);
    for (const auto& [model, path] : entry.feature_paths) {
      load_entry_features(entry, model);
    }
  }
}

std::string manifest_to_json(const DatasetManifest& m,
                             const std::filesystem::path& base_dir) {
  json root = json::object();
  root["name"] = m.name;
  root["num_classes"] = m.num_classes;
  root["class_names"] = m.class_names;
  root["ignore_value"] = m.ignore_value;
  root["magnification"] = m.magnification;
  root["patch_shape"] = {m.patch_height, m.patch_width};
  root["split_policy"] =
      m.split_policy == SplitPolicy::kAuthorGiven ? "author_given" : "random";
  json entries = json::array();
  for (const auto& entry : m.entries) {
    json e = json::object();
    e["id"] = entry.id;
    e["mask"] = relative_to(entry.mask_path, base_dir);
    json features = json::object();
    for (const auto& [model, path] : entry.feature_paths) {
      features[model] = relative_to(path, base_dir);
    }
    e["features"] = std::move(features);
    if (entry.split != SplitTag::kUnassigned) {
      e["split"] = split_tag_name(entry.split);
    }
    entries.push_back(std::move(e));
  }
  root["entries"] = std::move(entries);
  return root.dump(2) + "\n";
}

void save_manifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out << manifest_to_json(manifest, path.parent_path());
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

std::vector<size_t> shuffled_indices(size_t count, uint64_t seed) {
  std::vector<size_t> order(count);
  for (size_t i = 0; i < count; ++i) order[i] = i;
  Xoshiro256 rng(seed);
  for (size_t i = count; i > 1; --i) {
    const size_t j = static_cast<size_t>(rng.bounded(i));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

DatasetManifest materialize_split(const DatasetManifest& manifest,
                                  uint64_t seed, double test_fraction) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    fail(ErrorKind::kArgument, "test_fraction must lie in (0, 1)");
  }
  const auto unassigned = manifest.select(SplitTag::kUnassigned).size();
  if (manifest.split_policy == SplitPolicy::kAuthorGiven) {
    if (unassigned != 0) {
      fail(ErrorKind::kSplit, "manifest '" + manifest.name +
                                  "' is author_given but has unassigned entries");
    }
    return manifest;
  }
  if (unassigned == 0) return manifest;
  if (unassigned != manifest.entries.size()) {
    fail(ErrorKind::kSplit, "manifest '" + manifest.name +
                                "' mixes assigned and unassigned entries");
  }

  const size_t n = manifest.entries.size();
  // The epsilon absorbs representation error in (1 - f) * N so that exact
  // products such as 0.8 * 400 do not round up.
  const double exact = (1.0 - test_fraction) * static_cast<double>(n);
  const size_t train_count =
      std::min(n, static_cast<size_t>(std::ceil(exact - 1e-9)));

  DatasetManifest out = manifest;
  const auto order = shuffled_indices(n, seed);
  for (size_t rank = 0; rank < n; ++rank) {
    out.entries[order[rank]].split =
        rank < train_count ? SplitTag::kTrain : SplitTag::kTest;
  }
  return out;
}

namespace {

constexpr ModelRegistryEntry kRegistry[] = {
    {"virchow", "Virchow", "ViT-H", 224, 224, FeatureKind::kClsAttentionHeads},
    {"phikon", "Phikon", "ViT-B", 224, 224, FeatureKind::kClsAttentionHeads},
    {"uni", "UNI", "ViT-L", 224, 224, FeatureKind::kClsAttentionHeads},
    {"hipt", "HIPT", "ViT-S", 256, 256, FeatureKind::kClsAttentionHeads},
    {"lunit_dino", "Lunit DINO", "ViT-S", 224, 224,
     FeatureKind::kClsAttentionHeads},
    {"pathdino", "PathDino", "ViT Custom", 224, 224,
     FeatureKind::kClsAttentionHeads},
    {"cellvit", "CellViT", "ViT-S", 256, 256, FeatureKind::kDenseEmbedding},
    {"phikon_v2", "Phikon-v2", "ViT-L", 224, 224,
     FeatureKind::kClsAttentionHeads},
    {"virchow2", "Virchow2", "ViT-H with 4 registers", 224, 224,
     FeatureKind::kClsAttentionHeads},
    {"conch", "CONCH", "ViT-B", 448, 448, FeatureKind::kClsAttentionHeads},
    // ImageNet-pretrained reference backbone.
    {"vit_b", "ViT-B", "ViT-B", 224, 224, FeatureKind::kClsAttentionHeads},
};

}  // namespace

std::span<const ModelRegistryEntry> model_registry() { return kRegistry; }

const ModelRegistryEntry* find_model(std::string_view model_id) {
  for (const auto& entry : kRegistry) {
    if (entry.model_id == model_id) return &entry;
  }
  return nullptr;
}

}  // namespace attnseg

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

#include "core/pipeline.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "core/error.h"
#include "core/rng.h"

namespace attnseg::pipeline {
namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r') {
      fields.back() += c;
    }
  }
  if (quoted) fail(ErrorKind::kConfig, "unterminated quote in scores CSV");
  return fields;
}

std::vector<FeatureMap> load_maps(const PatchEntry& entry,
                                  const std::vector<std::string>& model_ids) {
  std::vector<FeatureMap> maps;
  maps.reserve(model_ids.size());
  for (const auto& id : model_ids) maps.push_back(load_entry_features(entry, id));
  return maps;
}

}  // namespace

TrainOutcome train_on_manifest(const DatasetManifest& manifest,
                               const RunOptions& options, WorkerPool& pool) {
  if (options.model_ids.empty()) {
    fail(ErrorKind::kConfig, "the model set must name at least one model");
  }
  const DatasetManifest split =
      materialize_split(manifest, options.seed, options.test_fraction);
  const auto entries = split.select(SplitTag::kTrain);
  if (entries.empty()) {
    fail(ErrorKind::kConfig, "manifest '" + manifest.name + "' has no train entries");
  }
  const PixelTable table = build_pixel_table(
      entries, options.model_ids,
      [&](const PatchEntry& entry) { return load_entry_mask(split, entry); },
      [](const PatchEntry& entry, const std::string& id) {
        return load_entry_features(entry, id);
      },
      options.sampling, split.ignore_value, &pool);
  if (table.num_rows() == 0) {
    fail(ErrorKind::kData, "train entries of '" + manifest.name +
                               "' contain no labeled pixels");
  }
  TrainOutcome outcome;
  outcome.num_rows = table.num_rows();
  outcome.model = gbdt::train(table, split.num_classes, options.hyper,
                              options.seed, &pool, &outcome.round_loss);
  return outcome;
}

DiceReport evaluate_on_manifest(const DatasetManifest& manifest,
                                const gbdt::BoostedEnsemble& model,
                                const RunOptions& options, SplitTag split_tag,
                                WorkerPool& pool, const PredictionSink& sink) {
  if (options.model_ids.empty()) {
    fail(ErrorKind::kConfig, "the model set must name at least one model");
  }
  if (model.num_classes != manifest.num_classes) {
    fail(ErrorKind::kShape, "model predicts " + std::to_string(model.num_classes) +
                                " classes, manifest has " +
                                std::to_string(manifest.num_classes));
  }
  const DatasetManifest split =
      materialize_split(manifest, options.seed, options.test_fraction);
  const auto entries = split.select(split_tag);
  if (entries.empty()) {
    fail(ErrorKind::kConfig, "manifest '" + manifest.name + "' has no " +
                                 split_tag_name(split_tag) + " entries");
  }
  DiceAccumulator acc(split.num_classes, split.ignore_value);
  for (const PatchEntry* entry : entries) {
    const LabelMask truth = load_entry_mask(split, *entry);
    const auto maps = load_maps(*entry, options.model_ids);
    const ConcatSampler sampler(maps, truth.height, truth.width);
    LabelMask prediction;
    try {
      prediction = predict_mask(model, sampler, &pool);
    } catch (const Error& e) {
      throw Error(e.kind(), "entry '" + entry->id + "': " + e.what());
    }
    prediction.ignore_value = split.ignore_value;
    acc.add(prediction, truth);
    if (sink) sink(*entry, prediction);
  }
  return acc.report(split.name, options.model_ids, split.class_names);
}

size_t predict_on_manifest(const DatasetManifest& manifest,
                           const gbdt::BoostedEnsemble& model,
                           const RunOptions& options,
                           std::optional<SplitTag> split_tag, WorkerPool& pool,
                           const PredictionSink& sink) {
  if (options.model_ids.empty()) {
    fail(ErrorKind::kConfig, "the model set must name at least one model");
  }
  const DatasetManifest split =
      materialize_split(manifest, options.seed, options.test_fraction);
  std::vector<const PatchEntry*> entries;
  if (split_tag) {
    entries = split.select(*split_tag);
  } else {
    for (const auto& entry : split.entries) entries.push_back(&entry);
  }
  for (const PatchEntry* entry : entries) {
    const auto maps = load_maps(*entry, options.model_ids);
    const ConcatSampler sampler(maps, split.patch_height, split.patch_width);
    LabelMask prediction;
    try {
      prediction = predict_mask(model, sampler, &pool);
    } catch (const Error& e) {
      throw Error(e.kind(), "entry '" + entry->id + "': " + e.what());
    }
    prediction.ignore_value = split.ignore_value;
    if (sink) sink(*entry, prediction);
  }
  return entries.size();
}

std::string loss_log_csv(const std::vector<double>& round_loss) {
  std::ostringstream out;
  out << "round,loss\n";
  char buffer[64];
  for (size_t r = 0; r < round_loss.size(); ++r) {
    std::snprintf(buffer, sizeof(buffer), "%zu,%.17g\n", r + 1, round_loss[r]);
    out << buffer;
  }
  return out.str();
}

ScoreMatrix parse_scores_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::kConfig, "scores CSV is empty");
  const auto header = split_csv_line(line);
  if (header.size() != 3 || header[0] != "dataset" || header[1] != "model" ||
      header[2] != "score") {
    fail(ErrorKind::kConfig, "scores CSV header must be dataset,model,score");
  }
  ScoreMatrix scores;
  size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 3) {
      fail(ErrorKind::kConfig, "scores CSV line " + std::to_string(number) +
                                   ": expected 3 fields");
    }
    double value = 0.0;
    try {
      size_t used = 0;
      value = std::stod(fields[2], &used);
      if (used != fields[2].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      fail(ErrorKind::kConfig, "scores CSV line " + std::to_string(number) +
                                   ": bad score '" + fields[2] + "'");
    }
    if (!std::isfinite(value)) {
      fail(ErrorKind::kConfig, "scores CSV line " + std::to_string(number) +
                                   ": score must be finite");
    }
    if (!scores[fields[0]].emplace(fields[1], value).second) {
      fail(ErrorKind::kConfig, "scores CSV line " + std::to_string(number) +
                                   ": duplicate cell");
    }
  }
  return scores;
}

ScoreMatrix read_scores_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open scores file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_scores_csv(text.str());
}

BenchmarkResult run_benchmark(const BenchmarkOptions& options,
                              WorkerPool& pool) {
  BenchmarkResult result;
  std::set<std::string> models;
  std::set<std::string> datasets;
  for (const auto& [dataset, row] : options.injected) {
    datasets.insert(dataset);
    for (const auto& [model, score] : row) models.insert(model);
  }
  for (const auto& set : options.model_sets) models.insert(model_set_label(set));

  std::set<std::string> manifest_names;
  for (const auto& path : options.manifests) {
    const DatasetManifest manifest = load_manifest(path, options.strict);
    if (!manifest_names.insert(manifest.name).second) {
      fail(ErrorKind::kConfig, "dataset name '" + manifest.name +
                                   "' appears in more than one manifest");
    }
    datasets.insert(manifest.name);
    for (const auto& set : options.model_sets) {
      if (!manifest.has_models(set)) continue;
      RunOptions run = options.run;
      run.model_ids = set;
      const TrainOutcome trained = train_on_manifest(manifest, run, pool);
      DiceReport report = evaluate_on_manifest(manifest, trained.model, run,
                                               SplitTag::kTest, pool);
      result.scores[manifest.name][model_set_label(set)] = report.mean_dice;
      result.reports.push_back(std::move(report));
    }
  }
  for (const auto& [dataset, row] : options.injected) {
    for (const auto& [model, score] : row) {
      result.scores[dataset].emplace(model, score);
    }
  }
  if (datasets.empty() || models.empty()) {
    fail(ErrorKind::kConfig, "benchmark has no datasets or no model sets");
  }
  for (const auto& dataset : datasets) {
    for (const auto& model : models) {
      const auto it = result.scores.find(dataset);
      if (it == result.scores.end() || !it->second.contains(model)) {
        fail(ErrorKind::kConfig, "no score for model set '" + model +
                                     "' on dataset '" + dataset +
                                     "': features missing and no --scores cell");
      }
    }
  }
  result.ranks = rank_models(result.scores);
  return result;
}

std::filesystem::path write_synth_dataset(const SynthDatasetOptions& options,
                                          const std::filesystem::path& out_dir) {
  options.spec.validate();
  if (options.scenes == 0) fail(ErrorKind::kConfig, "scenes must be >= 1");
  if (options.complementary && options.spec.num_classes < 4) {
    fail(ErrorKind::kConfig, "--complementary needs at least 4 classes");
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create " + out_dir.string());

  DatasetManifest manifest;
  manifest.name = options.name;
  manifest.num_classes = options.spec.num_classes;
  for (size_t c = 0; c < manifest.num_classes; ++c) {
    manifest.class_names.push_back("class" + std::to_string(c));
  }
  manifest.magnification = "synthetic";
  manifest.patch_height = options.spec.height;
  manifest.patch_width = options.spec.width;
  manifest.split_policy = SplitPolicy::kRandom;

  for (size_t i = 0; i < options.scenes; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "scene%03zu", i);
    synth::SynthSpec spec = options.spec;
    spec.seed = derive_seed(options.spec.seed, 100 + i);
    PatchEntry entry;
    entry.id = id;
    entry.mask_path = out_dir / (entry.id + ".mask.npy");
    auto feature_path = [&](const std::string& model) {
      return out_dir / (entry.id + "." + model + ".npy");
    };
    if (options.complementary) {
      const auto scene = synth::generate_complementary_pair(spec);
      tensorio::write_tensor(scene.mask, entry.mask_path);
      entry.feature_paths["synthA"] = feature_path("synthA");
      entry.feature_paths["synthB"] = feature_path("synthB");
      tensorio::write_tensor(scene.first, entry.feature_paths["synthA"]);
      tensorio::write_tensor(scene.second, entry.feature_paths["synthB"]);
    } else {
      const auto scene = synth::generate_scene(spec);
      tensorio::write_tensor(scene.mask, entry.mask_path);
      entry.feature_paths["synth"] = feature_path("synth");
      tensorio::write_tensor(scene.features, entry.feature_paths["synth"]);
    }
    manifest.entries.push_back(std::move(entry));
  }
  const auto manifest_path = out_dir / "manifest.json";
  save_manifest(manifest, manifest_path);
  return manifest_path;
}

}  // namespace attnseg::pipeline

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

#ifndef ATTNSEG_CORE_PIPELINE_H_
#define ATTNSEG_CORE_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "core/datasets.h"
#include "core/eval.h"
#include "core/features.h"
#include "core/gbdt.h"
#include "core/parallel.h"
#include "core/synth.h"

namespace attnseg::pipeline {

struct RunOptions {
  std::vector<std::string> model_ids;
  gbdt::Hyperparams hyper;
  SamplingPolicy sampling;
  uint64_t seed = 0;  // split shuffle and training
  double test_fraction = kDefaultTestFraction;
};

struct TrainOutcome {
  gbdt::BoostedEnsemble model;
  std::vector<double> round_loss;
  size_t num_rows = 0;
};

// Materializes the split (random manifests), samples a pixel table from the
// train entries and fits the ensemble.
TrainOutcome train_on_manifest(const DatasetManifest& manifest,
                               const RunOptions& options, WorkerPool& pool);

using PredictionSink =
    std::function<void(const PatchEntry& entry, const LabelMask& prediction)>;

// Predicts every entry of `split` and accumulates micro Dice.
DiceReport evaluate_on_manifest(const DatasetManifest& manifest,
                                const gbdt::BoostedEnsemble& model,
                                const RunOptions& options, SplitTag split,
                                WorkerPool& pool,
                                const PredictionSink& sink = {});

// Predicts entries at the manifest's patch resolution without reading
// masks. `split` selects entries; nullopt predicts all of them. Returns the
// number of predicted entries.
size_t predict_on_manifest(const DatasetManifest& manifest,
                           const gbdt::BoostedEnsemble& model,
                           const RunOptions& options,
                           std::optional<SplitTag> split, WorkerPool& pool,
                           const PredictionSink& sink);

// Training log: "round,loss" with 17 significant digits.
std::string loss_log_csv(const std::vector<double>& round_loss);

// Long-format scores: header "dataset,model,score", one cell per line.
ScoreMatrix read_scores_csv(const std::filesystem::path& path);
ScoreMatrix parse_scores_csv(const std::string& text);

struct BenchmarkOptions {
  std::vector<std::filesystem::path> manifests;
  std::vector<std::vector<std::string>> model_sets;
  RunOptions run;  // model_ids is ignored
  ScoreMatrix injected;
  bool strict = false;
};

struct BenchmarkResult {
  std::vector<DiceReport> reports;
  ScoreMatrix scores;
  RankTable ranks;
};

// Trains and evaluates each runnable (dataset, model set) cell, fills the
// remaining cells from injected scores, and ranks the model sets.
BenchmarkResult run_benchmark(const BenchmarkOptions& options,
                              WorkerPool& pool);

struct SynthDatasetOptions {
  synth::SynthSpec spec;
  size_t scenes = 16;
  bool complementary = false;
  std::string name = "synth";
};

// Writes masks, feature maps and manifest.json into `out_dir`. Returns the
// manifest path.
std::filesystem::path write_synth_dataset(const SynthDatasetOptions& options,
                                          const std::filesystem::path& out_dir);

}  // namespace attnseg::pipeline

#endif  // ATTNSEG_CORE_PIPELINE_H_

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

#include "attnseg/attnseg.h"

#include <memory>
#include <cstdio>
#include <filesystem>
#include <new>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "core/datasets.h"
#include "core/error.h"
#include "core/eval.h"
#include "core/gbdt.h"
#include "core/pipeline.h"
#include "core/tensor.h"

struct attnseg_manifest {
  attnseg::DatasetManifest manifest;
  std::vector<std::string> models;
};

struct attnseg_model {
  attnseg::gbdt::BoostedEnsemble model;
  std::vector<double> round_loss;
  size_t train_rows = 0;
};

struct attnseg_report {
  attnseg::DiceReport report;
};

struct attnseg_scores {
  attnseg::ScoreMatrix scores;
};

struct attnseg_ranking {
  attnseg::RankTable table;
};

namespace {

using attnseg::Error;
using attnseg::ErrorKind;

thread_local std::string g_last_error;

attnseg_status to_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kArgument: return ATTNSEG_ERR_ARGUMENT;
    case ErrorKind::kConfig: return ATTNSEG_ERR_CONFIG;
    case ErrorKind::kFormat: return ATTNSEG_ERR_FORMAT;
    case ErrorKind::kUnsupportedDtype: return ATTNSEG_ERR_UNSUPPORTED_DTYPE;
    case ErrorKind::kData: return ATTNSEG_ERR_DATA;
    case ErrorKind::kShape: return ATTNSEG_ERR_SHAPE;
    case ErrorKind::kManifest: return ATTNSEG_ERR_MANIFEST;
    case ErrorKind::kSplit: return ATTNSEG_ERR_SPLIT;
    case ErrorKind::kIo: return ATTNSEG_ERR_IO;
    case ErrorKind::kInternal: return ATTNSEG_ERR_INTERNAL;
  }
  return ATTNSEG_ERR_INTERNAL;
}

template <typename Fn>
attnseg_status guarded(Fn&& fn) {
  try {
    fn();
    return ATTNSEG_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return to_status(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return ATTNSEG_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return ATTNSEG_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown exception";
    return ATTNSEG_ERR_INTERNAL;
  }
}

template <typename T>
void require(const T* pointer, const char* what) {
  if (pointer == nullptr) {
    attnseg::fail(ErrorKind::kArgument, std::string(what) + " must not be NULL");
  }
}

attnseg::pipeline::RunOptions to_run_options(const attnseg_run_options& in) {
  attnseg::pipeline::RunOptions out;
  for (size_t i = 0; i < in.num_model_ids; ++i) {
    require(in.model_ids, "model_ids");
    require(in.model_ids[i], "model id");
    out.model_ids.emplace_back(in.model_ids[i]);
  }
  out.hyper.rounds = in.hyper.rounds;
  out.hyper.learning_rate = in.hyper.learning_rate;
  out.hyper.max_depth = in.hyper.max_depth;
  out.hyper.lambda = in.hyper.lambda;
  out.hyper.gamma = in.hyper.gamma;
  out.hyper.min_child_weight = in.hyper.min_child_weight;
  out.hyper.max_bins = in.hyper.max_bins;
  out.hyper.hessian_floor = in.hyper.hessian_floor;
  out.sampling.max_pixels_per_class_per_image =
      static_cast<size_t>(in.sampling.max_pixels_per_class_per_image);
  out.sampling.seed = in.sampling.seed;
  out.seed = in.seed;
  out.test_fraction = in.test_fraction;
  return out;
}

attnseg::SplitTag to_split(attnseg_split split) {
  switch (split) {
    case ATTNSEG_SPLIT_TRAIN: return attnseg::SplitTag::kTrain;
    case ATTNSEG_SPLIT_TEST: return attnseg::SplitTag::kTest;
    case ATTNSEG_SPLIT_UNASSIGNED: return attnseg::SplitTag::kUnassigned;
    case ATTNSEG_SPLIT_ALL: break;
  }
  attnseg::fail(ErrorKind::kArgument, "split must be train, test or unassigned");
}

std::unique_ptr<attnseg_manifest> wrap(attnseg::DatasetManifest manifest) {
  auto out = std::make_unique<attnseg_manifest>();
  std::set<std::string> models;
  for (const auto& entry : manifest.entries) {
    for (const auto& [id, path] : entry.feature_paths) models.insert(id);
  }
  out->models.assign(models.begin(), models.end());
  out->manifest = std::move(manifest);
  return out;
}

std::vector<std::string> parse_model_set(const std::string& text) {
  std::vector<std::string> ids;
  size_t start = 0;
  for (;;) {
    const size_t plus = text.find('+', start);
    const std::string id = text.substr(start, plus - start);
    if (id.empty()) {
      attnseg::fail(ErrorKind::kConfig, "malformed model set '" + text + "'");
    }
    ids.push_back(id);
    if (plus == std::string::npos) return ids;
    start = plus + 1;
  }
}

}  // namespace

extern "C" {

const char* attnseg_version(void) { return "0.1.0"; }

const char* attnseg_last_error(void) { return g_last_error.c_str(); }

const char* attnseg_status_string(attnseg_status status) {
  switch (status) {
    case ATTNSEG_OK: return "ok";
    case ATTNSEG_ERR_ARGUMENT: return "argument error";
    case ATTNSEG_ERR_CONFIG: return "config error";
    case ATTNSEG_ERR_FORMAT: return "format error";
    case ATTNSEG_ERR_UNSUPPORTED_DTYPE: return "unsupported-dtype error";
    case ATTNSEG_ERR_DATA: return "data error";
    case ATTNSEG_ERR_SHAPE: return "shape error";
    case ATTNSEG_ERR_MANIFEST: return "manifest error";
    case ATTNSEG_ERR_SPLIT: return "split error";
    case ATTNSEG_ERR_IO: return "I/O error";
    case ATTNSEG_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void attnseg_run_options_init(attnseg_run_options* options) {
  if (options == nullptr) return;
  const attnseg::pipeline::RunOptions defaults;
  *options = attnseg_run_options{};
  options->hyper.rounds = defaults.hyper.rounds;
  options->hyper.learning_rate = defaults.hyper.learning_rate;
  options->hyper.max_depth = defaults.hyper.max_depth;
  options->hyper.lambda = defaults.hyper.lambda;
  options->hyper.gamma = defaults.hyper.gamma;
  options->hyper.min_child_weight = defaults.hyper.min_child_weight;
  options->hyper.max_bins = defaults.hyper.max_bins;
  options->hyper.hessian_floor = defaults.hyper.hessian_floor;
  options->sampling.max_pixels_per_class_per_image =
      defaults.sampling.max_pixels_per_class_per_image;
  options->sampling.seed = defaults.sampling.seed;
  options->seed = defaults.seed;
  options->test_fraction = defaults.test_fraction;
  options->threads = 1;
}

attnseg_status attnseg_tensor_inspect(const char* path,
                                      attnseg_tensor_info* out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    const auto tensor = attnseg::tensorio::read_tensor(path);
    attnseg_tensor_info info{};
    if (const auto* map = std::get_if<attnseg::FeatureMap>(&tensor)) {
      info.dtype = ATTNSEG_DTYPE_F32;
      info.ndim = 3;
      info.shape[0] = map->height;
      info.shape[1] = map->width;
      info.shape[2] = map->channels;
    } else {
      const auto& mask = std::get<attnseg::LabelMask>(tensor);
      info.dtype = ATTNSEG_DTYPE_U8;
      info.ndim = 2;
      info.shape[0] = mask.height;
      info.shape[1] = mask.width;
    }
    *out = info;
  });
}

attnseg_status attnseg_manifest_load(const char* path, int strict,
                                     attnseg_manifest** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = wrap(attnseg::load_manifest(path, strict != 0)).release();
  });
}

void attnseg_manifest_free(attnseg_manifest* manifest) { delete manifest; }

const char* attnseg_manifest_name(const attnseg_manifest* manifest) {
  return manifest != nullptr ? manifest->manifest.name.c_str() : "";
}

size_t attnseg_manifest_num_classes(const attnseg_manifest* manifest) {
  return manifest != nullptr ? manifest->manifest.num_classes : 0;
}

size_t attnseg_manifest_num_entries(const attnseg_manifest* manifest) {
  return manifest != nullptr ? manifest->manifest.entries.size() : 0;
}

size_t attnseg_manifest_count_split(const attnseg_manifest* manifest,
                                    attnseg_split split) {
  if (manifest == nullptr) return 0;
  if (split == ATTNSEG_SPLIT_ALL) return manifest->manifest.entries.size();
  size_t count = 0;
  for (const auto& entry : manifest->manifest.entries) {
    if ((split == ATTNSEG_SPLIT_TRAIN && entry.split == attnseg::SplitTag::kTrain) ||
        (split == ATTNSEG_SPLIT_TEST && entry.split == attnseg::SplitTag::kTest) ||
        (split == ATTNSEG_SPLIT_UNASSIGNED &&
         entry.split == attnseg::SplitTag::kUnassigned)) {
      ++count;
    }
  }
  return count;
}

size_t attnseg_manifest_num_models(const attnseg_manifest* manifest) {
  return manifest != nullptr ? manifest->models.size() : 0;
}

const char* attnseg_manifest_model(const attnseg_manifest* manifest,
                                   size_t index) {
  if (manifest == nullptr || index >= manifest->models.size()) return nullptr;
  return manifest->models[index].c_str();
}

attnseg_status attnseg_manifest_split(const attnseg_manifest* manifest,
                                      uint64_t seed, double test_fraction,
                                      attnseg_manifest** out) {
  return guarded([&] {
    require(manifest, "manifest");
    require(out, "out");
    *out = wrap(attnseg::materialize_split(manifest->manifest, seed,
                                           test_fraction))
               .release();
  });
}

attnseg_status attnseg_manifest_save(const attnseg_manifest* manifest,
                                     const char* path) {
  return guarded([&] {
    require(manifest, "manifest");
    require(path, "path");
    attnseg::save_manifest(manifest->manifest, path);
  });
}

attnseg_status attnseg_train(const attnseg_manifest* manifest,
                             const attnseg_run_options* options,
                             attnseg_model** out) {
  return guarded([&] {
    require(manifest, "manifest");
    require(options, "options");
    require(out, "out");
    attnseg::WorkerPool pool(options->threads);
    auto trained = attnseg::pipeline::train_on_manifest(
        manifest->manifest, to_run_options(*options), pool);
    auto model = std::make_unique<attnseg_model>();
    model->model = std::move(trained.model);
    model->round_loss = std::move(trained.round_loss);
    model->train_rows = trained.num_rows;
    *out = model.release();
  });
}

attnseg_status attnseg_model_load(const char* path, attnseg_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto model = std::make_unique<attnseg_model>();
    model->model = attnseg::gbdt::load_model(path);
    *out = model.release();
  });
}

attnseg_status attnseg_model_save(const attnseg_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    attnseg::gbdt::save_model(model->model, path);
  });
}

void attnseg_model_free(attnseg_model* model) { delete model; }

size_t attnseg_model_num_classes(const attnseg_model* model) {
  return model != nullptr ? model->model.num_classes : 0;
}

size_t attnseg_model_num_features(const attnseg_model* model) {
  return model != nullptr ? model->model.num_features : 0;
}

size_t attnseg_model_rounds(const attnseg_model* model) {
  return model != nullptr ? model->model.rounds : 0;
}

size_t attnseg_model_loss_count(const attnseg_model* model) {
  return model != nullptr ? model->round_loss.size() : 0;
}

double attnseg_model_loss(const attnseg_model* model, size_t round) {
  if (model == nullptr || round >= model->round_loss.size()) return 0.0;
  return model->round_loss[round];
}

size_t attnseg_model_train_rows(const attnseg_model* model) {
  return model != nullptr ? model->train_rows : 0;
}

attnseg_status attnseg_model_write_loss_log(const attnseg_model* model,
                                            const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    std::FILE* file = std::fopen(path, "wb");
    if (file == nullptr) {
      attnseg::fail(ErrorKind::kIo, std::string("cannot open ") + path);
    }
    const std::string text = attnseg::pipeline::loss_log_csv(model->round_loss);
    const size_t written = std::fwrite(text.data(), 1, text.size(), file);
    const bool closed = std::fclose(file) == 0;
    if (written != text.size() || !closed) {
      attnseg::fail(ErrorKind::kIo, std::string("write failed for ") + path);
    }
  });
}

attnseg_status attnseg_model_predict_proba(const attnseg_model* model,
                                           const float* rows, size_t num_rows,
                                           size_t row_width, double* out) {
  return guarded([&] {
    require(model, "model");
    if (num_rows == 0) return;
    require(rows, "rows");
    require(out, "out");
    const auto probabilities = attnseg::gbdt::predict_proba(
        model->model, {rows, num_rows * row_width}, row_width);
    std::copy(probabilities.begin(), probabilities.end(), out);
  });
}

attnseg_status attnseg_predict(const attnseg_manifest* manifest,
                               const attnseg_model* model,
                               const attnseg_run_options* options,
                               attnseg_split split, const char* out_dir,
                               size_t* num_predicted) {
  return guarded([&] {
    require(manifest, "manifest");
    require(model, "model");
    require(options, "options");
    require(out_dir, "out_dir");
    std::optional<attnseg::SplitTag> tag;
    if (split != ATTNSEG_SPLIT_ALL) tag = to_split(split);
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    attnseg::WorkerPool pool(options->threads);
    const size_t count = attnseg::pipeline::predict_on_manifest(
        manifest->manifest, model->model, to_run_options(*options), tag, pool,
        [&](const attnseg::PatchEntry& entry, const attnseg::LabelMask& mask) {
          attnseg::tensorio::write_tensor(mask, dir / (entry.id + ".pred.npy"));
        });
    if (num_predicted != nullptr) *num_predicted = count;
  });
}

attnseg_status attnseg_evaluate(const attnseg_manifest* manifest,
                                const attnseg_model* model,
                                const attnseg_run_options* options,
                                attnseg_split split,
                                const char* prediction_dir,
                                attnseg_report** out) {
  return guarded([&] {
    require(manifest, "manifest");
    require(model, "model");
    require(options, "options");
    require(out, "out");
    attnseg::pipeline::PredictionSink sink;
    std::filesystem::path dir;
    if (prediction_dir != nullptr) {
      dir = prediction_dir;
      std::filesystem::create_directories(dir);
      sink = [&](const attnseg::PatchEntry& entry,
                 const attnseg::LabelMask& mask) {
        attnseg::tensorio::write_tensor(mask, dir / (entry.id + ".pred.npy"));
      };
    }
    attnseg::WorkerPool pool(options->threads);
    auto report = std::make_unique<attnseg_report>();
    report->report = attnseg::pipeline::evaluate_on_manifest(
        manifest->manifest, model->model, to_run_options(*options),
        to_split(split), pool, sink);
    *out = report.release();
  });
}

void attnseg_report_free(attnseg_report* report) { delete report; }

double attnseg_report_mean_dice(const attnseg_report* report) {
  return report != nullptr ? report->report.mean_dice : 0.0;
}

size_t attnseg_report_num_classes(const attnseg_report* report) {
  return report != nullptr ? report->report.per_class_dice.size() : 0;
}

double attnseg_report_class_dice(const attnseg_report* report, size_t cls) {
  if (report == nullptr || cls >= report->report.per_class_dice.size()) return 0.0;
  return report->report.per_class_dice[cls];
}

int attnseg_report_class_vacuous(const attnseg_report* report, size_t cls) {
  if (report == nullptr || cls >= report->report.vacuous.size()) return 0;
  return report->report.vacuous[cls] ? 1 : 0;
}

attnseg_status attnseg_report_write(const attnseg_report* const* reports,
                                    size_t count,
                                    const attnseg_ranking* ranking,
                                    const char* csv_path) {
  return guarded([&] {
    require(csv_path, "csv_path");
    std::vector<attnseg::DiceReport> list;
    for (size_t i = 0; i < count; ++i) {
      require(reports, "reports");
      require(reports[i], "report");
      list.push_back(reports[i]->report);
    }
    attnseg::emit_report(list, ranking != nullptr ? &ranking->table : nullptr,
                         csv_path);
  });
}

attnseg_status attnseg_scores_create(attnseg_scores** out) {
  return guarded([&] {
    require(out, "out");
    *out = new attnseg_scores();
  });
}

attnseg_status attnseg_scores_read_csv(const char* path, attnseg_scores** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto scores = std::make_unique<attnseg_scores>();
    scores->scores = attnseg::pipeline::read_scores_csv(path);
    *out = scores.release();
  });
}

attnseg_status attnseg_scores_set(attnseg_scores* scores, const char* dataset,
                                  const char* model, double value) {
  return guarded([&] {
    require(scores, "scores");
    require(dataset, "dataset");
    require(model, "model");
    scores->scores[dataset][model] = value;
  });
}

void attnseg_scores_free(attnseg_scores* scores) { delete scores; }

attnseg_status attnseg_rank(const attnseg_scores* scores, attnseg_ranking** out) {
  return guarded([&] {
    require(scores, "scores");
    require(out, "out");
    auto ranking = std::make_unique<attnseg_ranking>();
    ranking->table = attnseg::rank_models(scores->scores);
    *out = ranking.release();
  });
}

void attnseg_ranking_free(attnseg_ranking* ranking) { delete ranking; }

size_t attnseg_ranking_num_models(const attnseg_ranking* ranking) {
  return ranking != nullptr ? ranking->table.rows.size() : 0;
}

size_t attnseg_ranking_num_datasets(const attnseg_ranking* ranking) {
  return ranking != nullptr ? ranking->table.datasets.size() : 0;
}

const char* attnseg_ranking_model(const attnseg_ranking* ranking, size_t index) {
  if (ranking == nullptr || index >= ranking->table.rows.size()) return nullptr;
  return ranking->table.rows[index].model.c_str();
}

double attnseg_ranking_mean_rank(const attnseg_ranking* ranking, size_t index) {
  if (ranking == nullptr || index >= ranking->table.rows.size()) return 0.0;
  return ranking->table.rows[index].mean_rank;
}

double attnseg_ranking_mean_score(const attnseg_ranking* ranking, size_t index) {
  if (ranking == nullptr || index >= ranking->table.rows.size()) return 0.0;
  return ranking->table.rows[index].mean_score;
}

int attnseg_ranking_tied(const attnseg_ranking* ranking, size_t index) {
  if (ranking == nullptr || index >= ranking->table.rows.size()) return 0;
  return ranking->table.rows[index].tied ? 1 : 0;
}

attnseg_status attnseg_benchmark(const attnseg_benchmark_options* options,
                                 const char* csv_path, attnseg_ranking** out) {
  return guarded([&] {
    require(options, "options");
    require(csv_path, "csv_path");
    attnseg::pipeline::BenchmarkOptions bench;
    for (size_t i = 0; i < options->num_manifests; ++i) {
      require(options->manifests, "manifests");
      require(options->manifests[i], "manifest path");
      bench.manifests.emplace_back(options->manifests[i]);
    }
    for (size_t i = 0; i < options->num_model_sets; ++i) {
      require(options->model_sets, "model_sets");
      require(options->model_sets[i], "model set");
      bench.model_sets.push_back(parse_model_set(options->model_sets[i]));
    }
    bench.run = to_run_options(options->run);
    bench.run.model_ids.clear();
    if (options->injected != nullptr) bench.injected = options->injected->scores;
    bench.strict = options->strict != 0;
    attnseg::WorkerPool pool(options->run.threads);
    auto result = attnseg::pipeline::run_benchmark(bench, pool);
    attnseg::emit_report(result.reports, &result.ranks, csv_path);
    if (out != nullptr) {
      auto ranking = std::make_unique<attnseg_ranking>();
      ranking->table = std::move(result.ranks);
      *out = ranking.release();
    }
  });
}

void attnseg_synth_options_init(attnseg_synth_options* options) {
  if (options == nullptr) return;
  const attnseg::pipeline::SynthDatasetOptions defaults;
  *options = attnseg_synth_options{};
  options->height = defaults.spec.height;
  options->width = defaults.spec.width;
  options->num_classes = defaults.spec.num_classes;
  options->blob_count = defaults.spec.blob_count;
  options->noise_sigma = defaults.spec.noise_sigma;
  options->channels_per_class = defaults.spec.channels_per_class;
  options->token_stride = defaults.spec.token_stride;
  options->seed = defaults.spec.seed;
  options->scenes = defaults.scenes;
  options->complementary = 0;
  options->name = nullptr;
}

attnseg_status attnseg_synth_write(const attnseg_synth_options* options,
                                   const char* out_dir) {
  return guarded([&] {
    require(options, "options");
    require(out_dir, "out_dir");
    attnseg::pipeline::SynthDatasetOptions synth;
    synth.spec.height = options->height;
    synth.spec.width = options->width;
    synth.spec.num_classes = options->num_classes;
    synth.spec.blob_count = options->blob_count;
    synth.spec.noise_sigma = options->noise_sigma;
    synth.spec.channels_per_class = options->channels_per_class;
    synth.spec.token_stride = options->token_stride;
    for (size_t i = 0; i < options->num_informative; ++i) {
      require(options->informative_classes, "informative_classes");
      synth.spec.informative_classes.push_back(options->informative_classes[i]);
    }
    synth.spec.seed = options->seed;
    synth.scenes = options->scenes;
    synth.complementary = options->complementary != 0;
    if (options->name != nullptr) synth.name = options->name;
    try {
      attnseg::pipeline::write_synth_dataset(synth, out_dir);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kArgument) {
        attnseg::fail(ErrorKind::kConfig, e.what());
      }
      throw;
    }
  });
}

}  // extern "C"

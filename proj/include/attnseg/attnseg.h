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

/* C interface to the attnseg engine.
 *
 * Every fallible call returns an attnseg_status. On failure, a description
 * of the most recent error on the calling thread is available from
 * attnseg_last_error() until the next failing call on that thread.
 *
 * Handles are opaque and owned by the caller; release each with its
 * matching *_free function. Handles are immutable after creation except
 * attnseg_scores, and may be shared across threads for reading.
 */

#ifndef ATTNSEG_ATTNSEG_H_
#define ATTNSEG_ATTNSEG_H_

#include <stddef.h>
#include <stdint.h>

#if defined(ATTNSEG_BUILDING_LIBRARY)
#define ATTNSEG_API __attribute__((visibility("default")))
#else
#define ATTNSEG_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum attnseg_status {
  ATTNSEG_OK = 0,
  ATTNSEG_ERR_ARGUMENT = 1,
  ATTNSEG_ERR_CONFIG = 2,
  ATTNSEG_ERR_FORMAT = 3,
  ATTNSEG_ERR_UNSUPPORTED_DTYPE = 4,
  ATTNSEG_ERR_DATA = 5,
  ATTNSEG_ERR_SHAPE = 6,
  ATTNSEG_ERR_MANIFEST = 7,
  ATTNSEG_ERR_SPLIT = 8,
  ATTNSEG_ERR_IO = 9,
  ATTNSEG_ERR_INTERNAL = 10
} attnseg_status;

typedef enum attnseg_split {
  ATTNSEG_SPLIT_UNASSIGNED = 0,
  ATTNSEG_SPLIT_TRAIN = 1,
  ATTNSEG_SPLIT_TEST = 2,
  ATTNSEG_SPLIT_ALL = 3 /* prediction only */
} attnseg_split;

typedef enum attnseg_dtype {
  ATTNSEG_DTYPE_F32 = 0, /* feature map, '<f4' */
  ATTNSEG_DTYPE_U8 = 1   /* label mask, '|u1' */
} attnseg_dtype;

ATTNSEG_API const char* attnseg_version(void);
ATTNSEG_API const char* attnseg_last_error(void);
ATTNSEG_API const char* attnseg_status_string(attnseg_status status);

/* ---- run configuration ------------------------------------------------ */

typedef struct attnseg_hyperparams {
  uint32_t rounds;
  double learning_rate;
  uint32_t max_depth;
  double lambda;
  double gamma;
  double min_child_weight;
  uint32_t max_bins;
  double hessian_floor;
} attnseg_hyperparams;

typedef struct attnseg_sampling {
  uint64_t max_pixels_per_class_per_image;
  uint64_t seed;
} attnseg_sampling;

typedef struct attnseg_run_options {
  const char* const* model_ids; /* ordered; >1 ids concatenates features */
  size_t num_model_ids;
  attnseg_hyperparams hyper;
  attnseg_sampling sampling;
  uint64_t seed; /* split shuffle */
  double test_fraction;
  uint32_t threads; /* 0 = hardware concurrency */
} attnseg_run_options;

/* Fills defaults: 100 rounds, eta 0.3, depth 6, lambda 1, gamma 0,
 * min_child_weight 1, 256 bins, 2000 pixels per class per image, test
 * fraction 0.2, one thread. */
ATTNSEG_API void attnseg_run_options_init(attnseg_run_options* options);

/* ---- tensors ------------------------------------------------------------ */

typedef struct attnseg_tensor_info {
  attnseg_dtype dtype;
  size_t ndim;
  size_t shape[3];
} attnseg_tensor_info;

/* Fully loads and validates a tensor file, reporting its dtype and shape. */
ATTNSEG_API attnseg_status attnseg_tensor_inspect(const char* path,
                                                  attnseg_tensor_info* out);

/* ---- manifests ---------------------------------------------------------- */

typedef struct attnseg_manifest attnseg_manifest;

ATTNSEG_API attnseg_status attnseg_manifest_load(const char* path, int strict,
                                                 attnseg_manifest** out);
ATTNSEG_API void attnseg_manifest_free(attnseg_manifest* manifest);
ATTNSEG_API const char* attnseg_manifest_name(const attnseg_manifest* manifest);
ATTNSEG_API size_t attnseg_manifest_num_classes(const attnseg_manifest* manifest);
ATTNSEG_API size_t attnseg_manifest_num_entries(const attnseg_manifest* manifest);
ATTNSEG_API size_t attnseg_manifest_count_split(const attnseg_manifest* manifest,
                                                attnseg_split split);
/* Sorted union of the model ids referenced by any entry. */
ATTNSEG_API size_t attnseg_manifest_num_models(const attnseg_manifest* manifest);
ATTNSEG_API const char* attnseg_manifest_model(const attnseg_manifest* manifest,
                                               size_t index);
ATTNSEG_API attnseg_status attnseg_manifest_split(
    const attnseg_manifest* manifest, uint64_t seed, double test_fraction,
    attnseg_manifest** out);
ATTNSEG_API attnseg_status attnseg_manifest_save(
    const attnseg_manifest* manifest, const char* path);

/* ---- models ------------------------------------------------------------- */

typedef struct attnseg_model attnseg_model;

ATTNSEG_API attnseg_status attnseg_train(const attnseg_manifest* manifest,
                                         const attnseg_run_options* options,
                                         attnseg_model** out);
ATTNSEG_API attnseg_status attnseg_model_load(const char* path,
                                              attnseg_model** out);
ATTNSEG_API attnseg_status attnseg_model_save(const attnseg_model* model,
                                              const char* path);
ATTNSEG_API void attnseg_model_free(attnseg_model* model);
ATTNSEG_API size_t attnseg_model_num_classes(const attnseg_model* model);
ATTNSEG_API size_t attnseg_model_num_features(const attnseg_model* model);
ATTNSEG_API size_t attnseg_model_rounds(const attnseg_model* model);
/* Per-round training loss; empty for models loaded from disk. */
ATTNSEG_API size_t attnseg_model_loss_count(const attnseg_model* model);
ATTNSEG_API double attnseg_model_loss(const attnseg_model* model, size_t round);
ATTNSEG_API size_t attnseg_model_train_rows(const attnseg_model* model);
ATTNSEG_API attnseg_status attnseg_model_write_loss_log(
    const attnseg_model* model, const char* path);
/* rows: num_rows x row_width floats; out: num_rows x num_classes. */
ATTNSEG_API attnseg_status attnseg_model_predict_proba(
    const attnseg_model* model, const float* rows, size_t num_rows,
    size_t row_width, double* out);

/* Writes "<entry id>.pred.npy" label masks into out_dir. */
ATTNSEG_API attnseg_status attnseg_predict(const attnseg_manifest* manifest,
                                           const attnseg_model* model,
                                           const attnseg_run_options* options,
                                           attnseg_split split,
                                           const char* out_dir,
                                           size_t* num_predicted);

/* ---- evaluation --------------------------------------------------------- */

typedef struct attnseg_report attnseg_report;
typedef struct attnseg_scores attnseg_scores;
typedef struct attnseg_ranking attnseg_ranking;

/* prediction_dir may be NULL; otherwise predicted masks are written there. */
ATTNSEG_API attnseg_status attnseg_evaluate(const attnseg_manifest* manifest,
                                            const attnseg_model* model,
                                            const attnseg_run_options* options,
                                            attnseg_split split,
                                            const char* prediction_dir,
                                            attnseg_report** out);
ATTNSEG_API void attnseg_report_free(attnseg_report* report);
ATTNSEG_API double attnseg_report_mean_dice(const attnseg_report* report);
ATTNSEG_API size_t attnseg_report_num_classes(const attnseg_report* report);
ATTNSEG_API double attnseg_report_class_dice(const attnseg_report* report,
                                             size_t cls);
ATTNSEG_API int attnseg_report_class_vacuous(const attnseg_report* report,
                                             size_t cls);
/* Writes csv_path, its ".txt" table and, with ranking, "<stem>.ranks.csv".
 * reports may be NULL when count is 0; ranking may be NULL. */
ATTNSEG_API attnseg_status attnseg_report_write(
    const attnseg_report* const* reports, size_t count,
    const attnseg_ranking* ranking, const char* csv_path);

/* ---- scores and ranking ------------------------------------------------- */

ATTNSEG_API attnseg_status attnseg_scores_create(attnseg_scores** out);
/* Long format: header "dataset,model,score". */
ATTNSEG_API attnseg_status attnseg_scores_read_csv(const char* path,
                                                   attnseg_scores** out);
ATTNSEG_API attnseg_status attnseg_scores_set(attnseg_scores* scores,
                                              const char* dataset,
                                              const char* model, double value);
ATTNSEG_API void attnseg_scores_free(attnseg_scores* scores);

ATTNSEG_API attnseg_status attnseg_rank(const attnseg_scores* scores,
                                        attnseg_ranking** out);
ATTNSEG_API void attnseg_ranking_free(attnseg_ranking* ranking);
ATTNSEG_API size_t attnseg_ranking_num_models(const attnseg_ranking* ranking);
ATTNSEG_API size_t attnseg_ranking_num_datasets(const attnseg_ranking* ranking);
/* Models in ranked order (index 0 = best mean rank). */
ATTNSEG_API const char* attnseg_ranking_model(const attnseg_ranking* ranking,
                                              size_t index);
ATTNSEG_API double attnseg_ranking_mean_rank(const attnseg_ranking* ranking,
                                             size_t index);
ATTNSEG_API double attnseg_ranking_mean_score(const attnseg_ranking* ranking,
                                              size_t index);
ATTNSEG_API int attnseg_ranking_tied(const attnseg_ranking* ranking,
                                     size_t index);

/* ---- benchmark ---------------------------------------------------------- */

typedef struct attnseg_benchmark_options {
  const char* const* manifests;
  size_t num_manifests;
  /* Each model set is "id" or "id+id+..." for concatenated features. */
  const char* const* model_sets;
  size_t num_model_sets;
  const attnseg_scores* injected; /* may be NULL */
  int strict;
  attnseg_run_options run; /* model_ids ignored */
} attnseg_benchmark_options;

/* Runs every runnable cell, writes the report files at csv_path and
 * returns the ranking (out may be NULL). */
ATTNSEG_API attnseg_status attnseg_benchmark(
    const attnseg_benchmark_options* options, const char* csv_path,
    attnseg_ranking** out);

/* ---- synthetic data ----------------------------------------------------- */

typedef struct attnseg_synth_options {
  size_t height;
  size_t width;
  size_t num_classes;
  size_t blob_count;
  double noise_sigma;
  size_t channels_per_class;
  size_t token_stride;
  const size_t* informative_classes; /* NULL/0 = all classes */
  size_t num_informative;
  uint64_t seed;
  size_t scenes;
  int complementary; /* nonzero: two feature sets "synthA" and "synthB" */
  const char* name;
} attnseg_synth_options;

ATTNSEG_API void attnseg_synth_options_init(attnseg_synth_options* options);
/* Writes tensors and manifest.json into out_dir. */
ATTNSEG_API attnseg_status attnseg_synth_write(
    const attnseg_synth_options* options, const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif /* ATTNSEG_ATTNSEG_H_ */

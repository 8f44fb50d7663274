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

#ifndef ATTNSEG_CORE_GBDT_H_
#define ATTNSEG_CORE_GBDT_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "core/parallel.h"

namespace attnseg {

struct PixelTable;

namespace gbdt {

struct Hyperparams {
  uint32_t rounds = 100;
  double learning_rate = 0.3;
  uint32_t max_depth = 6;
  double lambda = 1.0;
  double gamma = 0.0;
  double min_child_weight = 1.0;
  uint32_t max_bins = 256;
  double hessian_floor = 1e-16;

  // Throws Error(kArgument) naming the first out-of-range field.
  void validate() const;

  bool operator==(const Hyperparams&) const = default;
};

// Per-feature ascending cut points. A value v falls in bin
// upper_bound(boundaries, v), so v == boundary goes to the upper bin.
struct BinningScheme {
  std::vector<std::vector<float>> boundaries;

  size_t num_features() const { return boundaries.size(); }
  size_t num_bins(size_t feature) const {
    return boundaries[feature].size() + 1;
  }
  uint8_t bin(size_t feature, float value) const;

  bool operator==(const BinningScheme&) const = default;
};

// Quantile cut points per feature, computed once from the training matrix.
BinningScheme build_bins(std::span<const float> values, size_t num_rows,
                         size_t num_features, size_t max_bins,
                         WorkerPool* pool = nullptr);
BinningScheme build_bins(const PixelTable& table, size_t max_bins,
                         WorkerPool* pool = nullptr);

// Feature-major bin indices for a row-major value matrix.
struct BinnedMatrix {
  size_t num_rows = 0;
  size_t num_features = 0;
  std::vector<uint8_t> bins;

  uint8_t at(size_t row, size_t feature) const {
    return bins[feature * num_rows + row];
  }
};

BinnedMatrix bin_matrix(const BinningScheme& scheme,
                        std::span<const float> values, size_t num_rows,
                        WorkerPool* pool = nullptr);

struct GradStats {
  double g = 0.0;
  double h = 0.0;
};

// Structure score gain of splitting a node into (left, right).
double split_gain(GradStats left, GradStats right, double lambda, double gamma);

struct SplitCandidate {
  bool valid = false;
  size_t feature = 0;
  size_t bin = 0;  // rows with bin <= this go left
  double gain = 0.0;
  GradStats left;
  GradStats right;
};

// Best (feature, bin) for the node holding `rows`, accumulated through
// per-feature (G, H) histograms. Candidates that leave a side with
// H < min_child_weight are skipped. Ties prefer the lower feature index,
// then the lower bin.
SplitCandidate find_best_split(const BinnedMatrix& binned,
                               const BinningScheme& scheme,
                               std::span<const double> grad,
                               std::span<const double> hess,
                               std::span<const uint32_t> rows,
                               const Hyperparams& hyper,
                               WorkerPool* pool = nullptr);

struct RegressionTree {
  struct Node {
    int32_t feature = -1;  // -1 marks a leaf
    uint32_t bin = 0;
    int32_t left = -1;
    int32_t right = -1;
    double weight = 0.0;  // leaf weight before learning-rate scaling
    float threshold = 0.0f;  // boundaries[feature][bin]; go left if v < it
  };

  std::vector<Node> nodes;

  // Leaf weight reached by a row of raw feature values.
  double leaf_weight(std::span<const float> row) const;
  size_t depth() const;
};

struct BoostedEnsemble {
  size_t num_classes = 0;
  size_t num_features = 0;
  size_t rounds = 0;
  uint64_t seed = 0;
  Hyperparams hyper;
  BinningScheme binning;
  // Round-major: trees[round * num_classes + class].
  std::vector<RegressionTree> trees;

  const RegressionTree& tree(size_t round, size_t cls) const {
    return trees[round * num_classes + cls];
  }

  void margins(std::span<const float> row, std::span<double> out) const;
  void proba(std::span<const float> row, std::span<double> out) const;
  // argmax of the class probabilities, lowest index on ties.
  size_t predict_class(std::span<const float> row) const;

  // Recomputes the cached node thresholds from the binning scheme.
  void refresh_thresholds();
};

// Numerically stable softmax in place.
void softmax(std::span<double> values);

// Gradient and hessian of the multiclass log-loss for one row:
// g_k = p_k - [y == k], h_k = max(2 p_k (1 - p_k), floor).
void softmax_grad_hess(std::span<const double> margins, size_t label,
                       double hessian_floor, std::span<double> grad,
                       std::span<double> hess);

// Mean multiclass log-loss of the given margins (row-major n x classes).
double mean_log_loss(std::span<const double> margins,
                     std::span<const uint8_t> labels, size_t num_classes);

// Softmax-objective boosting with histogram split finding. `round_loss`,
// when given, receives the training log-loss after each round. Output is
// bit-identical for any pool size.
BoostedEnsemble train(const PixelTable& table, size_t num_classes,
                      const Hyperparams& hyper, uint64_t seed,
                      WorkerPool* pool = nullptr,
                      std::vector<double>* round_loss = nullptr);

// Row-major (num_rows x num_classes) probabilities for a row-major matrix.
std::vector<double> predict_proba(const BoostedEnsemble& model,
                                  std::span<const float> values,
                                  size_t row_width, WorkerPool* pool = nullptr);

// Model file: magic "ATSGBDT1", then little-endian counts and flat arrays.
std::vector<uint8_t> serialize(const BoostedEnsemble& model);
BoostedEnsemble deserialize(std::span<const uint8_t> bytes);
void save_model(const BoostedEnsemble& model, const std::filesystem::path& path);
BoostedEnsemble load_model(const std::filesystem::path& path);

}  // namespace gbdt
}  // namespace attnseg

#endif  // ATTNSEG_CORE_GBDT_H_

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

#include "core/gbdt.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>

#include "core/error.h"
#include "core/features.h"

namespace attnseg::gbdt {
namespace {

// Work below this many (row x feature) visits stays on the calling thread.
constexpr size_t kParallelGrain = size_t{1} << 15;
constexpr size_t kRowChunk = 4096;

void run_maybe_parallel(WorkerPool* pool, size_t count, size_t work,
                        const std::function<void(size_t)>& fn) {
  if (pool != nullptr && pool->size() > 1 && work >= kParallelGrain) {
    pool->run(count, fn);
  } else {
    for (size_t i = 0; i < count; ++i) fn(i);
  }
}

float midpoint_above(float lower, float upper) {
  const auto mid = static_cast<float>(
      (static_cast<double>(lower) + static_cast<double>(upper)) / 2.0);
  return mid > lower ? mid : upper;
}

std::vector<float> feature_boundaries(std::vector<float> column,
                                      size_t max_bins) {
  std::sort(column.begin(), column.end());
  std::vector<float> distinct;
  std::unique_copy(column.begin(), column.end(), std::back_inserter(distinct));

  std::vector<float> cuts;
  if (distinct.size() <= max_bins) {
    for (size_t i = 1; i < distinct.size(); ++i) {
      cuts.push_back(midpoint_above(distinct[i - 1], distinct[i]));
    }
    return cuts;
  }
  const size_t n = column.size();
  for (size_t q = 1; q < max_bins; ++q) {
    size_t idx = (q * n + max_bins - 1) / max_bins;
    idx = std::clamp<size_t>(idx, 1, n - 1);
    const float value = column[idx];
    const auto first = std::lower_bound(column.begin(), column.end(), value);
    if (first == column.begin()) continue;
    const float cut = midpoint_above(*(first - 1), value);
    if (cuts.empty() || cut > cuts.back()) cuts.push_back(cut);
  }
  return cuts;
}

class TreeGrower {
 public:
  TreeGrower(const BinnedMatrix& binned, const BinningScheme& scheme,
             std::span<const double> grad, std::span<const double> hess,
             const Hyperparams& hyper, WorkerPool* pool)
      : binned_(binned),
        scheme_(scheme),
        grad_(grad),
        hess_(hess),
        hyper_(hyper),
        pool_(pool),
        rows_(binned.num_rows) {
    for (size_t i = 0; i < rows_.size(); ++i) rows_[i] = static_cast<uint32_t>(i);
  }

  // Grows one tree and adds learning_rate * leaf weight to column `cls` of
  // the row-major margin matrix. Single use.
  RegressionTree grow(std::span<double> margins, size_t num_classes,
                      size_t cls) {
    tree_ = RegressionTree{};
    grow_node(0, rows_.size(), 0);
    for (const auto& leaf : leaves_) {
      const double step = hyper_.learning_rate * leaf.weight;
      for (size_t i = leaf.begin; i < leaf.end; ++i) {
        margins[rows_[i] * num_classes + cls] += step;
      }
    }
    return std::move(tree_);
  }

 private:
  struct LeafRange {
    size_t begin;
    size_t end;
    double weight;
  };

  int32_t grow_node(size_t begin, size_t end, size_t depth) {
    const auto index = static_cast<int32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();

    if (depth < hyper_.max_depth && end - begin >= 2) {
      const std::span<const uint32_t> node_rows(rows_.data() + begin,
                                                end - begin);
      const SplitCandidate split = find_best_split(
          binned_, scheme_, grad_, hess_, node_rows, hyper_, pool_);
      if (split.valid && split.gain > 0.0) {
        const auto mid_it = std::stable_partition(
            rows_.begin() + static_cast<std::ptrdiff_t>(begin),
            rows_.begin() + static_cast<std::ptrdiff_t>(end),
            [&](uint32_t r) { return binned_.at(r, split.feature) <= split.bin; });
        const auto mid = static_cast<size_t>(mid_it - rows_.begin());
        const int32_t left = grow_node(begin, mid, depth + 1);
        const int32_t right = grow_node(mid, end, depth + 1);
        auto& node = tree_.nodes[static_cast<size_t>(index)];
        node.feature = static_cast<int32_t>(split.feature);
        node.bin = static_cast<uint32_t>(split.bin);
        node.left = left;
        node.right = right;
        node.threshold = scheme_.boundaries[split.feature][split.bin];
        return index;
      }
    }

    GradStats total;
    for (size_t i = begin; i < end; ++i) {
      total.g += grad_[rows_[i]];
      total.h += hess_[rows_[i]];
    }
    const double weight = -total.g / (total.h + hyper_.lambda);
    tree_.nodes[static_cast<size_t>(index)].weight = weight;
    leaves_.push_back({begin, end, weight});
    return index;
  }

  const BinnedMatrix& binned_;
  const BinningScheme& scheme_;
  std::span<const double> grad_;
  std::span<const double> hess_;
  const Hyperparams& hyper_;
  WorkerPool* pool_;
  std::vector<uint32_t> rows_;
  std::vector<LeafRange> leaves_;
  RegressionTree tree_;
};

}  // namespace

void Hyperparams::validate() const {
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
    fail(ErrorKind::kArgument, "learning_rate must lie in (0, 1]");
  }
  if (max_depth < 1) fail(ErrorKind::kArgument, "max_depth must be >= 1");
  if (!(lambda >= 0.0)) fail(ErrorKind::kArgument, "lambda must be >= 0");
  if (!(gamma >= 0.0)) fail(ErrorKind::kArgument, "gamma must be >= 0");
  if (!(min_child_weight >= 0.0)) {
    fail(ErrorKind::kArgument, "min_child_weight must be >= 0");
  }
  if (max_bins < 2 || max_bins > 256) {
    fail(ErrorKind::kArgument, "max_bins must lie in [2, 256]");
  }
  if (!(hessian_floor > 0.0)) {
    fail(ErrorKind::kArgument, "hessian_floor must be > 0");
  }
}

uint8_t BinningScheme::bin(size_t feature, float value) const {
  const auto& cuts = boundaries[feature];
  return static_cast<uint8_t>(
      std::upper_bound(cuts.begin(), cuts.end(), value) - cuts.begin());
}

BinningScheme build_bins(std::span<const float> values, size_t num_rows,
                         size_t num_features, size_t max_bins,
                         WorkerPool* pool) {
  if (num_rows == 0) fail(ErrorKind::kArgument, "cannot bin an empty table");
  if (max_bins < 2 || max_bins > 256) {
    fail(ErrorKind::kArgument, "max_bins must lie in [2, 256]");
  }
  if (values.size() != num_rows * num_features) {
    fail(ErrorKind::kShape, "value matrix does not match its dimensions");
  }
  BinningScheme scheme;
  scheme.boundaries.resize(num_features);
  run_maybe_parallel(pool, num_features, num_rows * num_features, [&](size_t f) {
    std::vector<float> column(num_rows);
    for (size_t r = 0; r < num_rows; ++r) column[r] = values[r * num_features + f];
    scheme.boundaries[f] = feature_boundaries(std::move(column), max_bins);
  });
  return scheme;
}

BinningScheme build_bins(const PixelTable& table, size_t max_bins,
                         WorkerPool* pool) {
  return build_bins(table.values, table.num_rows(), table.num_features,
                    max_bins, pool);
}

BinnedMatrix bin_matrix(const BinningScheme& scheme,
                        std::span<const float> values, size_t num_rows,
                        WorkerPool* pool) {
  BinnedMatrix out;
  out.num_rows = num_rows;
  out.num_features = scheme.num_features();
  out.bins.resize(num_rows * out.num_features);
  run_maybe_parallel(pool, out.num_features, out.bins.size(), [&](size_t f) {
    for (size_t r = 0; r < num_rows; ++r) {
      out.bins[f * num_rows + r] =
          scheme.bin(f, values[r * out.num_features + f]);
    }
  });
  return out;
}

double split_gain(GradStats left, GradStats right, double lambda,
                  double gamma) {
  const double g = left.g + right.g;
  const double h = left.h + right.h;
  return 0.5 * (left.g * left.g / (left.h + lambda) +
                right.g * right.g / (right.h + lambda) - g * g / (h + lambda)) -
         gamma;
}

SplitCandidate find_best_split(const BinnedMatrix& binned,
                               const BinningScheme& scheme,
                               std::span<const double> grad,
                               std::span<const double> hess,
                               std::span<const uint32_t> rows,
                               const Hyperparams& hyper, WorkerPool* pool) {
  const size_t num_features = binned.num_features;
  std::vector<SplitCandidate> per_feature(num_features);
  run_maybe_parallel(pool, num_features, rows.size() * num_features,
                     [&](size_t f) {
    const size_t num_bins = scheme.num_bins(f);
    if (num_bins < 2) return;
    std::vector<GradStats> hist(num_bins);
    const uint8_t* column = binned.bins.data() + f * binned.num_rows;
    for (uint32_t r : rows) {
      GradStats& cell = hist[column[r]];
      cell.g += grad[r];
      cell.h += hess[r];
    }
    GradStats total;
    for (const auto& cell : hist) {
      total.g += cell.g;
      total.h += cell.h;
    }
    SplitCandidate best;
    GradStats left;
    for (size_t b = 0; b + 1 < num_bins; ++b) {
      left.g += hist[b].g;
      left.h += hist[b].h;
      const GradStats right{total.g - left.g, total.h - left.h};
      if (left.h < hyper.min_child_weight || right.h < hyper.min_child_weight) {
        continue;
      }
      const double gain = split_gain(left, right, hyper.lambda, hyper.gamma);
      if (!best.valid || gain > best.gain) {
        best = {true, f, b, gain, left, right};
      }
    }
    per_feature[f] = best;
  });

  SplitCandidate best;
  for (const auto& candidate : per_feature) {
    if (candidate.valid && (!best.valid || candidate.gain > best.gain)) {
      best = candidate;
    }
  }
  return best;
}

double RegressionTree::leaf_weight(std::span<const float> row) const {
  size_t node = 0;
  while (nodes[node].feature >= 0) {
    const Node& n = nodes[node];
    node = static_cast<size_t>(row[static_cast<size_t>(n.feature)] < n.threshold
                                   ? n.left
                                   : n.right);
  }
  return nodes[node].weight;
}

size_t RegressionTree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<size_t> level(nodes.size(), 0);
  size_t deepest = 0;
  for (size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (nodes[i].feature >= 0) {
      level[static_cast<size_t>(nodes[i].left)] = level[i] + 1;
      level[static_cast<size_t>(nodes[i].right)] = level[i] + 1;
    }
  }
  return deepest;
}

void BoostedEnsemble::margins(std::span<const float> row,
                              std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  for (size_t r = 0; r < rounds; ++r) {
    for (size_t k = 0; k < num_classes; ++k) {
      out[k] += hyper.learning_rate * tree(r, k).leaf_weight(row);
    }
  }
}

void BoostedEnsemble::proba(std::span<const float> row,
                            std::span<double> out) const {
  margins(row, out);
  softmax(out);
}

size_t BoostedEnsemble::predict_class(std::span<const float> row) const {
  double buffer[256];
  const std::span<double> p(buffer, num_classes);
  proba(row, p);
  size_t best = 0;
  for (size_t k = 1; k < num_classes; ++k) {
    if (p[k] > p[best]) best = k;
  }
  return best;
}

void BoostedEnsemble::refresh_thresholds() {
  for (auto& t : trees) {
    for (auto& node : t.nodes) {
      if (node.feature >= 0) {
        node.threshold =
            binning.boundaries[static_cast<size_t>(node.feature)][node.bin];
      }
    }
  }
}

void softmax(std::span<double> values) {
  if (values.empty()) return;
  const double peak = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (double& v : values) {
    v = std::exp(v - peak);
    sum += v;
  }
  for (double& v : values) v /= sum;
}

void softmax_grad_hess(std::span<const double> margins, size_t label,
                       double hessian_floor, std::span<double> grad,
                       std::span<double> hess) {
  std::copy(margins.begin(), margins.end(), grad.begin());
  softmax(grad.first(margins.size()));
  for (size_t k = 0; k < margins.size(); ++k) {
    const double p = grad[k];
    hess[k] = std::max(2.0 * p * (1.0 - p), hessian_floor);
    grad[k] = p - (k == label ? 1.0 : 0.0);
  }
}

double mean_log_loss(std::span<const double> margins,
                     std::span<const uint8_t> labels, size_t num_classes) {
  if (labels.empty()) return 0.0;
  double total = 0.0;
  for (size_t i = 0; i < labels.size(); ++i) {
    const auto row = margins.subspan(i * num_classes, num_classes);
    const double peak = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double m : row) sum += std::exp(m - peak);
    total += std::log(sum) - (row[labels[i]] - peak);
  }
  return total / static_cast<double>(labels.size());
}

BoostedEnsemble train(const PixelTable& table, size_t num_classes,
                      const Hyperparams& hyper, uint64_t seed,
                      WorkerPool* pool, std::vector<double>* round_loss) {
  hyper.validate();
  if (num_classes < 2 || num_classes > 255) {
    fail(ErrorKind::kArgument, "num_classes must lie in [2, 255]");
  }
  const size_t n = table.num_rows();
  if (n == 0) fail(ErrorKind::kArgument, "training table is empty");
  if (table.num_features == 0) {
    fail(ErrorKind::kArgument, "training table has no features");
  }
  if (n > std::numeric_limits<uint32_t>::max()) {
    fail(ErrorKind::kArgument, "training table has too many rows");
  }
  for (size_t i = 0; i < n; ++i) {
    if (table.labels[i] >= num_classes) {
      fail(ErrorKind::kData, "row " + std::to_string(i) + " has label " +
                                 std::to_string(table.labels[i]) +
                                 " >= num_classes " + std::to_string(num_classes));
    }
  }

  BoostedEnsemble model;
  model.num_classes = num_classes;
  model.num_features = table.num_features;
  model.rounds = hyper.rounds;
  model.seed = seed;
  model.hyper = hyper;
  model.binning = build_bins(table, hyper.max_bins, pool);
  const BinnedMatrix binned = bin_matrix(model.binning, table.values, n, pool);

  std::vector<double> margins(n * num_classes, 0.0);
  std::vector<double> grad(n * num_classes);  // class-major
  std::vector<double> hess(n * num_classes);
  model.trees.reserve(static_cast<size_t>(hyper.rounds) * num_classes);
  if (round_loss != nullptr) round_loss->clear();

  const size_t chunks = (n + kRowChunk - 1) / kRowChunk;
  for (uint32_t round = 0; round < hyper.rounds; ++round) {
    run_maybe_parallel(pool, chunks, n * num_classes, [&](size_t chunk) {
      double g[256];
      double h[256];
      const size_t end = std::min(n, (chunk + 1) * kRowChunk);
      for (size_t i = chunk * kRowChunk; i < end; ++i) {
        softmax_grad_hess({margins.data() + i * num_classes, num_classes},
                          table.labels[i], hyper.hessian_floor,
                          {g, num_classes}, {h, num_classes});
        for (size_t k = 0; k < num_classes; ++k) {
          grad[k * n + i] = g[k];
          hess[k * n + i] = h[k];
        }
      }
    });
    for (size_t k = 0; k < num_classes; ++k) {
      TreeGrower class_grower(binned, model.binning,
                              {grad.data() + k * n, n}, {hess.data() + k * n, n},
                              hyper, pool);
      model.trees.push_back(class_grower.grow(margins, num_classes, k));
    }
    if (round_loss != nullptr) {
      round_loss->push_back(mean_log_loss(margins, table.labels, num_classes));
    }
  }
  return model;
}

std::vector<double> predict_proba(const BoostedEnsemble& model,
                                  std::span<const float> values,
                                  size_t row_width, WorkerPool* pool) {
  if (row_width != model.num_features) {
    fail(ErrorKind::kShape, "rows have " + std::to_string(row_width) +
                                " features, model expects " +
                                std::to_string(model.num_features));
  }
  if (row_width == 0 || values.size() % row_width != 0) {
    fail(ErrorKind::kShape, "value matrix is not a whole number of rows");
  }
  const size_t n = values.size() / row_width;
  std::vector<double> out(n * model.num_classes);
  const size_t chunks = (n + kRowChunk - 1) / kRowChunk;
  auto work = [&](size_t chunk) {
    const size_t end = std::min(n, (chunk + 1) * kRowChunk);
    for (size_t i = chunk * kRowChunk; i < end; ++i) {
      model.proba(values.subspan(i * row_width, row_width),
                  {out.data() + i * model.num_classes, model.num_classes});
    }
  };
  if (pool != nullptr) {
    pool->run(chunks, work);
  } else {
    for (size_t c = 0; c < chunks; ++c) work(c);
  }
  return out;
}

}  // namespace attnseg::gbdt

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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "core/error.h"
#include "core/features.h"
#include "core/gbdt.h"
#include "core/parallel.h"
#include "gtest/gtest.h"
#include "oracles.h"

namespace attnseg::gbdt {
namespace {

PixelTable make_table(size_t num_features, std::vector<float> values,
                      std::vector<uint8_t> labels) {
  PixelTable table;
  table.num_features = num_features;
  table.values = std::move(values);
  table.labels = std::move(labels);
  table.provenance.resize(table.labels.size());
  table.entry_ids = {"t"};
  return table;
}

// Two Gaussian-ish clusters per class in `features` dimensions.
PixelTable blob_table(size_t rows, size_t features, size_t classes,
                      uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> noise(0.0f, 0.6f);
  std::vector<float> values(rows * features);
  std::vector<uint8_t> labels(rows);
  for (size_t r = 0; r < rows; ++r) {
    labels[r] = static_cast<uint8_t>(rng() % classes);
    for (size_t f = 0; f < features; ++f) {
      const float centre = (f % classes) == labels[r] ? 1.0f : 0.0f;
      values[r * features + f] = centre + noise(rng);
    }
  }
  return make_table(features, std::move(values), std::move(labels));
}

TEST(SplitGainTest, Formula) {
  const GradStats left{-1.5, 1.5};
  const GradStats right{1.5, 1.5};
  EXPECT_DOUBLE_EQ(split_gain(left, right, 1.0, 0.0),
                   0.5 * (2.25 / 2.5 + 2.25 / 2.5 - 0.0 / 4.0));
  EXPECT_DOUBLE_EQ(split_gain(left, right, 1.0, 0.2),
                   0.5 * (2.25 / 2.5 + 2.25 / 2.5) - 0.2);
}

TEST(SoftmaxTest, NormalizedAndStable) {
  std::vector<double> v = {1000.0, 1000.0, -1000.0};
  softmax(v);
  EXPECT_DOUBLE_EQ(v[0], 0.5);
  EXPECT_DOUBLE_EQ(v[1], 0.5);
  EXPECT_GE(v[2], 0.0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-20, 20);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> m(2 + rng() % 7);
    for (double& x : m) x = u(rng);
    softmax(m);
    EXPECT_NEAR(std::accumulate(m.begin(), m.end(), 0.0), 1.0, 1e-12);
    for (double p : m) {
      EXPECT_GE(p, 0.0);
      EXPECT_LE(p, 1.0);
    }
  }
}

TEST(SoftmaxTest, GradHessMatchFiniteDifferences) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int t = 0; t < 20; ++t) {
    const size_t k = 2 + rng() % 5;
    std::vector<double> m(k);
    for (double& x : m) x = u(rng);
    const size_t label = rng() % k;
    std::vector<double> g(k), h(k);
    softmax_grad_hess(m, label, 1e-16, g, h);
    for (size_t c = 0; c < k; ++c) {
      const double eps = 1e-4;
      auto at = [&](double delta) {
        std::vector<double> shifted = m;
        shifted[c] += delta;
        return oracle::log_loss(shifted, label);
      };
      const double fd_g = (at(eps) - at(-eps)) / (2 * eps);
      const double fd_h = (at(eps) - 2 * at(0) + at(-eps)) / (eps * eps);
      EXPECT_NEAR(g[c], fd_g, 1e-4 * std::abs(fd_g) + 1e-9);
      EXPECT_NEAR(h[c], 2 * fd_h, 1e-4 * std::abs(2 * fd_h) + 1e-7);
    }
  }
}

TEST(SoftmaxTest, HessianFloor) {
  std::vector<double> m = {60.0, -60.0};
  std::vector<double> g(2), h(2);
  softmax_grad_hess(m, 0, 1e-3, g, h);
  EXPECT_EQ(h[0], 1e-3);
  EXPECT_EQ(h[1], 1e-3);
}

TEST(BinningTest, TwoDistinctValues) {
  const std::vector<float> values = {0, 1, 1, 0, 1};
  const auto scheme = build_bins(values, 5, 1, 256);
  EXPECT_EQ(scheme.boundaries[0], std::vector<float>{0.5f});
  EXPECT_EQ(scheme.num_bins(0), 2u);
  EXPECT_EQ(scheme.bin(0, 0.0f), 0);
  EXPECT_EQ(scheme.bin(0, 1.0f), 1);
  EXPECT_EQ(scheme.bin(0, 0.5f), 1);
}

TEST(BinningTest, ConstantFeatureHasOneBin) {
  const std::vector<float> values = {3, 3, 3};
  const auto scheme = build_bins(values, 3, 1, 16);
  EXPECT_TRUE(scheme.boundaries[0].empty());
  EXPECT_EQ(scheme.num_bins(0), 1u);
}

TEST(BinningTest, QuantilesNearOracle) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> values(1000);
  for (float& v : values) v = u(rng);
  const auto scheme = build_bins(values, 1000, 1, 4);
  ASSERT_EQ(scheme.boundaries[0].size(), 3u);
  std::vector<float> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  for (size_t j = 0; j < 3; ++j) {
    const double q = 0.25 * static_cast<double>(j + 1);
    const float expect = oracle::quantile(values, q);
    const auto pos = std::lower_bound(sorted.begin(), sorted.end(), expect) -
                     sorted.begin();
    // Within one sample position of the exact quantile.
    EXPECT_GE(scheme.boundaries[0][j], sorted[static_cast<size_t>(pos - 1)]);
    EXPECT_LE(scheme.boundaries[0][j], sorted[static_cast<size_t>(pos + 1)]);
  }
}

TEST(BinningTest, NeverExceedsMaxBins) {
  std::mt19937_64 rng(4);
  std::normal_distribution<float> n;
  std::vector<float> values(5000 * 2);
  for (float& v : values) v = n(rng);
  for (size_t bins : {2, 3, 16, 255, 256}) {
    const auto scheme = build_bins(values, 5000, 2, bins);
    for (size_t f = 0; f < 2; ++f) {
      EXPECT_LE(scheme.num_bins(f), bins);
      EXPECT_TRUE(std::is_sorted(scheme.boundaries[f].begin(),
                                 scheme.boundaries[f].end()));
    }
  }
  EXPECT_THROW(build_bins(values, 5000, 2, 257), Error);
}

TEST(SplitFinderTest, MatchesBruteForce) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 40; ++t) {
    const size_t rows = 2 + rng() % 199, features = 1 + rng() % 3;
    std::vector<float> values(rows * features);
    for (float& v : values) v = static_cast<float>(rng() % (1 + rng() % 16));
    std::vector<double> grad(rows), hess(rows);
    std::uniform_real_distribution<double> u(-1, 1);
    for (size_t r = 0; r < rows; ++r) {
      grad[r] = u(rng);
      hess[r] = 0.5 * (u(rng) + 1.0) + 1e-3;
    }
    std::vector<uint32_t> subset;
    for (uint32_t r = 0; r < rows; ++r) {
      if (rng() % 4 != 0) subset.push_back(r);
    }
    Hyperparams hyper;
    hyper.max_bins = 16;
    hyper.lambda = 0.5 + u(rng) * 0.4;
    hyper.min_child_weight = 0.5;
    const auto scheme = build_bins(values, rows, features, 16);
    const auto binned = bin_matrix(scheme, values, rows);
    const auto got = find_best_split(binned, scheme, grad, hess, subset, hyper);
    const auto want = oracle::best_split(values, features, scheme.boundaries,
                                         grad, hess, subset, hyper.lambda,
                                         hyper.gamma, hyper.min_child_weight);
    ASSERT_EQ(got.valid, want.valid);
    if (!want.valid) continue;
    EXPECT_EQ(got.feature, want.feature);
    EXPECT_EQ(got.bin, want.bin);
    EXPECT_NEAR(got.gain, want.gain, 1e-9);
  }
}

TEST(SplitFinderTest, ParallelMatchesSerial) {
  const auto table = blob_table(3000, 6, 3, 6);
  const auto scheme = build_bins(table, 64);
  const auto binned = bin_matrix(scheme, table.values, table.num_rows());
  std::vector<double> grad(3000), hess(3000, 0.3);
  for (size_t r = 0; r < 3000; ++r) grad[r] = table.labels[r] == 1 ? -0.7 : 0.3;
  std::vector<uint32_t> rows(3000);
  std::iota(rows.begin(), rows.end(), 0);
  const auto serial = find_best_split(binned, scheme, grad, hess, rows, {});
  WorkerPool pool(4);
  const auto parallel = find_best_split(binned, scheme, grad, hess, rows, {}, &pool);
  EXPECT_EQ(serial.feature, parallel.feature);
  EXPECT_EQ(serial.bin, parallel.bin);
  EXPECT_EQ(serial.gain, parallel.gain);
}

TEST(TrainTest, HandComputedStump) {
  const auto table = make_table(1, {0, 1, 2, 3, 4, 5}, {0, 0, 0, 1, 1, 1});
  Hyperparams hyper;
  hyper.rounds = 1;
  hyper.max_depth = 1;
  const auto model = train(table, 2, hyper, 0);
  ASSERT_EQ(model.trees.size(), 2u);
  // p = 1/2 everywhere: g = -1/2 or +1/2, h = 2 * 1/4.
  const double g_left = 3 * -0.5, h = 3 * 0.5;
  const auto& t0 = model.tree(0, 0);
  ASSERT_EQ(t0.nodes.size(), 3u);
  EXPECT_EQ(t0.nodes[0].feature, 0);
  EXPECT_EQ(t0.nodes[0].threshold, 2.5f);
  EXPECT_DOUBLE_EQ(t0.nodes[t0.nodes[0].left].weight, -g_left / (h + 1.0));
  EXPECT_DOUBLE_EQ(t0.nodes[t0.nodes[0].right].weight, g_left / (h + 1.0));
  const auto& t1 = model.tree(0, 1);
  EXPECT_DOUBLE_EQ(t1.nodes[t1.nodes[0].left].weight, g_left / (h + 1.0));

  const float row[] = {1.0f};
  std::vector<double> margins(2);
  model.margins(row, margins);
  EXPECT_DOUBLE_EQ(margins[0], 0.3 * 0.6);
  EXPECT_DOUBLE_EQ(margins[1], -0.3 * 0.6);
}

TEST(TrainTest, ConstantLabelSaturates) {
  std::mt19937_64 rng(7);
  std::vector<float> values(300 * 2);
  for (float& v : values) v = static_cast<float>(rng() % 100);
  const auto table = make_table(2, values, std::vector<uint8_t>(300, 1));
  const auto model = train(table, 3, {}, 0);
  const auto proba = predict_proba(model, table.values, 2);
  for (size_t r = 0; r < 300; ++r) EXPECT_GE(proba[r * 3 + 1], 0.99);
}

TEST(TrainTest, XorAtDepthTwo) {
  std::vector<float> values;
  std::vector<uint8_t> labels;
  const size_t counts[4] = {10, 20, 30, 40};
  for (size_t q = 0; q < 4; ++q) {
    for (size_t i = 0; i < counts[q]; ++i) {
      const float a = static_cast<float>(q & 1), b = static_cast<float>(q >> 1);
      values.push_back(a + 0.01f * static_cast<float>(i % 7));
      values.push_back(b + 0.01f * static_cast<float>(i % 5));
      labels.push_back(static_cast<uint8_t>((q & 1) ^ (q >> 1)));
    }
  }
  const auto table = make_table(2, values, labels);
  Hyperparams hyper;
  hyper.rounds = 50;
  hyper.max_depth = 2;
  const auto model = train(table, 2, hyper, 0);
  size_t correct = 0;
  for (size_t r = 0; r < table.num_rows(); ++r) {
    correct += model.predict_class(table.row(r)) == table.labels[r];
  }
  EXPECT_EQ(correct, table.num_rows());
  for (const auto& tree : model.trees) EXPECT_LE(tree.depth(), 2u);
}

TEST(TrainTest, LossNonIncreasing) {
  const auto table = blob_table(2000, 5, 4, 8);
  std::vector<double> loss;
  Hyperparams hyper;
  hyper.rounds = 30;
  train(table, 4, hyper, 0, nullptr, &loss);
  ASSERT_EQ(loss.size(), 30u);
  EXPECT_LT(loss.back(), loss.front());
  for (size_t i = 1; i < loss.size(); ++i) EXPECT_LE(loss[i], loss[i - 1] + 1e-9);
}

TEST(TrainTest, ThreadCountDoesNotChangeModel) {
  const auto table = blob_table(40000, 4, 3, 9);
  Hyperparams hyper;
  hyper.rounds = 5;
  std::vector<double> serial_loss, parallel_loss;
  const auto serial = serialize(train(table, 3, hyper, 0, nullptr, &serial_loss));
  WorkerPool pool(4);
  const auto parallel =
      serialize(train(table, 3, hyper, 0, &pool, &parallel_loss));
  EXPECT_EQ(serial, parallel);
  EXPECT_EQ(serial_loss, parallel_loss);
}

TEST(TrainTest, DepthAndGammaLimits) {
  const auto table = blob_table(1000, 3, 3, 10);
  Hyperparams hyper;
  hyper.rounds = 3;
  hyper.max_depth = 3;
  for (const auto& tree : train(table, 3, hyper, 0).trees) {
    EXPECT_LE(tree.depth(), 3u);
  }
  hyper.gamma = 1e9;
  for (const auto& tree : train(table, 3, hyper, 0).trees) {
    EXPECT_EQ(tree.nodes.size(), 1u);
  }
}

TEST(TrainTest, RejectsBadInputs) {
  const auto table = make_table(1, {0, 1}, {0, 2});
  EXPECT_THROW(train(table, 2, {}, 0), Error);
  EXPECT_THROW(train(table, 1, {}, 0), Error);
  EXPECT_THROW(train(make_table(1, {}, {}), 2, {}, 0), Error);
  Hyperparams bad;
  bad.learning_rate = 0.0;
  EXPECT_THROW(train(make_table(1, {0, 1}, {0, 1}), 2, bad, 0), Error);
}

TEST(PredictTest, ZeroRoundsIsUniform) {
  const auto table = blob_table(50, 2, 3, 11);
  Hyperparams hyper;
  hyper.rounds = 0;
  const auto model = train(table, 3, hyper, 0);
  EXPECT_TRUE(model.trees.empty());
  for (double p : predict_proba(model, table.values, 2)) {
    EXPECT_DOUBLE_EQ(p, 1.0 / 3.0);
  }
  EXPECT_EQ(model.predict_class(table.row(0)), 0u);
}

TEST(PredictTest, BinEquivalentRowsAgree) {
  const auto table = blob_table(2000, 3, 3, 12);
  Hyperparams hyper;
  hyper.rounds = 10;
  hyper.max_bins = 8;
  const auto model = train(table, 3, hyper, 0);
  std::mt19937_64 rng(13);
  for (int t = 0; t < 200; ++t) {
    std::vector<float> a(3), b(3);
    for (size_t f = 0; f < 3; ++f) {
      const auto& cuts = model.binning.boundaries[f];
      ASSERT_FALSE(cuts.empty());
      const size_t bin = rng() % (cuts.size() + 1);
      const float lo = bin == 0 ? cuts.front() - 5.0f : cuts[bin - 1];
      const float hi = bin == cuts.size() ? cuts.back() + 5.0f : cuts[bin];
      std::uniform_real_distribution<float> u(lo, hi);
      a[f] = std::min(u(rng), std::nextafter(hi, lo));
      b[f] = lo;
      ASSERT_EQ(model.binning.bin(f, a[f]), model.binning.bin(f, b[f]));
    }
    std::vector<double> pa(3), pb(3);
    model.proba(a, pa);
    model.proba(b, pb);
    EXPECT_EQ(pa, pb);
  }
}

TEST(PredictTest, WidthMismatchIsShapeError) {
  const auto table = blob_table(50, 2, 2, 14);
  const auto model = train(table, 2, {}, 0);
  try {
    predict_proba(model, table.values, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShape);
  }
}

TEST(ModelIoTest, RoundTripIsLossless) {
  oracle::TempDir dir("model");
  const auto table = blob_table(3000, 4, 3, 15);
  Hyperparams hyper;
  hyper.rounds = 12;
  const auto model = train(table, 3, hyper, 77);
  save_model(model, dir / "a.atsg");
  const auto loaded = load_model(dir / "a.atsg");
  save_model(loaded, dir / "b.atsg");
  EXPECT_EQ(serialize(model), serialize(loaded));
  EXPECT_EQ(loaded.seed, 77u);
  EXPECT_EQ(loaded.hyper, hyper);

  std::mt19937_64 rng(16);
  std::normal_distribution<float> n(0.5f, 1.0f);
  std::vector<float> rows(1000 * 4);
  for (float& v : rows) v = n(rng);
  EXPECT_EQ(predict_proba(model, rows, 4), predict_proba(loaded, rows, 4));
}

TEST(ModelIoTest, RejectsDamagedFiles) {
  const auto table = blob_table(500, 2, 2, 17);
  Hyperparams hyper;
  hyper.rounds = 3;
  const auto bytes = serialize(train(table, 2, hyper, 0));
  auto expect_format = [](std::vector<uint8_t> data) {
    try {
      deserialize(data);
      ADD_FAILURE() << "accepted";
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kFormat);
    }
  };
  for (size_t len : {size_t{0}, size_t{7}, size_t{20}, bytes.size() / 2,
                     bytes.size() - 1}) {
    expect_format({bytes.begin(), bytes.begin() + static_cast<long>(len)});
  }
  auto bad_magic = bytes;
  bad_magic[0] ^= 0xff;
  expect_format(bad_magic);
  auto bad_version = bytes;
  bad_version[8] = 2;
  expect_format(bad_version);
  auto trailing = bytes;
  trailing.push_back(0);
  expect_format(trailing);
  EXPECT_THROW(load_model("/nonexistent/model.atsg"), Error);
}

}  // namespace
}  // namespace attnseg::gbdt

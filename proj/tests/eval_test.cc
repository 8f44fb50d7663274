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

#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "core/error.h"
#include "core/eval.h"
#include "gtest/gtest.h"
#include "oracles.h"

namespace attnseg {
namespace {

LabelMask mask_of(size_t h, size_t w, std::vector<uint8_t> values) {
  LabelMask m = LabelMask::filled(h, w, 0);
  m.data = std::move(values);
  return m;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

TEST(DiceTest, HandCases) {
  const auto truth = mask_of(2, 2, {1, 0, 0, 0});
  const auto pred = mask_of(2, 2, {1, 1, 0, 0});
  const auto r = dice_per_class(std::vector{pred}, std::vector{truth}, 2, 255);
  EXPECT_NEAR(r.per_class_dice[1], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.per_class_dice[0], 0.8, 1e-12);
  EXPECT_NEAR(r.mean_dice, (0.8 + 2.0 / 3.0) / 2, 1e-12);

  const auto same = dice_per_class(std::vector{truth}, std::vector{truth}, 2, 255);
  EXPECT_EQ(same.per_class_dice, (std::vector<double>{1.0, 1.0}));

  const auto disjoint = dice_per_class(std::vector{mask_of(1, 2, {1, 1})},
                                       std::vector{mask_of(1, 2, {0, 0})}, 2, 255);
  EXPECT_EQ(disjoint.per_class_dice, (std::vector<double>{0.0, 0.0}));
}

TEST(DiceTest, AbsentClassIsVacuous) {
  const auto m = mask_of(1, 3, {0, 0, 1});
  const auto r = dice_per_class(std::vector{m}, std::vector{m}, 3, 255);
  EXPECT_EQ(r.per_class_dice[2], 1.0);
  EXPECT_EQ(r.vacuous, (std::vector<bool>{false, false, true}));
}

TEST(DiceTest, IgnoredTruthPixelsAreSkipped) {
  const auto truth = mask_of(1, 4, {255, 1, 0, 255});
  const auto pred = mask_of(1, 4, {1, 1, 0, 0});
  const auto r = dice_per_class(std::vector{pred}, std::vector{truth}, 2, 255);
  EXPECT_EQ(r.per_class_dice, (std::vector<double>{1.0, 1.0}));
  EXPECT_EQ(r.tallies[1].predicted, 1u);
}

TEST(DiceTest, MatchesOracleSymmetricAndOrderFree) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t) {
    const size_t k = 2 + rng() % 4;
    std::vector<LabelMask> preds, truths;
    std::vector<std::vector<uint8_t>> raw_p, raw_t;
    for (size_t i = 0; i < 1 + rng() % 4; ++i) {
      const size_t h = 1 + rng() % 6, w = 1 + rng() % 6;
      LabelMask p = LabelMask::filled(h, w, 0), q = LabelMask::filled(h, w, 0);
      for (auto& v : p.data) v = static_cast<uint8_t>(rng() % k);
      for (auto& v : q.data) v = static_cast<uint8_t>(rng() % k);
      preds.push_back(p);
      truths.push_back(q);
      raw_p.push_back(p.data);
      raw_t.push_back(q.data);
    }
    const auto r = dice_per_class(preds, truths, k, 255);
    const auto expect = oracle::dice(raw_p, raw_t, k, 255);
    for (size_t c = 0; c < k; ++c) EXPECT_NEAR(r.per_class_dice[c], expect[c], 1e-12);
    EXPECT_EQ(dice_per_class(truths, preds, k, 255).per_class_dice, r.per_class_dice);
    std::reverse(preds.begin(), preds.end());
    std::reverse(truths.begin(), truths.end());
    EXPECT_EQ(dice_per_class(preds, truths, k, 255).per_class_dice, r.per_class_dice);
  }
}

TEST(DiceTest, AccumulatorMergeAndErrors) {
  DiceAccumulator a(2, 255), b(2, 255), all(2, 255);
  const auto m1 = mask_of(1, 2, {0, 1});
  const auto m2 = mask_of(1, 2, {1, 1});
  a.add(m1, m2);
  b.add(m2, m2);
  all.add(m1, m2);
  all.add(m2, m2);
  a.merge(b);
  EXPECT_EQ(a.tallies(), all.tallies());
  try {
    a.add(mask_of(1, 1, {0}), m1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShape);
  }
  try {
    a.add(mask_of(1, 2, {0, 5}), m1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kData);
  }
}

TEST(RankTest, SingleDatasetTie) {
  const auto table = rank_models({{"d", {{"a", 0.5}, {"b", 0.5}}}});
  ASSERT_EQ(table.rows.size(), 2u);
  for (const auto& row : table.rows) {
    EXPECT_EQ(row.ranks[0], 1.5);
    EXPECT_EQ(row.mean_rank, 1.5);
    EXPECT_TRUE(row.tied);
  }
}

TEST(RankTest, OneModelRanksFirst) {
  const auto table = rank_models({{"d", {{"only", 0.1}}}});
  EXPECT_EQ(table.rows[0].mean_rank, 1.0);
  EXPECT_FALSE(table.rows[0].tied);
}

TEST(RankTest, MatchesOracleOnRandomMatrices) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 100; ++t) {
    ScoreMatrix scores;
    const size_t models = 1 + rng() % 8, datasets = 1 + rng() % 5;
    for (size_t d = 0; d < datasets; ++d) {
      for (size_t m = 0; m < models; ++m) {
        scores["d" + std::to_string(d)]["m" + std::to_string(m)] =
            static_cast<double>(rng() % 5) / 4.0;
      }
    }
    const auto table = rank_models(scores);
    const auto expect = oracle::mean_ranks(scores);
    ASSERT_EQ(table.rows.size(), models);
    for (size_t i = 0; i < table.rows.size(); ++i) {
      EXPECT_DOUBLE_EQ(table.rows[i].mean_rank, expect.at(table.rows[i].model));
      if (i > 0) {
        EXPECT_LE(table.rows[i - 1].mean_rank, table.rows[i].mean_rank);
      }
    }
  }
}

TEST(RankTest, RejectsIncompleteMatrix) {
  EXPECT_THROW(rank_models({}), Error);
  EXPECT_THROW(rank_models({{"d1", {{"a", 0.1}, {"b", 0.2}}}, {"d2", {{"a", 0.3}}}}),
               Error);
  EXPECT_THROW(rank_models({{"d", {{"a", std::nan("")}}}}), Error);
}

DiceReport two_class_report() {
  DiceAccumulator acc(2, 255);
  acc.add(mask_of(2, 2, {1, 1, 0, 0}), mask_of(2, 2, {1, 0, 0, 0}));
  return acc.report("GlaS", {"conch", "pathdino"}, {"background", "gland"});
}

TEST(ReportTest, CsvRows) {
  EXPECT_EQ(report_csv({}), "dataset,model_set,class,dice,vacuous\n");
  const std::vector<DiceReport> reports = {two_class_report()};
  EXPECT_EQ(report_csv(reports),
            "dataset,model_set,class,dice,vacuous\n"
            "GlaS,conch+pathdino,background,0.8000,0\n"
            "GlaS,conch+pathdino,gland,0.6667,0\n"
            "GlaS,conch+pathdino,mean,0.7333,0\n");
}

TEST(ReportTest, RankCsvAndText) {
  const auto table =
      rank_models({{"A", {{"x", 0.9}, {"y", 0.5}}}, {"B", {{"x", 0.1}, {"y", 0.7}}}});
  EXPECT_EQ(rank_csv(table),
            "model,A,rank:A,B,rank:B,mean_score,mean_rank,tied\n"
            "x,0.9000,1.00,0.1000,2.00,0.5000,1.50,1\n"
            "y,0.5000,2.00,0.7000,1.00,0.6000,1.50,1\n");
  const std::string text = report_text({}, &table);
  EXPECT_NE(text.find("Mean rank"), std::string::npos);
  EXPECT_NE(text.find("1.50"), std::string::npos);
}

TEST(ReportTest, EmitIsByteDeterministic) {
  oracle::TempDir dir("report");
  const std::vector<DiceReport> reports = {two_class_report()};
  const auto table = rank_models({{"GlaS", {{"conch+pathdino", 0.7333}}}});
  emit_report(reports, &table, dir / "one.csv");
  emit_report(reports, &table, dir / "two.csv");
  for (const char* ext : {".csv", ".txt", ".ranks.csv"}) {
    const std::string a = slurp(dir / (std::string("one") + ext));
    EXPECT_FALSE(a.empty()) << ext;
    EXPECT_EQ(a, slurp(dir / (std::string("two") + ext))) << ext;
  }
  EXPECT_NE(slurp(dir / "one.txt").find("0.7333"), std::string::npos);
}

TEST(ReportTest, ModelSetLabel) {
  const std::vector<std::string> ids = {"conch", "pathdino", "cellvit"};
  EXPECT_EQ(model_set_label(ids), "conch+pathdino+cellvit");
}

}  // namespace
}  // namespace attnseg

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

#ifndef ATTNSEG_CORE_EVAL_H_
#define ATTNSEG_CORE_EVAL_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "core/tensor.h"

namespace attnseg {

struct ClassTally {
  uint64_t intersection = 0;
  uint64_t predicted = 0;
  uint64_t truth = 0;

  bool operator==(const ClassTally&) const = default;
};

struct DiceReport {
  std::string dataset;
  std::vector<std::string> model_set;
  std::vector<std::string> class_names;
  std::vector<double> per_class_dice;
  std::vector<bool> vacuous;
  std::vector<ClassTally> tallies;
  double mean_dice = 0.0;
};

// Micro-aggregated Dice: intersection and size tallies are summed over all
// pairs before the ratio is taken. Pixels whose truth is the ignore value do
// not count. A class absent from both prediction and truth scores 1.0 and
// is marked vacuous.
class DiceAccumulator {
 public:
  DiceAccumulator(size_t num_classes, uint8_t ignore_value);

  void add(const LabelMask& pred, const LabelMask& truth);
  void merge(const DiceAccumulator& other);

  const std::vector<ClassTally>& tallies() const { return tallies_; }

  DiceReport report(std::string dataset, std::vector<std::string> model_set,
                    std::vector<std::string> class_names = {}) const;

 private:
  size_t num_classes_;
  uint8_t ignore_value_;
  std::vector<ClassTally> tallies_;
};

DiceReport dice_per_class(std::span<const LabelMask> preds,
                          std::span<const LabelMask> truths,
                          size_t num_classes, uint8_t ignore_value);

// dataset -> model -> score (higher is better).
using ScoreMatrix = std::map<std::string, std::map<std::string, double>>;

struct RankRow {
  std::string model;
  std::vector<double> scores;  // aligned with RankTable::datasets
  std::vector<double> ranks;
  double mean_rank = 0.0;
  double mean_score = 0.0;
  bool tied = false;  // shares its mean rank with another model
};

struct RankTable {
  std::vector<std::string> datasets;
  std::vector<RankRow> rows;  // ascending mean rank, then model id
};

// Ranks models per dataset (1 = best, tied scores share the average of
// their positions) and orders them by mean rank across datasets.
RankTable rank_models(const ScoreMatrix& scores);

std::string model_set_label(std::span<const std::string> model_set);

std::string report_csv(std::span<const DiceReport> reports);
std::string rank_csv(const RankTable& ranks);
std::string report_text(std::span<const DiceReport> reports,
                        const RankTable* ranks);

// Writes `csv_path`, a text table next to it with extension ".txt", and,
// when ranks are given, "<stem>.ranks.csv".
void emit_report(std::span<const DiceReport> reports, const RankTable* ranks,
                 const std::filesystem::path& csv_path);

}  // namespace attnseg

#endif  // ATTNSEG_CORE_EVAL_H_

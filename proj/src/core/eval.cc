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

#include "core/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "core/error.h"

namespace attnseg {
namespace {

std::string fixed(double value, int decimals) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.*f", decimals, value);
  return buffer;
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string class_label(const DiceReport& report, size_t cls) {
  return cls < report.class_names.size() ? report.class_names[cls]
                                         : std::to_string(cls);
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

template <typename T>
void append_unique(std::vector<T>& items, const T& item) {
  if (std::find(items.begin(), items.end(), item) == items.end()) {
    items.push_back(item);
  }
}

}  // namespace

DiceAccumulator::DiceAccumulator(size_t num_classes, uint8_t ignore_value)
    : num_classes_(num_classes),
      ignore_value_(ignore_value),
      tallies_(num_classes) {
  if (num_classes == 0) fail(ErrorKind::kArgument, "num_classes must be >= 1");
}

void DiceAccumulator::add(const LabelMask& pred, const LabelMask& truth) {
  if (pred.height != truth.height || pred.width != truth.width ||
      pred.data.size() != truth.data.size()) {
    fail(ErrorKind::kShape, "prediction is " + std::to_string(pred.height) +
                                "x" + std::to_string(pred.width) +
                                ", truth is " + std::to_string(truth.height) +
                                "x" + std::to_string(truth.width));
  }
  std::vector<ClassTally> local(num_classes_);
  for (size_t i = 0; i < truth.data.size(); ++i) {
    const uint8_t t = truth.data[i];
    if (t == ignore_value_) continue;
    const uint8_t p = pred.data[i];
    if (t >= num_classes_ || p >= num_classes_) {
      fail(ErrorKind::kData, "label " + std::to_string(std::max(t, p)) +
                                 " outside [0, " + std::to_string(num_classes_) +
                                 ")");
    }
    ++local[t].truth;
    ++local[p].predicted;
    if (p == t) ++local[t].intersection;
  }
  for (size_t c = 0; c < num_classes_; ++c) {
    tallies_[c].intersection += local[c].intersection;
    tallies_[c].predicted += local[c].predicted;
    tallies_[c].truth += local[c].truth;
  }
}

void DiceAccumulator::merge(const DiceAccumulator& other) {
  if (other.num_classes_ != num_classes_) {
    fail(ErrorKind::kArgument, "cannot merge tallies of different class counts");
  }
  for (size_t c = 0; c < num_classes_; ++c) {
    tallies_[c].intersection += other.tallies_[c].intersection;
    tallies_[c].predicted += other.tallies_[c].predicted;
    tallies_[c].truth += other.tallies_[c].truth;
  }
}

DiceReport DiceAccumulator::report(std::string dataset,
                                   std::vector<std::string> model_set,
                                   std::vector<std::string> class_names) const {
  DiceReport out;
  out.dataset = std::move(dataset);
  out.model_set = std::move(model_set);
  out.class_names = std::move(class_names);
  out.tallies = tallies_;
  double sum = 0.0;
  for (const auto& t : tallies_) {
    const uint64_t denominator = t.predicted + t.truth;
    const bool vacuous = denominator == 0;
    const double dice =
        vacuous ? 1.0
                : 2.0 * static_cast<double>(t.intersection) /
                      static_cast<double>(denominator);
    out.per_class_dice.push_back(dice);
    out.vacuous.push_back(vacuous);
    sum += dice;
  }
  out.mean_dice = sum / static_cast<double>(tallies_.size());
  return out;
}

DiceReport dice_per_class(std::span<const LabelMask> preds,
                          std::span<const LabelMask> truths,
                          size_t num_classes, uint8_t ignore_value) {
  if (preds.size() != truths.size()) {
    fail(ErrorKind::kShape, "prediction and truth lists differ in length");
  }
  DiceAccumulator acc(num_classes, ignore_value);
  for (size_t i = 0; i < preds.size(); ++i) acc.add(preds[i], truths[i]);
  return acc.report("", {});
}

RankTable rank_models(const ScoreMatrix& scores) {
  RankTable table;
  std::set<std::string> models;
  for (const auto& [dataset, row] : scores) {
    table.datasets.push_back(dataset);
    for (const auto& [model, score] : row) models.insert(model);
  }
  if (table.datasets.empty() || models.empty()) {
    fail(ErrorKind::kArgument, "no scores to rank");
  }

  for (const auto& model : models) {
    RankRow row;
    row.model = model;
    for (const auto& dataset : table.datasets) {
      const auto& cells = scores.at(dataset);
      const auto it = cells.find(model);
      if (it == cells.end()) {
        fail(ErrorKind::kArgument, "missing score for model '" + model +
                                       "' on dataset '" + dataset + "'");
      }
      if (!std::isfinite(it->second)) {
        fail(ErrorKind::kArgument, "non-finite score for model '" + model +
                                       "' on dataset '" + dataset + "'");
      }
      row.scores.push_back(it->second);
    }
    table.rows.push_back(std::move(row));
  }

  const size_t n = table.rows.size();
  const size_t d = table.datasets.size();
  for (auto& row : table.rows) row.ranks.assign(d, 0.0);
  std::vector<size_t> order(n);
  for (size_t j = 0; j < d; ++j) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return table.rows[a].scores[j] > table.rows[b].scores[j];
    });
    for (size_t start = 0; start < n;) {
      size_t stop = start + 1;
      while (stop < n && table.rows[order[stop]].scores[j] ==
                             table.rows[order[start]].scores[j]) {
        ++stop;
      }
      // Positions start+1 .. stop share their average.
      const double shared = (static_cast<double>(start + 1 + stop)) / 2.0;
      for (size_t k = start; k < stop; ++k) table.rows[order[k]].ranks[j] = shared;
      start = stop;
    }
  }
  for (auto& row : table.rows) {
    row.mean_rank = std::accumulate(row.ranks.begin(), row.ranks.end(), 0.0) /
                    static_cast<double>(d);
    row.mean_score = std::accumulate(row.scores.begin(), row.scores.end(), 0.0) /
                     static_cast<double>(d);
  }
  std::stable_sort(table.rows.begin(), table.rows.end(),
                   [](const RankRow& a, const RankRow& b) {
                     if (a.mean_rank != b.mean_rank) return a.mean_rank < b.mean_rank;
                     return a.model < b.model;
                   });
  for (size_t i = 0; i + 1 < n; ++i) {
    if (table.rows[i].mean_rank == table.rows[i + 1].mean_rank) {
      table.rows[i].tied = true;
      table.rows[i + 1].tied = true;
    }
  }
  return table;
}

std::string model_set_label(std::span<const std::string> model_set) {
  std::string out;
  for (size_t i = 0; i < model_set.size(); ++i) {
    if (i > 0) out += '+';
    out += model_set[i];
  }
  return out;
}

std::string report_csv(std::span<const DiceReport> reports) {
  std::ostringstream out;
  out << "dataset,model_set,class,dice,vacuous\n";
  for (const auto& report : reports) {
    const std::string prefix = csv_field(report.dataset) + "," +
                               csv_field(model_set_label(report.model_set)) + ",";
    bool any_vacuous = false;
    for (size_t c = 0; c < report.per_class_dice.size(); ++c) {
      any_vacuous = any_vacuous || report.vacuous[c];
      out << prefix << csv_field(class_label(report, c)) << ","
          << fixed(report.per_class_dice[c], 4) << ","
          << (report.vacuous[c] ? 1 : 0) << "\n";
    }
    out << prefix << "mean," << fixed(report.mean_dice, 4) << ","
        << (any_vacuous ? 1 : 0) << "\n";
  }
  return out.str();
}

std::string rank_csv(const RankTable& ranks) {
  std::ostringstream out;
  out << "model";
  for (const auto& dataset : ranks.datasets) {
    out << "," << csv_field(dataset) << "," << csv_field("rank:" + dataset);
  }
  out << ",mean_score,mean_rank,tied\n";
  for (const auto& row : ranks.rows) {
    out << csv_field(row.model);
    for (size_t j = 0; j < ranks.datasets.size(); ++j) {
      out << "," << fixed(row.scores[j], 4) << "," << fixed(row.ranks[j], 2);
    }
    out << "," << fixed(row.mean_score, 4) << "," << fixed(row.mean_rank, 2)
        << "," << (row.tied ? 1 : 0) << "\n";
  }
  return out.str();
}

std::string report_text(std::span<const DiceReport> reports,
                        const RankTable* ranks) {
  // Rows are model sets, columns are datasets. Datasets with more than two
  // classes are expanded into one column per class followed by the mean.
  std::vector<std::string> models;
  std::vector<std::string> datasets;
  if (ranks != nullptr) {
    for (const auto& row : ranks->rows) models.push_back(row.model);
    datasets = ranks->datasets;
  }
  for (const auto& report : reports) {
    append_unique(models, model_set_label(report.model_set));
    append_unique(datasets, report.dataset);
  }

  auto find_report = [&](const std::string& dataset,
                         const std::string& model) -> const DiceReport* {
    for (const auto& report : reports) {
      if (report.dataset == dataset && model_set_label(report.model_set) == model) {
        return &report;
      }
    }
    return nullptr;
  };

  struct Column {
    std::string title;
    std::string dataset;
    long cls;  // -1 = dataset score
  };
  std::vector<Column> columns;
  for (const auto& dataset : datasets) {
    const DiceReport* expanded = nullptr;
    for (const auto& report : reports) {
      if (report.dataset == dataset && report.per_class_dice.size() > 2) {
        expanded = &report;
        break;
      }
    }
    if (expanded == nullptr) {
      columns.push_back({dataset, dataset, -1});
      continue;
    }
    for (size_t c = 0; c < expanded->per_class_dice.size(); ++c) {
      columns.push_back({dataset + ":" + class_label(*expanded, c), dataset,
                         static_cast<long>(c)});
    }
    columns.push_back({dataset + ":Mean", dataset, -1});
  }

  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header{"Model"};
  for (const auto& column : columns) header.push_back(column.title);
  if (ranks != nullptr) header.insert(header.end(), {"Mean rank", "Tied"});
  grid.push_back(header);

  for (const auto& model : models) {
    std::vector<std::string> line{model};
    const RankRow* rank_row = nullptr;
    if (ranks != nullptr) {
      for (const auto& row : ranks->rows) {
        if (row.model == model) rank_row = &row;
      }
    }
    for (const auto& column : columns) {
      const DiceReport* report = find_report(column.dataset, model);
      if (report != nullptr) {
        const double value =
            column.cls < 0 ? report->mean_dice
                           : (static_cast<size_t>(column.cls) <
                                      report->per_class_dice.size()
                                  ? report->per_class_dice[static_cast<size_t>(column.cls)]
                                  : 0.0);
        line.push_back(fixed(value, 4));
        continue;
      }
      std::string cell = "-";
      if (rank_row != nullptr && column.cls < 0) {
        for (size_t j = 0; j < ranks->datasets.size(); ++j) {
          if (ranks->datasets[j] == column.dataset) {
            cell = fixed(rank_row->scores[j], 4);
          }
        }
      }
      line.push_back(cell);
    }
    if (ranks != nullptr) {
      line.push_back(rank_row != nullptr ? fixed(rank_row->mean_rank, 2) : "-");
      line.push_back(rank_row != nullptr && rank_row->tied ? "yes" : "");
    }
    grid.push_back(std::move(line));
  }

  std::vector<size_t> widths(header.size(), 0);
  for (const auto& line : grid) {
    for (size_t i = 0; i < line.size(); ++i) {
      widths[i] = std::max(widths[i], line[i].size());
    }
  }
  std::ostringstream out;
  for (size_t r = 0; r < grid.size(); ++r) {
    std::string text;
    for (size_t i = 0; i < grid[r].size(); ++i) {
      if (i > 0) text += "  ";
      const std::string& cell = grid[r][i];
      if (i == 0) {
        text += cell + std::string(widths[i] - cell.size(), ' ');
      } else {
        text += std::string(widths[i] - cell.size(), ' ') + cell;
      }
    }
    while (!text.empty() && text.back() == ' ') text.pop_back();
    out << text << "\n";
    if (r == 0) {
      size_t total = 0;
      for (size_t w : widths) total += w;
      out << std::string(total + 2 * (widths.size() - 1), '-') << "\n";
    }
  }
  return out.str();
}

void emit_report(std::span<const DiceReport> reports, const RankTable* ranks,
                 const std::filesystem::path& csv_path) {
  write_file(csv_path, report_csv(reports));
  std::filesystem::path text_path = csv_path;
  text_path.replace_extension(".txt");
  write_file(text_path, report_text(reports, ranks));
  if (ranks != nullptr) {
    std::filesystem::path rank_path = csv_path;
    rank_path.replace_extension(".ranks.csv");
    write_file(rank_path, rank_csv(*ranks));
  }
}

}  // namespace attnseg

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

// Command-line front end over the attnseg C API.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "attnseg/attnseg.h"
#include "json.hpp"

namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 4;

// Reads a flat JSON object. Keys use snake_case or the flag spelling.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool,
                        std::string) const override {
    nlohmann::ordered_json out = nlohmann::ordered_json::object();
    for (const CLI::Option* opt : app->get_options()) {
      if (!opt->get_configurable() || opt->get_lnames().empty()) continue;
      const std::string& name = opt->get_lnames().front();
      if (name == "help" || name == "config") continue;
      auto results = opt->reduced_results();
      if (results.empty() && default_also) {
        const std::string def = opt->get_default_str();
        if (!def.empty()) results.push_back(def);
      }
      if (results.empty()) continue;
      if (results.size() == 1) {
        out[name] = results.front();
      } else {
        out[name] = results;
      }
    }
    return out.dump(2) + "\n";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(input);
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConversionError("config", e.what());
    }
    if (!doc.is_object()) {
      throw CLI::ConversionError("config", "top level must be an object");
    }
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : doc.items()) {
      CLI::ConfigItem item;
      item.name = key;
      for (char& c : item.name) {
        if (c == '_') c = '-';
      }
      if (value.is_array()) {
        for (const auto& element : value) item.inputs.push_back(scalar(element));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
    return items;
  }

 private:
  static std::string scalar(const nlohmann::json& value) {
    if (value.is_string()) return value.get<std::string>();
    if (value.is_boolean()) return value.get<bool>() ? "true" : "false";
    if (value.is_number() || value.is_null()) return value.dump();
    throw CLI::ConversionError("config", "nested values are not supported");
  }
};

struct Settings {
  std::string manifest;
  std::vector<std::string> models;
  std::vector<std::string> manifests;
  std::vector<std::string> model_sets;
  uint64_t seed = 0;
  std::string out = "out";
  bool strict = false;
  bool deterministic = true;
  uint32_t threads = 1;
  double test_fraction = 0.2;
  std::string model_file;
  std::string split = "test";
  std::string scores;
  bool write_predictions = false;

  attnseg_hyperparams hyper{};
  attnseg_sampling sampling{};

  // synth
  size_t scenes = 16;
  size_t height = 64;
  size_t width = 64;
  size_t classes = 4;
  size_t blobs = 12;
  double noise = 0.1;
  size_t channels_per_class = 2;
  size_t token_stride = 1;
  std::vector<size_t> informative;
  bool complementary = false;
  std::string name = "synth";
};

// Carries a status out of a command so main can map it to an exit code.
struct Failure {
  attnseg_status status;
  std::string message;
};

void check(attnseg_status status) {
  if (status != ATTNSEG_OK) throw Failure{status, attnseg_last_error()};
}

void config_error(const std::string& message) {
  throw Failure{ATTNSEG_ERR_CONFIG, message};
}

int exit_code(attnseg_status status) {
  switch (status) {
    case ATTNSEG_OK:
      return kExitOk;
    case ATTNSEG_ERR_ARGUMENT:
    case ATTNSEG_ERR_CONFIG:
    case ATTNSEG_ERR_MANIFEST:
    case ATTNSEG_ERR_SPLIT:
      return kExitConfig;
    case ATTNSEG_ERR_FORMAT:
    case ATTNSEG_ERR_UNSUPPORTED_DTYPE:
    case ATTNSEG_ERR_DATA:
    case ATTNSEG_ERR_SHAPE:
    case ATTNSEG_ERR_IO:
      return kExitData;
    case ATTNSEG_ERR_INTERNAL:
      break;
  }
  return kExitInternal;
}

class Log {
 public:
  explicit Log(bool deterministic) : deterministic_(deterministic) {}

  void operator()(const std::string& line) const {
    if (!deterministic_) {
      const std::time_t now =
          std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
      std::tm utc{};
      gmtime_r(&now, &utc);
      char stamp[32];
      std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &utc);
      std::cerr << stamp << ' ';
    }
    std::cerr << line << '\n';
  }

 private:
  bool deterministic_;
};

// Owns a C handle and frees it on scope exit.
template <typename T, void (*Free)(T*)>
class Handle {
 public:
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() {
    if (ptr_ != nullptr) Free(ptr_);
  }
  T** out() { return &ptr_; }
  T* get() const { return ptr_; }

 private:
  T* ptr_ = nullptr;
};

using Manifest = Handle<attnseg_manifest, attnseg_manifest_free>;
using Model = Handle<attnseg_model, attnseg_model_free>;
using Report = Handle<attnseg_report, attnseg_report_free>;
using Scores = Handle<attnseg_scores, attnseg_scores_free>;
using Ranking = Handle<attnseg_ranking, attnseg_ranking_free>;

std::vector<const char*> c_strings(const std::vector<std::string>& values) {
  std::vector<const char*> out;
  out.reserve(values.size());
  for (const auto& v : values) out.push_back(v.c_str());
  return out;
}

attnseg_split parse_split(const std::string& name) {
  if (name == "train") return ATTNSEG_SPLIT_TRAIN;
  if (name == "test") return ATTNSEG_SPLIT_TEST;
  if (name == "unassigned") return ATTNSEG_SPLIT_UNASSIGNED;
  if (name == "all") return ATTNSEG_SPLIT_ALL;
  config_error("unknown split '" + name + "'");
  return ATTNSEG_SPLIT_ALL;
}

attnseg_run_options run_options(const Settings& s,
                                const std::vector<const char*>& ids) {
  attnseg_run_options options;
  attnseg_run_options_init(&options);
  options.model_ids = ids.data();
  options.num_model_ids = ids.size();
  options.hyper = s.hyper;
  options.sampling = s.sampling;
  options.seed = s.seed;
  options.test_fraction = s.test_fraction;
  options.threads = s.threads;
  return options;
}

void require_manifest(const Settings& s) {
  if (s.manifest.empty()) config_error("--manifest is required");
}

void require_models(const Settings& s) {
  if (s.models.empty()) config_error("--models must name at least one model");
}

std::string model_path(const Settings& s) {
  return s.model_file.empty() ? (fs::path(s.out) / "model.atsg").string()
                              : s.model_file;
}

void load_manifest(const Settings& s, Manifest& manifest) {
  require_manifest(s);
  check(attnseg_manifest_load(s.manifest.c_str(), s.strict ? 1 : 0,
                              manifest.out()));
}

void cmd_synth(const Settings& s, const Log& log) {
  attnseg_synth_options options;
  attnseg_synth_options_init(&options);
  options.height = s.height;
  options.width = s.width;
  options.num_classes = s.classes;
  options.blob_count = s.blobs;
  options.noise_sigma = s.noise;
  options.channels_per_class = s.channels_per_class;
  options.token_stride = s.token_stride;
  options.informative_classes = s.informative.data();
  options.num_informative = s.informative.size();
  options.seed = s.seed;
  options.scenes = s.scenes;
  options.complementary = s.complementary ? 1 : 0;
  options.name = s.name.c_str();
  check(attnseg_synth_write(&options, s.out.c_str()));
  log("synth: wrote " + std::to_string(s.scenes) + " scenes to " + s.out);
}

void cmd_train(const Settings& s, const Log& log) {
  require_models(s);
  Manifest manifest;
  load_manifest(s, manifest);
  const auto ids = c_strings(s.models);
  const attnseg_run_options options = run_options(s, ids);
  Model model;
  check(attnseg_train(manifest.get(), &options, model.out()));
  fs::create_directories(s.out);
  check(attnseg_model_save(model.get(), model_path(s).c_str()));
  const fs::path loss_path = fs::path(s.out) / "train_log.csv";
  check(attnseg_model_write_loss_log(model.get(), loss_path.c_str()));
  std::ostringstream line;
  line << "train: " << attnseg_model_train_rows(model.get()) << " rows, "
       << attnseg_model_num_features(model.get()) << " features, "
       << attnseg_model_rounds(model.get()) << " rounds";
  const size_t rounds = attnseg_model_loss_count(model.get());
  if (rounds > 0) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), ", final loss %.6f",
                  attnseg_model_loss(model.get(), rounds - 1));
    line << buffer;
  }
  log(line.str());
}

void cmd_predict(const Settings& s, const Log& log) {
  require_models(s);
  Manifest manifest;
  load_manifest(s, manifest);
  Model model;
  check(attnseg_model_load(model_path(s).c_str(), model.out()));
  const auto ids = c_strings(s.models);
  const attnseg_run_options options = run_options(s, ids);
  const fs::path dir = fs::path(s.out) / "predictions";
  size_t count = 0;
  check(attnseg_predict(manifest.get(), model.get(), &options,
                        parse_split(s.split), dir.c_str(), &count));
  log("predict: wrote " + std::to_string(count) + " masks to " + dir.string());
}

void cmd_evaluate(const Settings& s, const Log& log) {
  require_models(s);
  Manifest manifest;
  load_manifest(s, manifest);
  Model model;
  check(attnseg_model_load(model_path(s).c_str(), model.out()));
  const auto ids = c_strings(s.models);
  const attnseg_run_options options = run_options(s, ids);
  const attnseg_split split = parse_split(s.split);
  if (split == ATTNSEG_SPLIT_ALL) config_error("evaluate needs a single split");
  fs::create_directories(s.out);
  const fs::path pred_dir = fs::path(s.out) / "predictions";
  Report report;
  check(attnseg_evaluate(manifest.get(), model.get(), &options, split,
                         s.write_predictions ? pred_dir.c_str() : nullptr,
                         report.out()));
  const fs::path csv = fs::path(s.out) / "report.csv";
  const attnseg_report* reports[] = {report.get()};
  check(attnseg_report_write(reports, 1, nullptr, csv.c_str()));
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.4f",
                attnseg_report_mean_dice(report.get()));
  log(std::string("evaluate: mean dice ") + buffer);
}

void print_ranking(const attnseg_ranking* ranking) {
  const size_t n = attnseg_ranking_num_models(ranking);
  for (size_t i = 0; i < n; ++i) {
    char buffer[256];
    std::snprintf(buffer, sizeof(buffer), "%-24s %.2f%s",
                  attnseg_ranking_model(ranking, i),
                  attnseg_ranking_mean_rank(ranking, i),
                  attnseg_ranking_tied(ranking, i) ? "  tied" : "");
    std::cout << buffer << '\n';
  }
}

void cmd_benchmark(const Settings& s, const Log& log) {
  std::vector<std::string> manifests = s.manifests;
  if (!s.manifest.empty()) manifests.insert(manifests.begin(), s.manifest);
  if (manifests.empty()) config_error("benchmark needs --manifest");
  std::vector<std::string> sets = s.model_sets;
  if (sets.empty()) sets = s.models;
  if (sets.empty()) config_error("benchmark needs --model-set or --models");

  Scores injected;
  if (!s.scores.empty()) {
    check(attnseg_scores_read_csv(s.scores.c_str(), injected.out()));
  }
  const auto manifest_ptrs = c_strings(manifests);
  const auto set_ptrs = c_strings(sets);
  attnseg_benchmark_options options{};
  options.manifests = manifest_ptrs.data();
  options.num_manifests = manifest_ptrs.size();
  options.model_sets = set_ptrs.data();
  options.num_model_sets = set_ptrs.size();
  options.injected = injected.get();
  options.strict = s.strict ? 1 : 0;
  options.run = run_options(s, {});
  options.run.model_ids = nullptr;
  options.run.num_model_ids = 0;

  fs::create_directories(s.out);
  const fs::path csv = fs::path(s.out) / "benchmark.csv";
  Ranking ranking;
  check(attnseg_benchmark(&options, csv.c_str(), ranking.out()));
  print_ranking(ranking.get());
  log("benchmark: wrote " + csv.string());
}

void cmd_rank(const Settings& s, const Log& log) {
  if (s.scores.empty()) config_error("rank needs --scores");
  Scores scores;
  check(attnseg_scores_read_csv(s.scores.c_str(), scores.out()));
  Ranking ranking;
  check(attnseg_rank(scores.get(), ranking.out()));
  fs::create_directories(s.out);
  const fs::path csv = fs::path(s.out) / "rank.csv";
  check(attnseg_report_write(nullptr, 0, ranking.get(), csv.c_str()));
  print_ranking(ranking.get());
  log("rank: wrote " + csv.string());
}

std::vector<std::string> split_commas(const std::vector<std::string>& in) {
  std::vector<std::string> out;
  for (const auto& item : in) {
    std::stringstream stream(item);
    std::string part;
    while (std::getline(stream, part, ',')) {
      if (part.empty()) config_error("empty model id in --models");
      out.push_back(part);
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  Settings s;
  {
    attnseg_run_options defaults;
    attnseg_run_options_init(&defaults);
    s.hyper = defaults.hyper;
    s.sampling = defaults.sampling;
    s.test_fraction = defaults.test_fraction;
  }

  CLI::App app{"attnseg: segmentation benchmarking on frozen encoder features"};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file with flag values; flags override it");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_version_flag("--version", std::string(attnseg_version()));
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  std::vector<std::string> raw_models;
  app.add_option("--manifest", s.manifest, "Dataset manifest (JSON)");
  app.add_option("--models", raw_models,
                 "Model ids, comma separated; several ids concatenate features")
      ->delimiter(',');
  app.add_option("--seed", s.seed, "Seed for splits and synthetic data");
  app.add_option("--out", s.out, "Output directory");
  app.add_flag("--strict", s.strict, "Check every referenced file up front");
  app.add_flag("--deterministic,!--no-deterministic", s.deterministic,
               "Omit timestamps from log lines");
  app.add_option("--threads", s.threads, "Worker threads (0 = all cores)");
  app.add_option("--test-fraction", s.test_fraction,
                 "Held-out fraction for random splits");

  app.add_option("--rounds", s.hyper.rounds, "Boosting rounds");
  app.add_option("--learning-rate", s.hyper.learning_rate, "Shrinkage");
  app.add_option("--max-depth", s.hyper.max_depth, "Maximum tree depth");
  app.add_option("--lambda", s.hyper.lambda, "L2 regularization on leaves");
  app.add_option("--gamma", s.hyper.gamma, "Minimum split gain");
  app.add_option("--min-child-weight", s.hyper.min_child_weight,
                 "Minimum hessian per child");
  app.add_option("--max-bins", s.hyper.max_bins, "Histogram bins per feature");
  app.add_option("--hessian-floor", s.hyper.hessian_floor,
                 "Lower bound on per-row hessians");
  app.add_option("--max-pixels-per-class", s.sampling.max_pixels_per_class_per_image,
                 "Training pixels kept per class per image");
  app.add_option("--sampling-seed", s.sampling.seed, "Pixel sampling seed");

  app.add_option("--model-file", s.model_file,
                 "Model path (default <out>/model.atsg)");
  app.add_option("--split", s.split, "train, test, unassigned or all")
      ->check(CLI::IsMember({"train", "test", "unassigned", "all"}));
  app.add_flag("--write-predictions", s.write_predictions,
               "evaluate: also write predicted masks");
  app.add_option("--scores", s.scores,
                 "CSV with dataset,model,score cells to inject");
  app.add_option("--model-set", s.model_sets,
                 "benchmark: model set, ids joined by '+' (repeatable)");
  app.add_option("--extra-manifest", s.manifests,
                 "benchmark: additional manifests (repeatable)");

  app.add_option("--scenes", s.scenes, "synth: number of scenes");
  app.add_option("--height", s.height, "synth: mask height");
  app.add_option("--width", s.width, "synth: mask width");
  app.add_option("--classes", s.classes, "synth: number of classes");
  app.add_option("--blobs", s.blobs, "synth: blobs per scene");
  app.add_option("--noise", s.noise, "synth: feature noise sigma");
  app.add_option("--channels-per-class", s.channels_per_class,
                 "synth: signal channels per informative class");
  app.add_option("--token-stride", s.token_stride,
                 "synth: feature cell size in pixels");
  app.add_option("--informative", s.informative,
                 "synth: classes carrying signal (default all)")
      ->delimiter(',');
  app.add_flag("--complementary", s.complementary,
               "synth: write two partial feature sets synthA and synthB");
  app.add_option("--name", s.name, "synth: dataset name");

  using Command = void (*)(const Settings&, const Log&);
  const std::vector<std::pair<std::string, Command>> commands = {
      {"synth", cmd_synth},         {"train", cmd_train},
      {"predict", cmd_predict},     {"evaluate", cmd_evaluate},
      {"benchmark", cmd_benchmark}, {"rank", cmd_rank}};
  const std::vector<std::string> help = {
      "Write a synthetic dataset", "Train a classifier on a manifest",
      "Write predicted masks", "Score predictions with Dice",
      "Train and evaluate datasets x model sets and rank them",
      "Rank models from a score CSV"};
  for (size_t i = 0; i < commands.size(); ++i) {
    app.add_subcommand(commands[i].first, help[i])->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  const Log log(s.deterministic);
  try {
    s.models = split_commas(raw_models);
    for (const auto& [name, fn] : commands) {
      if (app.got_subcommand(name)) fn(s, log);
    }
  } catch (const Failure& f) {
    std::cerr << "error: " << attnseg_status_string(f.status) << ": "
              << f.message << '\n';
    return exit_code(f.status);
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: I/O error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitOk;
}

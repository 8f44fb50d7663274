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

// Model file layout, all integers and reals little-endian:
//
//   char[8]  magic "ATSGBDT1"
//   u32      format version (1)
//   u32      num_classes, num_features, rounds
//   u64      training seed
//   u32 rounds, f64 learning_rate, u32 max_depth, f64 lambda, f64 gamma,
//   f64 min_child_weight, u32 max_bins, f64 hessian_floor
//   per feature:  u32 count, f32 boundaries[count]
//   per tree (rounds x num_classes, round-major):
//     u32 node_count, then per node:
//     i32 feature (-1 = leaf), u32 bin, i32 left, i32 right, f64 weight

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "core/error.h"
#include "core/gbdt.h"

namespace attnseg::gbdt {
namespace {

constexpr char kMagic[8] = {'A', 'T', 'S', 'G', 'B', 'D', 'T', '1'};
constexpr uint32_t kFormatVersion = 1;
constexpr size_t kNodeBytes = 4 + 4 + 4 + 4 + 8;

class Writer {
 public:
  void bytes(const void* data, size_t size) {
    const auto* p = static_cast<const uint8_t*>(data);
    out_.insert(out_.end(), p, p + size);
  }
  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  void u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  void i32(int32_t v) { u32(static_cast<uint32_t>(v)); }
  void f32(float v) { u32(std::bit_cast<uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<uint64_t>(v)); }

  std::vector<uint8_t> take() { return std::move(out_); }

 private:
  std::vector<uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const uint8_t> data) : data_(data) {}

  size_t remaining() const { return data_.size() - pos_; }

  const uint8_t* take(size_t size) {
    if (remaining() < size) fail(ErrorKind::kFormat, "model file is truncated");
    const uint8_t* p = data_.data() + pos_;
    pos_ += size;
    return p;
  }
  uint32_t u32() {
    const uint8_t* p = take(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
    return v;
  }
  uint64_t u64() {
    const uint8_t* p = take(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
    return v;
  }
  int32_t i32() { return static_cast<int32_t>(u32()); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }

  // Element count prefix, bounded by what the remaining bytes can hold.
  size_t count(size_t element_bytes) {
    const size_t n = u32();
    if (n > remaining() / element_bytes) {
      fail(ErrorKind::kFormat, "model file is truncated");
    }
    return n;
  }

 private:
  std::span<const uint8_t> data_;
  size_t pos_ = 0;
};

void check_tree(const RegressionTree& tree, const BoostedEnsemble& model) {
  if (tree.nodes.empty()) fail(ErrorKind::kFormat, "tree without nodes");
  const auto size = static_cast<int32_t>(tree.nodes.size());
  for (int32_t i = 0; i < size; ++i) {
    const auto& node = tree.nodes[static_cast<size_t>(i)];
    if (node.feature < 0) {
      if (node.feature != -1 || !std::isfinite(node.weight)) {
        fail(ErrorKind::kFormat, "malformed leaf node");
      }
      continue;
    }
    const auto f = static_cast<size_t>(node.feature);
    if (f >= model.num_features || node.bin + 1 >= model.binning.num_bins(f) ||
        node.left <= i || node.right <= i || node.left >= size ||
        node.right >= size || node.left == node.right) {
      fail(ErrorKind::kFormat, "malformed split node");
    }
  }
  if (tree.depth() > model.hyper.max_depth) {
    fail(ErrorKind::kFormat, "tree deeper than max_depth");
  }
}

}  // namespace

std::vector<uint8_t> serialize(const BoostedEnsemble& model) {
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.u32(kFormatVersion);
  w.u32(static_cast<uint32_t>(model.num_classes));
  w.u32(static_cast<uint32_t>(model.num_features));
  w.u32(static_cast<uint32_t>(model.rounds));
  w.u64(model.seed);
  const Hyperparams& h = model.hyper;
  w.u32(h.rounds);
  w.f64(h.learning_rate);
  w.u32(h.max_depth);
  w.f64(h.lambda);
  w.f64(h.gamma);
  w.f64(h.min_child_weight);
  w.u32(h.max_bins);
  w.f64(h.hessian_floor);
  for (const auto& cuts : model.binning.boundaries) {
    w.u32(static_cast<uint32_t>(cuts.size()));
    for (float c : cuts) w.f32(c);
  }
  for (const auto& tree : model.trees) {
    w.u32(static_cast<uint32_t>(tree.nodes.size()));
    for (const auto& node : tree.nodes) {
      w.i32(node.feature);
      w.u32(node.bin);
      w.i32(node.left);
      w.i32(node.right);
      w.f64(node.weight);
    }
  }
  return w.take();
}

BoostedEnsemble deserialize(std::span<const uint8_t> bytes) {
  Reader r(bytes);
  if (std::memcmp(r.take(sizeof(kMagic)), kMagic, sizeof(kMagic)) != 0) {
    fail(ErrorKind::kFormat, "not a model file (bad magic)");
  }
  const uint32_t version = r.u32();
  if (version != kFormatVersion) {
    fail(ErrorKind::kFormat, "model format version " + std::to_string(version) +
                                 " does not match supported version " +
                                 std::to_string(kFormatVersion));
  }
  BoostedEnsemble model;
  model.num_classes = r.u32();
  model.num_features = r.u32();
  model.rounds = r.u32();
  model.seed = r.u64();
  Hyperparams& h = model.hyper;
  h.rounds = r.u32();
  h.learning_rate = r.f64();
  h.max_depth = r.u32();
  h.lambda = r.f64();
  h.gamma = r.f64();
  h.min_child_weight = r.f64();
  h.max_bins = r.u32();
  h.hessian_floor = r.f64();
  try {
    h.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kFormat, std::string("model hyperparameters: ") + e.what());
  }
  if (model.num_classes < 2 || model.num_classes > 255 ||
      model.num_features == 0 || model.rounds != h.rounds) {
    fail(ErrorKind::kFormat, "inconsistent model header");
  }
  if (model.num_features > r.remaining() / 4) {
    fail(ErrorKind::kFormat, "model file is truncated");
  }
  model.binning.boundaries.resize(model.num_features);
  for (auto& cuts : model.binning.boundaries) {
    const size_t n = r.count(4);
    if (n + 1 > h.max_bins) fail(ErrorKind::kFormat, "too many bin boundaries");
    cuts.resize(n);
    for (auto& c : cuts) c = r.f32();
    for (size_t i = 0; i < n; ++i) {
      if (!std::isfinite(cuts[i]) || (i > 0 && !(cuts[i] > cuts[i - 1]))) {
        fail(ErrorKind::kFormat, "bin boundaries must be finite and increasing");
      }
    }
  }
  const size_t tree_count = model.rounds * model.num_classes;
  if (tree_count > r.remaining() / 4) {
    fail(ErrorKind::kFormat, "model file is truncated");
  }
  model.trees.resize(tree_count);
  for (auto& tree : model.trees) {
    tree.nodes.resize(r.count(kNodeBytes));
    for (auto& node : tree.nodes) {
      node.feature = r.i32();
      node.bin = r.u32();
      node.left = r.i32();
      node.right = r.i32();
      node.weight = r.f64();
    }
    check_tree(tree, model);
  }
  if (r.remaining() != 0) {
    fail(ErrorKind::kFormat, "trailing bytes after model data");
  }
  model.refresh_thresholds();
  return model;
}

void save_model(const BoostedEnsemble& model,
                const std::filesystem::path& path) {
  const auto bytes = serialize(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

BoostedEnsemble load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open model " + path.string());
  const std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  try {
    return deserialize(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace attnseg::gbdt

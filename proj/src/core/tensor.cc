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

#include "core/tensor.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <string_view>

#include "core/error.h"

namespace attnseg::tensorio {
namespace {

constexpr uint8_t kMagic[6] = {0x93, 'N', 'U', 'M', 'P', 'Y'};
constexpr size_t kAlignment = 64;
constexpr std::string_view kSupported =
    "supported dtypes: '<f4' (feature map), '|u1' (label mask)";

// Minimal reader for the Python dict literal carried in the header.
class HeaderDictParser {
 public:
  explicit HeaderDictParser(std::string_view text) : text_(text) {}

  void parse(std::string& descr, bool& fortran_order,
             std::vector<size_t>& shape) {
    bool have_descr = false, have_order = false, have_shape = false;
    skip_space();
    expect('{');
    for (;;) {
      skip_space();
      if (peek() == '}') {
        ++pos_;
        break;
      }
      const std::string key = parse_string();
      skip_space();
      expect(':');
      skip_space();
      if (key == "descr") {
        descr = parse_string();
        have_descr = true;
      } else if (key == "fortran_order") {
        fortran_order = parse_bool();
        have_order = true;
      } else if (key == "shape") {
        shape = parse_shape();
        have_shape = true;
      } else {
        fail(ErrorKind::kFormat, "unknown header key '" + key + "'");
      }
      skip_space();
      if (peek() == ',') {
        ++pos_;
      } else if (peek() != '}') {
        fail(ErrorKind::kFormat, "expected ',' or '}' in header dict");
      }
    }
    skip_space();
    if (pos_ != text_.size()) {
      fail(ErrorKind::kFormat, "trailing characters after header dict");
    }
    if (!have_descr || !have_order || !have_shape) {
      fail(ErrorKind::kFormat,
           "header dict must define 'descr', 'fortran_order' and 'shape'");
    }
  }

 private:
  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void skip_space() {
    while (pos_ < text_.size() &&
           (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n')) {
      ++pos_;
    }
  }

  void expect(char c) {
    if (peek() != c) {
      fail(ErrorKind::kFormat, std::string("expected '") + c + "' in header");
    }
    ++pos_;
  }

  std::string parse_string() {
    const char quote = peek();
    if (quote != '\'' && quote != '"') {
      fail(ErrorKind::kFormat, "expected quoted string in header");
    }
    ++pos_;
    const size_t end = text_.find(quote, pos_);
    if (end == std::string_view::npos) {
      fail(ErrorKind::kFormat, "unterminated string in header");
    }
    std::string out(text_.substr(pos_, end - pos_));
    pos_ = end + 1;
    return out;
  }

  bool parse_bool() {
    if (text_.substr(pos_, 4) == "True") {
      pos_ += 4;
      return true;
    }
    if (text_.substr(pos_, 5) == "False") {
      pos_ += 5;
      return false;
    }
    fail(ErrorKind::kFormat, "expected True or False for 'fortran_order'");
  }

  std::vector<size_t> parse_shape() {
    expect('(');
    std::vector<size_t> dims;
    for (;;) {
      skip_space();
      if (peek() == ')') {
        ++pos_;
        return dims;
      }
      if (peek() < '0' || peek() > '9') {
        fail(ErrorKind::kFormat, "malformed shape tuple");
      }
      size_t value = 0;
      while (peek() >= '0' && peek() <= '9') {
        const size_t digit = static_cast<size_t>(peek() - '0');
        if (value > (std::numeric_limits<size_t>::max() - digit) / 10) {
          fail(ErrorKind::kFormat, "shape dimension overflows");
        }
        value = value * 10 + digit;
        ++pos_;
      }
      dims.push_back(value);
      skip_space();
      if (peek() == ',') {
        ++pos_;
      } else if (peek() != ')') {
        fail(ErrorKind::kFormat, "malformed shape tuple");
      }
    }
  }

  std::string_view text_;
  size_t pos_ = 0;
};

uint32_t load_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

void store_u32(uint32_t v, uint8_t* p) {
  p[0] = static_cast<uint8_t>(v);
  p[1] = static_cast<uint8_t>(v >> 8);
  p[2] = static_cast<uint8_t>(v >> 16);
  p[3] = static_cast<uint8_t>(v >> 24);
}

// Size of the preamble (magic, version, header length) for a version, or 0
// when the first bytes do not identify a supported version.
size_t preamble_size(std::span<const uint8_t> data) {
  if (data.size() < 8) {
    fail(ErrorKind::kFormat, "file too short for the array preamble");
  }
  if (std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0) {
    fail(ErrorKind::kFormat, "missing array magic bytes");
  }
  const uint8_t major = data[6];
  const uint8_t minor = data[7];
  if (minor != 0 || major < 1 || major > 3) {
    fail(ErrorKind::kFormat, "unsupported format version " +
                                 std::to_string(major) + "." +
                                 std::to_string(minor));
  }
  return major == 1 ? 10 : 12;
}

size_t header_length(std::span<const uint8_t> data, size_t preamble) {
  if (data.size() < preamble) {
    fail(ErrorKind::kFormat, "file too short for the array preamble");
  }
  if (preamble == 10) {
    return static_cast<size_t>(data[8]) | (static_cast<size_t>(data[9]) << 8);
  }
  return load_u32(data.data() + 8);
}

std::string header_text(Dtype dtype, std::span<const size_t> shape) {
  std::ostringstream out;
  out << "{'descr': '" << (dtype == Dtype::kFloat32 ? "<f4" : "|u1")
      << "', 'fortran_order': False, 'shape': (";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out << ", ";
    out << shape[i];
  }
  if (shape.size() == 1) out << ",";
  out << "), }";
  std::string text = out.str();
  const size_t unpadded = 10 + text.size() + 1;
  const size_t padding = (kAlignment - unpadded % kAlignment) % kAlignment;
  text.append(padding, ' ');
  text.push_back('\n');
  return text;
}

std::vector<uint8_t> encode_with(Dtype dtype, std::span<const size_t> shape,
                                 size_t payload_bytes) {
  const std::string text = header_text(dtype, shape);
  std::vector<uint8_t> out;
  out.reserve(10 + text.size() + payload_bytes);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(1);
  out.push_back(0);
  out.push_back(static_cast<uint8_t>(text.size() & 0xFF));
  out.push_back(static_cast<uint8_t>(text.size() >> 8));
  out.insert(out.end(), text.begin(), text.end());
  return out;
}

Tensor decode_payload(const Header& header, const uint8_t* payload) {
  if (header.dtype == Dtype::kUInt8) {
    LabelMask mask;
    mask.height = header.shape[0];
    mask.width = header.shape[1];
    mask.data.assign(payload, payload + header.payload_bytes);
    return mask;
  }
  FeatureMap map;
  map.height = header.shape[0];
  map.width = header.shape[1];
  map.channels = header.shape.size() == 3 ? header.shape[2] : 1;
  map.data.resize(header.payload_bytes / 4);
  for (size_t i = 0; i < map.data.size(); ++i) {
    const float value = std::bit_cast<float>(load_u32(payload + 4 * i));
    if (!std::isfinite(value)) {
      fail(ErrorKind::kData, "non-finite value at flat index " +
                                 std::to_string(i) + " of feature map");
    }
    map.data[i] = value;
  }
  return map;
}

void validate(const FeatureMap& map) {
  if (map.height == 0 || map.width == 0 || map.channels == 0 ||
      map.data.size() != map.height * map.width * map.channels) {
    fail(ErrorKind::kArgument, "feature map shape does not match its data");
  }
  for (float v : map.data) {
    if (!std::isfinite(v)) {
      fail(ErrorKind::kArgument, "feature map holds a non-finite value");
    }
  }
}

void validate(const LabelMask& mask) {
  if (mask.height == 0 || mask.width == 0 ||
      mask.data.size() != mask.height * mask.width) {
    fail(ErrorKind::kArgument, "label mask shape does not match its data");
  }
}

void write_bytes(const std::vector<uint8_t>& bytes,
                 const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

struct HeaderBlock {
  Header header;
  uint64_t file_size = 0;
};

HeaderBlock load_header_block(std::ifstream& in,
                              const std::filesystem::path& path) {
  std::error_code ec;
  const uint64_t file_size = std::filesystem::file_size(path, ec);
  if (ec) fail(ErrorKind::kIo, "cannot stat " + path.string());

  std::vector<uint8_t> head(std::min<uint64_t>(file_size, 12));
  in.read(reinterpret_cast<char*>(head.data()),
          static_cast<std::streamsize>(head.size()));
  const size_t preamble = preamble_size(head);
  const size_t length = header_length(head, preamble);
  if (preamble + length > file_size) {
    fail(ErrorKind::kFormat, "header extends past end of file");
  }
  const size_t have = head.size();
  head.resize(preamble + length);
  if (head.size() > have) {
    in.read(reinterpret_cast<char*>(head.data() + have),
            static_cast<std::streamsize>(head.size() - have));
    if (!in) fail(ErrorKind::kIo, "read failed for " + path.string());
  } else {
    in.seekg(static_cast<std::streamoff>(head.size()));
  }
  return {parse_header(head), file_size};
}

}  // namespace

Header parse_header(std::span<const uint8_t> data) {
  const size_t preamble = preamble_size(data);
  const size_t length = header_length(data, preamble);
  if (data.size() < preamble + length) {
    fail(ErrorKind::kFormat, "header extends past end of data");
  }
  const std::string_view text(
      reinterpret_cast<const char*>(data.data() + preamble), length);
  if (text.empty() || text.back() != '\n') {
    fail(ErrorKind::kFormat, "header is not newline-terminated");
  }

  std::string descr;
  bool fortran_order = false;
  Header header;
  HeaderDictParser(text).parse(descr, fortran_order, header.shape);

  size_t item_size = 0;
  if (descr == "<f4") {
    header.dtype = Dtype::kFloat32;
    item_size = 4;
  } else if (descr == "|u1") {
    header.dtype = Dtype::kUInt8;
    item_size = 1;
  } else {
    fail(ErrorKind::kUnsupportedDtype,
         "unsupported dtype '" + descr + "'; " + std::string(kSupported));
  }
  if (fortran_order) {
    fail(ErrorKind::kFormat, "column-major (fortran_order) arrays are rejected");
  }
  const size_t ndim = header.shape.size();
  if (header.dtype == Dtype::kUInt8 && ndim != 2) {
    fail(ErrorKind::kFormat, "label masks must be 2-D, got " +
                                 std::to_string(ndim) + "-D");
  }
  if (header.dtype == Dtype::kFloat32 && ndim != 2 && ndim != 3) {
    fail(ErrorKind::kFormat, "feature maps must be 2-D or 3-D, got " +
                                 std::to_string(ndim) + "-D");
  }
  size_t count = item_size;
  for (size_t dim : header.shape) {
    if (dim == 0) fail(ErrorKind::kFormat, "zero-sized dimension in shape");
    if (count > std::numeric_limits<size_t>::max() / dim) {
      fail(ErrorKind::kFormat, "declared shape overflows");
    }
    count *= dim;
  }
  header.payload_offset = preamble + length;
  header.payload_bytes = count;
  return header;
}

std::vector<uint8_t> encode(const FeatureMap& map) {
  validate(map);
  const size_t shape[3] = {map.height, map.width, map.channels};
  auto out = encode_with(Dtype::kFloat32, shape, map.data.size() * 4);
  const size_t offset = out.size();
  out.resize(offset + map.data.size() * 4);
  for (size_t i = 0; i < map.data.size(); ++i) {
    store_u32(std::bit_cast<uint32_t>(map.data[i]), out.data() + offset + 4 * i);
  }
  return out;
}

std::vector<uint8_t> encode(const LabelMask& mask) {
  validate(mask);
  const size_t shape[2] = {mask.height, mask.width};
  auto out = encode_with(Dtype::kUInt8, shape, mask.data.size());
  out.insert(out.end(), mask.data.begin(), mask.data.end());
  return out;
}

Tensor decode(std::span<const uint8_t> data) {
  const Header header = parse_header(data);
  if (data.size() - header.payload_offset != header.payload_bytes) {
    fail(ErrorKind::kFormat,
         "payload is " + std::to_string(data.size() - header.payload_offset) +
             " bytes, header declares " + std::to_string(header.payload_bytes));
  }
  return decode_payload(header, data.data() + header.payload_offset);
}

Header read_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  return load_header_block(in, path).header;
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  const auto [header, file_size] = load_header_block(in, path);
  // The payload buffer is sized from the header only after the header has
  // been checked against the real file size.
  if (file_size - header.payload_offset != header.payload_bytes) {
    fail(ErrorKind::kFormat,
         path.string() + ": payload is " +
             std::to_string(file_size - header.payload_offset) +
             " bytes, header declares " + std::to_string(header.payload_bytes));
  }
  std::vector<uint8_t> payload(header.payload_bytes);
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(payload.size()));
  if (!in) fail(ErrorKind::kIo, "read failed for " + path.string());
  try {
    return decode_payload(header, payload.data());
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

FeatureMap read_feature_map(const std::filesystem::path& path) {
  Tensor tensor = read_tensor(path);
  if (auto* map = std::get_if<FeatureMap>(&tensor)) return std::move(*map);
  fail(ErrorKind::kUnsupportedDtype,
       path.string() + ": expected a '<f4' feature map, found '|u1'");
}

LabelMask read_label_mask(const std::filesystem::path& path,
                          uint8_t ignore_value) {
  Tensor tensor = read_tensor(path);
  if (auto* mask = std::get_if<LabelMask>(&tensor)) {
    mask->ignore_value = ignore_value;
    return std::move(*mask);
  }
  fail(ErrorKind::kUnsupportedDtype,
       path.string() + ": expected a '|u1' label mask, found '<f4'");
}

void write_tensor(const FeatureMap& map, const std::filesystem::path& path) {
  write_bytes(encode(map), path);
}

void write_tensor(const LabelMask& mask, const std::filesystem::path& path) {
  write_bytes(encode(mask), path);
}

}  // namespace attnseg::tensorio

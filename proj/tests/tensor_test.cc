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

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "core/error.h"
#include "core/tensor.h"
#include "gtest/gtest.h"
#include "oracles.h"

namespace attnseg {
namespace {

using tensorio::decode;
using tensorio::encode;

// Builds a version 1.0 file around an arbitrary header dict.
std::vector<uint8_t> npy_bytes(const std::string& dict, size_t payload_bytes,
                               uint8_t major = 1) {
  std::string header = dict;
  const size_t unpadded = 10 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header.push_back('\n');
  std::vector<uint8_t> out = {0x93, 'N', 'U', 'M', 'P', 'Y', major, 0};
  const size_t len = header.size();
  if (major == 1) {
    out.push_back(static_cast<uint8_t>(len & 0xff));
    out.push_back(static_cast<uint8_t>(len >> 8));
  } else {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(len >> (8 * i)));
  }
  out.insert(out.end(), header.begin(), header.end());
  out.resize(out.size() + payload_bytes, 0);
  return out;
}

std::string dict(const std::string& descr, const std::string& shape,
                 const std::string& fortran = "False") {
  return "{'descr': '" + descr + "', 'fortran_order': " + fortran +
         ", 'shape': " + shape + ", }";
}

ErrorKind decode_error(const std::vector<uint8_t>& bytes) {
  try {
    decode(bytes);
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "decode accepted the input";
  return ErrorKind::kInternal;
}

TEST(TensorIoTest, ZeroFeatureMapLayout) {
  const auto bytes = encode(FeatureMap::zeros(2, 2, 1));
  ASSERT_EQ(bytes.size(), 128u + 16u);
  const std::string prefix(bytes.begin(), bytes.begin() + 128);
  EXPECT_EQ(prefix.substr(0, 6), "\x93NUMPY");
  EXPECT_EQ(bytes[6], 1);
  EXPECT_EQ(bytes[7], 0);
  EXPECT_EQ(bytes[8] | (bytes[9] << 8), 118);
  EXPECT_EQ(prefix.substr(10, 62),
            "{'descr': '<f4', 'fortran_order': False, 'shape': (2, 2, 1), }");
  EXPECT_EQ(prefix.back(), '\n');
  for (size_t i = 128; i < bytes.size(); ++i) EXPECT_EQ(bytes[i], 0);
}

TEST(TensorIoTest, SingleMaskByte) {
  const auto bytes = encode(LabelMask::filled(1, 1, 255));
  ASSERT_EQ(bytes.size(), 129u);
  EXPECT_EQ(bytes.back(), 0xFF);
  const std::string prefix(bytes.begin() + 10, bytes.begin() + 128);
  EXPECT_NE(prefix.find("'descr': '|u1'"), std::string::npos);
  EXPECT_NE(prefix.find("'shape': (1, 1)"), std::string::npos);
}

TEST(TensorIoTest, FloatPayloadIsLittleEndian) {
  FeatureMap map = FeatureMap::zeros(1, 1, 1);
  map.data[0] = 1.0f;  // 0x3f800000
  const auto bytes = encode(map);
  ASSERT_EQ(bytes.size(), 132u);
  EXPECT_EQ(bytes[128], 0x00);
  EXPECT_EQ(bytes[129], 0x00);
  EXPECT_EQ(bytes[130], 0x80);
  EXPECT_EQ(bytes[131], 0x3f);
}

TEST(TensorIoTest, RoundTripThroughFiles) {
  oracle::TempDir dir("tensor");
  std::mt19937_64 rng(11);
  std::normal_distribution<float> normal;
  FeatureMap map = FeatureMap::zeros(5, 7, 3);
  for (float& v : map.data) v = normal(rng);
  LabelMask mask = LabelMask::filled(4, 9, 0);
  for (auto& v : mask.data) v = static_cast<uint8_t>(rng() % 256);

  tensorio::write_tensor(map, dir / "map.npy");
  tensorio::write_tensor(mask, dir / "mask.npy");
  EXPECT_EQ(tensorio::read_feature_map(dir / "map.npy"), map);
  EXPECT_EQ(tensorio::read_label_mask(dir / "mask.npy"), mask);

  tensorio::write_tensor(map, dir / "again.npy");
  std::ifstream a(dir / "map.npy", std::ios::binary);
  std::ifstream b(dir / "again.npy", std::ios::binary);
  const std::string first((std::istreambuf_iterator<char>(a)), {});
  const std::string second((std::istreambuf_iterator<char>(b)), {});
  EXPECT_EQ(first, second);
}

TEST(TensorIoTest, TwoDimensionalFloatIsSingleChannel) {
  std::vector<uint8_t> bytes = npy_bytes(dict("<f4", "(2, 3)"), 24);
  const float value = 2.5f;
  std::memcpy(bytes.data() + bytes.size() - 4, &value, 4);
  const auto map = std::get<FeatureMap>(decode(bytes));
  EXPECT_EQ(map.height, 2u);
  EXPECT_EQ(map.width, 3u);
  EXPECT_EQ(map.channels, 1u);
  EXPECT_EQ(map.at(1, 2, 0), 2.5f);
}

TEST(TensorIoTest, AcceptsLaterFormatVersions) {
  const auto bytes = npy_bytes(dict("|u1", "(1, 2)"), 2, 2);
  const auto mask = std::get<LabelMask>(decode(bytes));
  EXPECT_EQ(mask.width, 2u);
}

TEST(TensorIoTest, DtypeAndRankMatrix) {
  const std::vector<std::string> dtypes = {"<f4", "|u1", "<f8", ">f4",
                                           "<i4", "|b1", "<u2"};
  const std::vector<std::string> shapes = {"(3,)", "(2, 3)", "(2, 3, 4)",
                                           "(1, 2, 3, 4)"};
  for (const auto& dtype : dtypes) {
    for (size_t s = 0; s < shapes.size(); ++s) {
      const size_t ndim = s + 1;
      const auto bytes = npy_bytes(dict(dtype, shapes[s]), 1024);
      bool accepted = false;
      ErrorKind kind = ErrorKind::kInternal;
      try {
        // Payload is oversized on purpose; trim to the declared size.
        const auto header = tensorio::parse_header(bytes);
        std::vector<uint8_t> exact(bytes.begin(),
                                   bytes.begin() + header.payload_offset +
                                       header.payload_bytes);
        decode(exact);
        accepted = true;
      } catch (const Error& e) {
        kind = e.kind();
      }
      SCOPED_TRACE(dtype + " " + shapes[s]);
      if (dtype == "<f4") {
        EXPECT_EQ(accepted, ndim == 2 || ndim == 3);
        if (!accepted) {
          EXPECT_EQ(kind, ErrorKind::kFormat);
        }
      } else if (dtype == "|u1") {
        EXPECT_EQ(accepted, ndim == 2);
        if (!accepted) {
          EXPECT_EQ(kind, ErrorKind::kFormat);
        }
      } else {
        EXPECT_FALSE(accepted);
        EXPECT_EQ(kind, ErrorKind::kUnsupportedDtype);
      }
    }
  }
}

TEST(TensorIoTest, UnsupportedDtypeMessageListsSupportedSet) {
  try {
    decode(npy_bytes(dict("<f8", "(2, 2)"), 32));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kUnsupportedDtype);
    EXPECT_NE(std::string(e.what()).find("<f4"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("|u1"), std::string::npos);
  }
}

TEST(TensorIoTest, RejectsMalformedHeaders) {
  const auto good = encode(FeatureMap::zeros(2, 2, 1));
  for (size_t len : {size_t{0}, size_t{4}, size_t{9}, size_t{60}, size_t{127},
                     size_t{130}}) {
    std::vector<uint8_t> cut(good.begin(), good.begin() + len);
    EXPECT_EQ(decode_error(cut), ErrorKind::kFormat) << "length " << len;
  }
  std::vector<uint8_t> bad_magic = good;
  bad_magic[1] = 'X';
  EXPECT_EQ(decode_error(bad_magic), ErrorKind::kFormat);
  std::vector<uint8_t> bad_version = good;
  bad_version[6] = 9;
  EXPECT_EQ(decode_error(bad_version), ErrorKind::kFormat);
  std::vector<uint8_t> no_newline = good;
  no_newline[127] = ' ';
  EXPECT_EQ(decode_error(no_newline), ErrorKind::kFormat);
  std::vector<uint8_t> trailing = good;
  trailing.push_back(0);
  EXPECT_EQ(decode_error(trailing), ErrorKind::kFormat);

  EXPECT_EQ(decode_error(npy_bytes(dict("<f4", "(2, 2)", "True"), 16)),
            ErrorKind::kFormat);
  EXPECT_EQ(decode_error(npy_bytes(dict("<f4", "(2, 0)"), 0)),
            ErrorKind::kFormat);
  EXPECT_EQ(decode_error(npy_bytes(dict("<f4", "(2, 2"), 16)),
            ErrorKind::kFormat);
  EXPECT_EQ(decode_error(npy_bytes(
                "{'descr': '<f4', 'fortran_order': False, 'shape': (2, 2), "
                "'extra': 1, }",
                16)),
            ErrorKind::kFormat);
  EXPECT_EQ(decode_error(npy_bytes("{'descr': '<f4', 'shape': (2, 2), }", 16)),
            ErrorKind::kFormat);
  EXPECT_EQ(decode_error(npy_bytes(dict("<f4", "(2, 2)", "maybe"), 16)),
            ErrorKind::kFormat);
  EXPECT_EQ(decode_error(npy_bytes(
                dict("<f4", "(4294967296, 4294967296, 4294967296)"), 0)),
            ErrorKind::kFormat);
}

TEST(TensorIoTest, NonFiniteValuesAreDataErrors) {
  for (float bad : {std::numeric_limits<float>::quiet_NaN(),
                    std::numeric_limits<float>::infinity(),
                    -std::numeric_limits<float>::infinity()}) {
    std::vector<uint8_t> bytes = npy_bytes(dict("<f4", "(1, 2)"), 8);
    std::memcpy(bytes.data() + bytes.size() - 4, &bad, 4);
    EXPECT_EQ(decode_error(bytes), ErrorKind::kData);
  }
}

TEST(TensorIoTest, HugeDeclaredShapeFailsBeforeAllocating) {
  oracle::TempDir dir("huge");
  const auto bytes = npy_bytes(dict("<f4", "(100000, 100000, 64)"), 16);
  const auto path = dir / "huge.npy";
  std::ofstream(path, std::ios::binary)
      .write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
  try {
    tensorio::read_tensor(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kFormat);
  }
}

TEST(TensorIoTest, TypedReadersCheckKind) {
  oracle::TempDir dir("typed");
  tensorio::write_tensor(LabelMask::filled(2, 2, 1), dir / "mask.npy");
  tensorio::write_tensor(FeatureMap::zeros(2, 2, 2), dir / "map.npy");
  EXPECT_THROW(tensorio::read_feature_map(dir / "mask.npy"), Error);
  EXPECT_THROW(tensorio::read_label_mask(dir / "map.npy"), Error);
  EXPECT_EQ(tensorio::read_label_mask(dir / "mask.npy", 7).ignore_value, 7);
  const auto header = tensorio::read_header(dir / "map.npy");
  EXPECT_EQ(header.shape, (std::vector<size_t>{2, 2, 2}));
  try {
    tensorio::read_tensor(dir / "missing.npy");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIo);
  }
}

TEST(TensorIoTest, WriteRejectsInvalidTensors) {
  oracle::TempDir dir("invalid");
  FeatureMap map = FeatureMap::zeros(2, 2, 1);
  map.data.pop_back();
  EXPECT_THROW(tensorio::write_tensor(map, dir / "a.npy"), Error);
  FeatureMap nan = FeatureMap::zeros(1, 1, 1);
  nan.data[0] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(tensorio::write_tensor(nan, dir / "b.npy"), Error);
  EXPECT_THROW(tensorio::write_tensor(LabelMask::filled(1, 1, 0),
                                      dir / "no_such_dir" / "c.npy"),
               Error);
}

TEST(TensorIoTest, ReadsExporterFixtures) {
  const std::filesystem::path dir = ATTNSEG_TEST_DATA_DIR "/exporter";
  const auto heads = tensorio::read_feature_map(dir / "img0.pathdino.npy");
  EXPECT_EQ(heads.height, 14u);
  EXPECT_EQ(heads.width, 14u);
  EXPECT_EQ(heads.channels, 12u);
  for (float v : heads.data) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  const auto gray = tensorio::read_feature_map(dir / "img0.gray.npy");
  EXPECT_EQ(gray.channels, 1u);
  for (size_t y = 0; y < 14; ++y) {
    for (size_t x = 0; x < 14; ++x) EXPECT_EQ(gray.at(y, x, 0), heads.at(y, x, 0));
  }
  const auto mask = tensorio::read_label_mask(dir / "img0.mask.npy");
  EXPECT_EQ(mask.height, 28u);
  EXPECT_EQ(mask.at(0, 0), 255);
  EXPECT_EQ(mask.at(5, 20), 1);
}

}  // namespace
}  // namespace attnseg

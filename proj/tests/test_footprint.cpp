// Copyright 2026 The nuq Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include "json.hpp"
#include "nuq/error.hpp"
#include "nuq/footprint.hpp"
#include "nuq/search.hpp"
#include "test_support.hpp"

namespace nuq {
namespace {

// Conv output sizes of the standard 224x224 VGG-16, computed by hand:
// (channels, spatial side) per layer.
std::uint64_t vgg16_conv_count(const std::string& name) {
  static const std::map<std::string, std::pair<int, int>> shapes{
      {"conv1_1", {64, 224}},  {"conv1_2", {64, 224}},  {"conv2_1", {128, 112}},
      {"conv2_2", {128, 112}}, {"conv3_1", {256, 56}},  {"conv3_2", {256, 56}},
      {"conv3_3", {256, 56}},  {"conv4_1", {512, 28}},  {"conv4_2", {512, 28}},
      {"conv4_3", {512, 28}},  {"conv5_1", {512, 14}},  {"conv5_2", {512, 14}},
      {"conv5_3", {512, 14}}};
  const auto [c, s] = shapes.at(name);
  return static_cast<std::uint64_t>(c) * s * s;
}

class Vgg16Footprint : public ::testing::Test {
 protected:
  ModelGraph g = load_model(testing::vgg16_model());
  std::vector<std::string> convs = g.quantizable_conv_layers();

  BitMap all(int bits) const {
    BitMap m;
    for (const auto& c : convs) m[c] = bits;
    return m;
  }
  BitMap from_file(const std::string& name) const {
    return bit_map(load_allocation(testing::source_path("paper_fixtures/" + name)));
  }
};

TEST_F(Vgg16Footprint, CountsMatchHandArithmetic) {
  ASSERT_EQ(convs.size(), 13u);
  std::uint64_t total = 0;
  for (const auto& lc : activation_counts(g)) {
    if (lc.layer.rfind("conv", 0) == 0) {
      EXPECT_EQ(lc.count, vgg16_conv_count(lc.layer)) << lc.layer;
      total += lc.count;
    }
  }
  EXPECT_EQ(total, 13547520u);
  EXPECT_EQ(activation_count(g, "fc6"), 4096u);
  EXPECT_EQ(activation_count(g, "fc8"), 1000u);
  EXPECT_THROW(activation_count(g, "pool1"), ValidationError);
}

TEST_F(Vgg16Footprint, UniformSixteenBits) {
  EXPECT_EQ(total_bits(g, all(16)), 13547520ull * 16);
  const auto r = footprint(g, all(16), FootprintBaseline::from_mib("ref", 16.8));
  EXPECT_NEAR(r.nb_mib(), 25.84, 0.005);
  EXPECT_NEAR(r.nnb, 25.83984375 / 16.8, 1e-12);
}

TEST_F(Vgg16Footprint, EnqIndexSix) {
  const auto bits = from_file("vgg16_enq_index6.csv");
  std::uint64_t conv_bits = 0;
  for (const auto& c : convs) conv_bits += vgg16_conv_count(c) * bits.at(c);
  EXPECT_EQ(conv_bits, 79077376u);
  EXPECT_EQ(total_bits(g, bits), 79077376u + 4096 * 6 + 4096 * 3 + 1000 * 2);
}

TEST_F(Vgg16Footprint, KnqFiveBits) {
  EXPECT_EQ(total_bits(g, from_file("vgg16_knq5.csv")), 67737600u);
}

TEST_F(Vgg16Footprint, CrossLayerAllocation) {
  EXPECT_EQ(total_bits(g, from_file("vgg16_clnq.csv")), 127145984u);
}

TEST_F(Vgg16Footprint, BaselineNormalizesToOne) {
  const auto clnq = from_file("vgg16_clnq.csv");
  const auto r = footprint(g, clnq, "clnq", clnq);
  EXPECT_DOUBLE_EQ(r.nnb, 1.0);
  EXPECT_EQ(r.baseline.name, "clnq");
}

TEST_F(Vgg16Footprint, LinearInBits) {
  for (int b = 1; b <= 15; ++b) {
    EXPECT_EQ(total_bits(g, all(b + 1)) - total_bits(g, all(b)), 13547520u);
  }
  auto one = all(4);
  auto two = all(4);
  two["conv3_2"] = 6;
  EXPECT_EQ(total_bits(g, two) - total_bits(g, one), 2 * vgg16_conv_count("conv3_2"));
}

TEST_F(Vgg16Footprint, EnqBeatsTwelveBitUniform) {
  const auto enq = footprint(g, from_file("vgg16_enq_index6.csv"), "u12", all(12));
  EXPECT_LE(enq.nnb, 0.60);
}

TEST_F(Vgg16Footprint, Validation) {
  auto missing = all(8);
  missing.erase("conv4_2");
  EXPECT_THROW(total_bits(g, missing), ValidationError);
  auto extra = all(8);
  extra["pool3"] = 8;
  EXPECT_THROW(total_bits(g, extra), ValidationError);
  auto zero = all(8);
  zero["conv1_1"] = 0;
  EXPECT_THROW(total_bits(g, zero), ValidationError);
  EXPECT_THROW(footprint(g, all(8), FootprintBaseline{"z", 0.0}), ValidationError);
}

TEST_F(Vgg16Footprint, JsonReport) {
  const auto r = footprint(g, all(5), FootprintBaseline::from_mib("ref", 16.8));
  const auto j = nlohmann::json::parse(to_json(r));
  EXPECT_EQ(j.at("nb_bits").get<std::uint64_t>(), 67737600u);
  EXPECT_EQ(j.at("layers").size(), 13u);
  EXPECT_EQ(j.at("schema").get<int>(), 1);
}

}  // namespace
}  // namespace nuq

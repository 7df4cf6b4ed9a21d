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

// Exercises the shared library through its C header only.

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "nuq/nuq.h"

namespace {

std::string src(const char* rel) { return std::string(NUQ_SOURCE_DIR) + "/" + rel; }

TEST(CApi, VersionAndStatusNames) {
  EXPECT_STRNE(nuq_version(), "");
  EXPECT_STREQ(nuq_status_name(NUQ_OK), "ok");
  EXPECT_STREQ(nuq_status_name(NUQ_ERROR_VERIFICATION), "verification failure");
}

TEST(CApi, FixedPointAndEnq) {
  uint32_t code = 0;
  ASSERT_EQ(nuq_to_fixed(3.25, 4, 2, &code), NUQ_OK);
  EXPECT_EQ(code, 13u);
  double v = 0;
  ASSERT_EQ(nuq_from_fixed(13, 4, 2, &v), NUQ_OK);
  EXPECT_DOUBLE_EQ(v, 3.25);
  EXPECT_EQ(nuq_from_fixed(16, 4, 2, &v), NUQ_ERROR_RANGE);
  EXPECT_NE(std::string(nuq_last_error()).find("from_fixed"), std::string::npos);
  EXPECT_EQ(nuq_to_fixed(-1.0, 4, 2, &code), NUQ_ERROR_VALIDATION);
  EXPECT_EQ(nuq_to_fixed(1.0, 4, 2, nullptr), NUQ_ERROR_VALIDATION);

  ASSERT_EQ(nuq_enq_quantize(130, 5, 12, &code), NUQ_OK);
  EXPECT_EQ(code, 1u);
  ASSERT_EQ(nuq_enq_dequantize(31, 5, 12, &code), NUQ_OK);
  EXPECT_EQ(code, 3968u);
  EXPECT_EQ(nuq_enq_dequantize(32, 5, 12, &code), NUQ_ERROR_RANGE);
}

TEST(CApi, CodebooksAndHardwareUnits) {
  nuq_codebooks* books = nullptr;
  ASSERT_EQ(nuq_codebooks_load(src("paper_fixtures/vgg16_knq5_codebooks.csv").c_str(), 12, 0,
                               &books),
            NUQ_OK);
  ASSERT_EQ(nuq_codebooks_count(books), 12u);
  EXPECT_STREQ(nuq_codebooks_layer(books, 1), "conv2_1");
  EXPECT_EQ(nuq_codebooks_layer(books, 12), nullptr);
  uint32_t out = 0;
  ASSERT_EQ(nuq_knq_quantize(books, "conv2_1", 15, &out), NUQ_OK);
  EXPECT_EQ(out, 1u);
  ASSERT_EQ(nuq_knq_dequantize(books, "conv2_1", 15, &out), NUQ_OK);
  EXPECT_EQ(out, 284u);
  EXPECT_EQ(nuq_knq_quantize(books, "conv9_9", 15, &out), NUQ_ERROR_VALIDATION);

  for (uint32_t w = 0; w < 4096; w += 11) {
    uint32_t hw = 0, sw = 0, back_hw = 0, back_sw = 0;
    ASSERT_EQ(nuq_hw_qk(books, "conv4_3", w, &hw), NUQ_OK);
    ASSERT_EQ(nuq_knq_quantize(books, "conv4_3", w, &sw), NUQ_OK);
    ASSERT_EQ(hw, sw);
    ASSERT_EQ(nuq_hw_ck(books, "conv4_3", hw, &back_hw), NUQ_OK);
    ASSERT_EQ(nuq_knq_dequantize(books, "conv4_3", sw, &back_sw), NUQ_OK);
    ASSERT_EQ(back_hw, back_sw);
    ASSERT_EQ(nuq_hw_qe(w, 7, 12, &hw), NUQ_OK);
    ASSERT_EQ(nuq_enq_quantize(w, 5, 12, &sw), NUQ_OK);
    ASSERT_EQ(hw, sw);
    ASSERT_EQ(nuq_hw_ce(hw, 7, 12, &back_hw), NUQ_OK);
    ASSERT_EQ(back_hw, hw << 7);
  }
  EXPECT_EQ(nuq_hw_qe(1, 13, 12, &out), NUQ_ERROR_VALIDATION);
  nuq_codebooks_free(books);
  nuq_codebooks_free(nullptr);

  EXPECT_EQ(nuq_codebooks_load("/nonexistent.csv", 12, 0, &books), NUQ_ERROR_IO);
  EXPECT_EQ(books, nullptr);
}

TEST(CApi, ModelForwardAndEvaluate) {
  nuq_model* model = nullptr;
  ASSERT_EQ(nuq_model_load(src("fixtures/digits_cnn.json").c_str(), &model), NUQ_OK);
  ASSERT_EQ(nuq_model_quantizable_count(model), 4u);
  EXPECT_STREQ(nuq_model_quantizable_layer(model, 0), "conv1");
  uint64_t count = 0;
  ASSERT_EQ(nuq_model_activation_count(model, "conv2", &count), NUQ_OK);
  EXPECT_EQ(count, 16u * 16 * 16);
  EXPECT_EQ(nuq_model_activation_count(model, "nope", &count), NUQ_ERROR_VALIDATION);

  nuq_dataset* data = nullptr;
  ASSERT_EQ(nuq_dataset_load(src("fixtures/digits/eval").c_str(), model, 60, &data), NUQ_OK);
  EXPECT_EQ(nuq_dataset_size(data), 60u);

  double acc_none = 0, acc_enq = 0;
  ASSERT_EQ(nuq_evaluate(model, data, nullptr, 1, &acc_none), NUQ_OK);
  EXPECT_GT(acc_none, 0.9);

  nuq_qconfig* cfg = nullptr;
  ASSERT_EQ(nuq_qconfig_create(model, &cfg), NUQ_OK);
  for (size_t i = 0; i < nuq_model_quantizable_count(model); ++i) {
    ASSERT_EQ(nuq_qconfig_set(cfg, nuq_model_quantizable_layer(model, i), NUQ_SCHEME_ENQ, 1,
                              nullptr),
              NUQ_OK);
  }
  ASSERT_EQ(nuq_evaluate(model, data, cfg, 1, &acc_enq), NUQ_OK);
  EXPECT_LT(acc_enq, acc_none);
  EXPECT_EQ(nuq_qconfig_set(cfg, "fc2", NUQ_SCHEME_ENQ, 4, nullptr), NUQ_ERROR_VALIDATION);
  EXPECT_EQ(nuq_qconfig_set(cfg, "conv1", NUQ_SCHEME_KNQ, 4, nullptr), NUQ_ERROR_VALIDATION);

  std::vector<uint16_t> input(32 * 32, 0);
  std::vector<int64_t> scores(10);
  ASSERT_EQ(nuq_forward(model, input.data(), input.size(), nullptr, scores.data(), scores.size()),
            NUQ_OK);
  EXPECT_EQ(nuq_forward(model, input.data(), input.size(), nullptr, scores.data(), 3),
            NUQ_ERROR_DIMENSION);
  EXPECT_EQ(nuq_forward(model, input.data(), 10, nullptr, scores.data(), scores.size()),
            NUQ_ERROR_DIMENSION);

  nuq_qconfig_free(cfg);
  nuq_dataset_free(data);
  nuq_model_free(model);
}

TEST(CApi, VerifyCommandReturnsReport) {
  nuq_run_options o;
  nuq_run_options_init(&o);
  const std::string books = src("paper_fixtures/vgg16_knq5_codebooks.csv");
  o.codebook_path = books.c_str();
  char* report = nullptr;
  ASSERT_EQ(nuq_cmd_verify_hw(&o, &report), NUQ_OK);
  ASSERT_NE(report, nullptr);
  EXPECT_NE(std::strstr(report, "\"passed\": true"), nullptr);
  nuq_string_free(report);
}

TEST(CApi, CommandErrorsMapToStatus) {
  nuq_run_options o;
  nuq_run_options_init(&o);
  char* report = nullptr;
  EXPECT_EQ(nuq_cmd_eval(&o, &report), NUQ_ERROR_VALIDATION);  // no model
  EXPECT_EQ(report, nullptr);
  const std::string missing = "/nonexistent/model.json";
  o.model_path = missing.c_str();
  EXPECT_EQ(nuq_cmd_eval(&o, &report), NUQ_ERROR_IO);
  EXPECT_EQ(nuq_cmd_eval(nullptr, &report), NUQ_ERROR_VALIDATION);
}

}  // namespace

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

// Drives the nuq executable end to end and checks files and exit codes.

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>

#include "json.hpp"
#include "test_support.hpp"

namespace {

namespace fs = std::filesystem;
using nuq::testing::source_path;
using nuq::testing::TempDir;

int run(const std::string& args, const std::string& log) {
  const std::string cmd = std::string(NUQ_CLI_PATH) + " " + args + " > " + log + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string model_flags() {
  return "--model " + source_path("fixtures/digits_cnn.json");
}

std::size_t count_prefix(const fs::path& dir, const std::string& prefix) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    n += e.path().filename().string().rfind(prefix, 0) == 0;
  }
  return n;
}

TEST(Cli, CalibrateWritesOneCodebookPerConvLayer) {
  TempDir out("cli_cal");
  ASSERT_EQ(run("calibrate " + model_flags() + " --calib " + source_path("fixtures/digits/calib") +
                    " --calib-count 30 --bits 3 --out " + out.str() + " --quiet",
                out.file("log")),
            0)
      << nuq::testing::read_text(out.file("log"));
  EXPECT_EQ(count_prefix(out.path(), "codebook_"), 3u);
  EXPECT_EQ(count_prefix(out.path(), "hist_"), 3u);
  const auto report =
      nlohmann::json::parse(nuq::testing::read_text(out.file("calibrate_report.json")));
  EXPECT_EQ(report.at("schema"), 1);
}

TEST(Cli, EmptyCalibrationDirIsValidationError) {
  TempDir out("cli_empty");
  fs::create_directories(out.path() / "calib");
  EXPECT_EQ(run("calibrate " + model_flags() + " --calib " + out.file("calib") +
                    " --bits 3 --out " + out.file("o"),
                out.file("log")),
            2);
  EXPECT_NE(nuq::testing::read_text(out.file("log")).find("labels.csv"), std::string::npos);
}

TEST(Cli, UnsortedCodebookFailsBeforeSweep) {
  TempDir out("cli_unsorted");
  nuq::testing::write_text(out.file("bad.csv"), "conv2_1,1,100,50\n");
  EXPECT_EQ(run("verify-hw --codebooks " + out.file("bad.csv") + " --out " + out.file("o"),
                out.file("log")),
            2);
  const auto log = nuq::testing::read_text(out.file("log"));
  EXPECT_NE(log.find("non-decreasing"), std::string::npos);
  EXPECT_FALSE(fs::exists(out.path() / "o" / "verify_hw_report.json"));
}

TEST(Cli, VerifyHwPassesOnShippedCodebooks) {
  TempDir out("cli_hw");
  EXPECT_EQ(run("verify-hw --codebooks " + source_path("paper_fixtures/vgg16_knq5_codebooks.csv") +
                    " --out " + out.str() + " --quiet",
                out.file("log")),
            0);
  const auto j = nlohmann::json::parse(nuq::testing::read_text(out.file("verify_hw_report.json")));
  EXPECT_TRUE(j.at("passed").get<bool>());
}

TEST(Cli, ReportOnVgg16Topology) {
  TempDir out("cli_rep");
  ASSERT_EQ(run("report --model " + source_path("paper_fixtures/vgg16_topology.json") +
                    " --alloc " + source_path("paper_fixtures/vgg16_knq5.csv") +
                    " --baseline-alloc " + source_path("paper_fixtures/vgg16_clnq.csv") +
                    " --out " + out.str() + " --quiet",
                out.file("log")),
            0)
      << nuq::testing::read_text(out.file("log"));
  const auto j =
      nlohmann::json::parse(nuq::testing::read_text(out.file("footprint_report.json")));
  EXPECT_EQ(j.at("nb_bits").get<std::uint64_t>(), 67737600u);
  EXPECT_EQ(j.at("baseline").at("nb_bits").get<double>(), 127145984.0);
}

TEST(Cli, EvalUniformReportsFootprint) {
  TempDir out("cli_eval");
  ASSERT_EQ(run("eval " + model_flags() + " --data " + source_path("fixtures/digits/eval") +
                    " --limit 40 --scheme uniform --bits 12 --out " + out.str() + " --quiet",
                out.file("log")),
            0)
      << nuq::testing::read_text(out.file("log"));
  const auto j = nlohmann::json::parse(nuq::testing::read_text(out.file("eval_report.json")));
  EXPECT_EQ(j.at("samples"), 40);
  EXPECT_FALSE(j.at("footprint").is_null());
}

TEST(Cli, UsageAndInputErrors) {
  TempDir out("cli_err");
  EXPECT_EQ(run("", out.file("log")), 2);
  EXPECT_EQ(run("frobnicate", out.file("log")), 2);
  EXPECT_EQ(run("eval --model /nonexistent.json --data x", out.file("log")), 3);
  EXPECT_EQ(run("eval " + model_flags() + " --data " + source_path("fixtures/digits/eval") +
                    " --scheme enq --bits 13",
                out.file("log")),
            2);
  EXPECT_EQ(run("search " + model_flags() + " --data " + source_path("fixtures/digits/eval") +
                    " --scheme enq --delta 0",
                out.file("log")),
            2);
  EXPECT_EQ(run("eval " + model_flags() + " --qm 10 --data " +
                    source_path("fixtures/digits/eval"),
                out.file("log")),
            2);
}

TEST(Cli, ConfigFileSuppliesOptions) {
  TempDir out("cli_cfg");
  nuq::testing::write_text(out.file("run.toml"),
                           "[eval]\nmodel = \"" + source_path("fixtures/digits_cnn.json") +
                               "\"\ndata = \"" + source_path("fixtures/digits/eval") +
                               "\"\nlimit = 20\nscheme = \"enq\"\nbits = 6\n");
  ASSERT_EQ(run("--config " + out.file("run.toml") + " eval --quiet --out " + out.file("o"),
                out.file("log")),
            0)
      << nuq::testing::read_text(out.file("log"));
  const auto j =
      nlohmann::json::parse(nuq::testing::read_text(out.file("o/eval_report.json")));
  EXPECT_EQ(j.at("samples"), 20);
}

}  // namespace

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

// End-to-end commands behind the CLI: calibrate, search, eval, verify-hw and
// report. Each returns its JSON report and writes its artifacts under
// RunConfig::out_dir.

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "nuq/error.hpp"

namespace nuq {

struct RunConfig {
  std::string model_path;
  std::string data_path;
  std::string calib_path;          // empty: first calib_count samples of data
  std::size_t calib_count = 100;
  std::size_t data_limit = 0;      // 0: all samples

  std::string scheme = "none";     // none | uniform | enq | knq
  int bits = 0;                    // 0: unset
  std::string alloc_path;
  std::string codebook_path;       // file or directory of codebook tables
  std::string baseline_alloc_path;
  double baseline_mib = 0.0;       // > 0 overrides baseline_alloc_path

  int qm_bits = 0;                 // 0: the model's activation format
  int f_bits = -1;                 // < 0: the model's activation format
  double delta = 0.02;
  std::size_t top_k = 1;
  std::string out_dir;

  std::string search_mode = "greedy";
  int min_bits = 1;
  int max_bits = 0;                // 0: scheme default
  bool preprocess = true;
  bool refine = false;
  std::vector<int> shifts;         // verify-hw; empty: 0..q_m
};

/// Hardware/software mismatch. Carries the full verify-hw report.
class VerificationFailure : public VerificationError {
 public:
  VerificationFailure(const std::string& what, std::string report)
      : VerificationError(what), report_(std::move(report)) {}
  const std::string& report() const noexcept { return report_; }

 private:
  std::string report_;
};

std::string cmd_calibrate(const RunConfig& cfg);
std::string cmd_eval(const RunConfig& cfg);
std::string cmd_search(const RunConfig& cfg);
/// Throws VerificationFailure (after writing the report) on any mismatch.
std::string cmd_verify_hw(const RunConfig& cfg);
std::string cmd_report(const RunConfig& cfg);

inline constexpr int kReportSchema = 1;

}  // namespace nuq

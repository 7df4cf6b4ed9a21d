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

// Command-line front end. Talks to the library only through the C API.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nuq/nuq.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitVerification = 4;

int exit_code(nuq_status s) {
  switch (s) {
    case NUQ_OK: return kExitOk;
    case NUQ_ERROR_VALIDATION:
    case NUQ_ERROR_PARSE:
    case NUQ_ERROR_RANGE:
    case NUQ_ERROR_DIMENSION: return kExitValidation;
    case NUQ_ERROR_VERIFICATION: return kExitVerification;
    default: return kExitRuntime;
  }
}

struct Flags {
  std::string model, data, calib, scheme = "none", alloc, codebooks, baseline_alloc, out;
  std::string mode = "greedy";
  std::size_t calib_count = 100;
  std::size_t data_limit = 0;
  int bits = 0;
  double baseline_mib = 0.0;
  int qm = 0;
  int fbits = -1;
  double delta = 0.02;
  std::size_t topk = 1;
  int min_bits = 1;
  int max_bits = 0;
  bool no_preprocess = false;
  bool refine = false;
  std::vector<int> shifts;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--model", f.model, "model manifest (JSON)");
  cmd->add_option("--data", f.data, "evaluation dataset directory");
  cmd->add_option("--limit", f.data_limit, "use only the first N evaluation samples");
  cmd->add_option("--topk", f.topk, "top-k accuracy")->check(CLI::PositiveNumber);
  cmd->add_option("--qm", f.qm, "master activation width (must match the model)");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_flag("--quiet", f.quiet, "do not print the report");
}

void add_calib(CLI::App* cmd, Flags& f) {
  cmd->add_option("--calib", f.calib, "calibration dataset directory");
  cmd->add_option("--calib-count", f.calib_count, "calibration samples to use");
  cmd->add_flag("--no-preprocess", f.no_preprocess,
                "fit codebooks on raw rather than saturated codes");
}

nuq_run_options to_options(const Flags& f) {
  nuq_run_options o;
  nuq_run_options_init(&o);
  auto cstr = [](const std::string& s) { return s.empty() ? nullptr : s.c_str(); };
  o.model_path = cstr(f.model);
  o.data_path = cstr(f.data);
  o.calib_path = cstr(f.calib);
  o.calib_count = f.calib_count;
  o.data_limit = f.data_limit;
  o.scheme = f.scheme.c_str();
  o.bits = f.bits;
  o.alloc_path = cstr(f.alloc);
  o.codebook_path = cstr(f.codebooks);
  o.baseline_alloc_path = cstr(f.baseline_alloc);
  o.baseline_mib = f.baseline_mib;
  o.qm_bits = f.qm;
  o.f_bits = f.fbits;
  o.delta = f.delta;
  o.top_k = f.topk;
  o.out_dir = cstr(f.out);
  o.search_mode = f.mode.c_str();
  o.min_bits = f.min_bits;
  o.max_bits = f.max_bits;
  o.preprocess = f.no_preprocess ? 0 : 1;
  o.refine = f.refine ? 1 : 0;
  o.shifts = f.shifts.empty() ? nullptr : f.shifts.data();
  o.shift_count = f.shifts.size();
  return o;
}

using Command = nuq_status (*)(const nuq_run_options*, char**);

int run(Command cmd, const Flags& f) {
  const nuq_run_options opts = to_options(f);
  char* report = nullptr;
  const nuq_status s = cmd(&opts, &report);
  if (report) {
    if (!f.quiet || s != NUQ_OK) std::fputs(report, stdout);
    nuq_string_free(report);
  }
  if (s != NUQ_OK) {
    std::fprintf(stderr, "nuq: %s: %s\n", nuq_status_name(s), nuq_last_error());
  }
  return exit_code(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Non-uniform activation quantization toolkit"};
  app.set_version_flag("--version", nuq_version());
  app.set_config("--config", "", "read options from a TOML/INI file");
  app.require_subcommand(1);

  Flags f;
  Command chosen = nullptr;

  auto* calibrate = app.add_subcommand("calibrate", "fit KNQ codebooks per layer");
  add_common(calibrate, f);
  add_calib(calibrate, f);
  calibrate->add_option("--bits", f.bits, "codebook width T")->required();
  calibrate->callback([&] { chosen = nuq_cmd_calibrate; });

  auto* eval = app.add_subcommand("eval", "measure accuracy under a quantization setting");
  add_common(eval, f);
  add_calib(eval, f);
  eval->add_option("--scheme", f.scheme, "none | uniform | enq | knq");
  eval->add_option("--bits", f.bits, "width applied to every quantizable layer");
  eval->add_option("--fbits", f.fbits, "fractional bits for uniform");
  eval->add_option("--alloc", f.alloc, "per-layer allocation file");
  eval->add_option("--codebooks", f.codebooks, "codebook file or directory");
  eval->add_option("--baseline-mib", f.baseline_mib, "footprint baseline in MiB");
  eval->callback([&] { chosen = nuq_cmd_eval; });

  auto* search = app.add_subcommand("search", "find a minimal bit allocation");
  add_common(search, f);
  add_calib(search, f);
  search->add_option("--scheme", f.scheme, "uniform | enq | knq")->required();
  search->add_option("--delta", f.delta, "accuracy budget");
  search->add_option("--fbits", f.fbits, "fractional bits for uniform");
  search->add_option("--mode", f.mode, "greedy | exhaustive");
  search->add_option("--min-bits", f.min_bits, "lowest width tried");
  search->add_option("--max-bits", f.max_bits, "highest width tried (0: master width)");
  search->add_flag("--refine", f.refine, "refine KNQ widths per layer");
  search->add_option("--baseline-mib", f.baseline_mib, "footprint baseline in MiB");
  search->callback([&] { chosen = nuq_cmd_search; });

  auto* verify = app.add_subcommand("verify-hw", "check hardware unit models exhaustively");
  verify->add_option("--qm", f.qm, "master activation width");
  verify->add_option("--shifts", f.shifts, "ENQ shift amounts q_m - E");
  verify->add_option("--codebooks", f.codebooks, "codebook file or directory");
  verify->add_option("--out", f.out, "output directory");
  verify->add_flag("--quiet", f.quiet, "do not print the report");
  verify->callback([&] { chosen = nuq_cmd_verify_hw; });

  auto* report = app.add_subcommand("report", "compute the activation footprint");
  add_common(report, f);
  report->add_option("--alloc", f.alloc, "allocation file")->required();
  report->add_option("--baseline-alloc", f.baseline_alloc, "baseline allocation file");
  report->add_option("--baseline-mib", f.baseline_mib, "baseline in MiB");
  report->callback([&] { chosen = nuq_cmd_report; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }
  return chosen ? run(chosen, f) : kExitValidation;
}

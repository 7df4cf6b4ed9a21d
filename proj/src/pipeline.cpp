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

#include "nuq/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "nuq/calib.hpp"
#include "nuq/error.hpp"
#include "nuq/footprint.hpp"
#include "nuq/hwmodel.hpp"
#include "nuq/netgraph.hpp"
#include "nuq/quant.hpp"
#include "nuq/search.hpp"
#include "parallel.hpp"

namespace nuq {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string fmt_double(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

fs::path out_dir(const RunConfig& cfg, bool required) {
  if (cfg.out_dir.empty()) {
    require(!required, "--out is required for this command");
    return {};
  }
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + cfg.out_dir + "': " + ec.message());
  return fs::path(cfg.out_dir);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

ModelGraph open_model(const RunConfig& cfg) {
  require(!cfg.model_path.empty(), "--model is required");
  ModelGraph model = load_model(cfg.model_path);
  const FxFormat& act = model.activation_format();
  if (cfg.qm_bits != 0 && cfg.qm_bits != act.q_bits()) {
    throw ValidationError("--qm " + std::to_string(cfg.qm_bits) +
                          " disagrees with the model's activation format (" +
                          std::to_string(act.q_bits()) + " bits)");
  }
  return model;
}

int uniform_f_bits(const RunConfig& cfg, const ModelGraph& model) {
  return cfg.f_bits >= 0 ? cfg.f_bits : model.activation_format().f_bits();
}

Dataset open_data(const RunConfig& cfg, const ModelGraph& model) {
  require(!cfg.data_path.empty(), "--data is required");
  return load_dataset(cfg.data_path, model, cfg.data_limit);
}

Dataset open_calibration(const RunConfig& cfg, const ModelGraph& model) {
  require(cfg.calib_count >= 1, "calibration sample count must be >= 1");
  if (!cfg.calib_path.empty()) return load_dataset(cfg.calib_path, model, cfg.calib_count);
  require(!cfg.data_path.empty(), "--calib or --data is required for calibration");
  return load_dataset(cfg.data_path, model, cfg.calib_count);
}

void check_delta(const RunConfig& cfg) {
  require(cfg.delta > 0.0 && cfg.delta <= 1.0, "--delta must be in (0, 1]");
}

// Codebook tables from a file or from every *.csv file in a directory.
std::vector<Codebook> open_codebooks(const std::string& path, FxFormat master) {
  if (!fs::is_directory(path)) return load_codebooks(path, master);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(path)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && name.rfind("codebook", 0) == 0 && e.path().extension() == ".csv") {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<Codebook> books;
  for (const auto& f : files) {
    auto part = load_codebooks(f.string(), master);
    books.insert(books.end(), part.begin(), part.end());
  }
  return books;
}

CodebookSource table_source(std::vector<Codebook> books) {
  auto shared = std::make_shared<std::vector<CodebookPtr>>();
  for (auto& b : books) shared->push_back(std::make_shared<const Codebook>(std::move(b)));
  return [shared](const std::string& layer, int bits) -> CodebookPtr {
    for (const auto& cb : *shared) {
      if (cb->layer() == layer && cb->bits() == bits) return cb;
    }
    throw ValidationError("no " + std::to_string(bits) + "-bit codebook for layer '" + layer + "'");
  };
}

CodebookSource codebook_source(const RunConfig& cfg, const ModelGraph& model) {
  if (cfg.codebook_path.empty()) return {};
  return table_source(open_codebooks(cfg.codebook_path, model.activation_format()));
}

QuantConfig config_from_flags(const RunConfig& cfg, const ModelGraph& model) {
  if (!cfg.alloc_path.empty()) {
    return config_for(model, load_allocation(cfg.alloc_path), codebook_source(cfg, model));
  }
  if (cfg.scheme == "none" || cfg.scheme.empty()) return QuantConfig(model.activation_format());
  const Scheme scheme = parse_scheme(cfg.scheme);
  require(cfg.bits >= 1, "--bits is required with --scheme " + cfg.scheme);
  switch (scheme) {
    case Scheme::Uniform:
      return QuantConfig::all_uniform(model, cfg.bits, uniform_f_bits(cfg, model));
    case Scheme::Enq:
      return QuantConfig::all_enq(model, cfg.bits);
    case Scheme::Knq: {
      const auto source = codebook_source(cfg, model);
      require(static_cast<bool>(source), "--codebooks is required with --scheme knq");
      QuantConfig q(model.activation_format());
      for (const auto& name : model.quantizable_conv_layers()) {
        q.set(name, LayerQuantSpec::knq(source(name, cfg.bits)));
      }
      return q;
    }
  }
  return QuantConfig(model.activation_format());
}

BitMap bits_of(const QuantConfig& q) {
  BitMap m;
  for (const auto& [name, spec] : q.layers()) m[name] = spec.bits;
  return m;
}

FootprintReport footprint_with_baseline(const RunConfig& cfg, const ModelGraph& model,
                                        const BitMap& bits) {
  if (cfg.baseline_mib > 0.0) {
    return footprint(model, bits, FootprintBaseline::from_mib("fixed", cfg.baseline_mib));
  }
  if (!cfg.baseline_alloc_path.empty()) {
    return footprint(model, bits, fs::path(cfg.baseline_alloc_path).filename().string(),
                     bit_map(load_allocation(cfg.baseline_alloc_path)));
  }
  BitMap base;
  const int qm = model.activation_format().q_bits();
  for (const auto& [name, b] : bits) base[name] = qm;
  return footprint(model, bits, "uniform-" + std::to_string(qm), base);
}

json config_json(const QuantConfig& q, const ModelGraph& model) {
  json rows = json::array();
  for (const auto& l : model.layers()) {
    if (const auto* spec = q.find(l.name)) {
      rows.push_back({{"layer", l.name}, {"scheme", to_string(spec->scheme)}, {"bits", spec->bits}});
    }
  }
  return rows;
}

json table_json(const std::vector<std::pair<int, double>>& table, const char* key) {
  json rows = json::array();
  for (const auto& [b, acc] : table) rows.push_back({{key, b}, {"accuracy", acc}});
  return rows;
}

std::map<std::string, std::string> summary(const std::string& scheme, double acc, double ref,
                                           const RunConfig& cfg) {
  return {{"scheme", scheme},
          {"achieved_accuracy", fmt_double(acc)},
          {"reference_accuracy", fmt_double(ref)},
          {"delta", fmt_double(cfg.delta)},
          {"top_k", std::to_string(cfg.top_k)}};
}

}  // namespace

// ---------------------------------------------------------------------------

std::string cmd_calibrate(const RunConfig& cfg) {
  const ModelGraph model = open_model(cfg);
  require(cfg.bits >= 1 && cfg.bits <= 16, "--bits (K-means codebook width T) is required");
  const Dataset calib = open_calibration(cfg, model);
  const fs::path dir = out_dir(cfg, true);
  const FxFormat master = model.activation_format();

  auto samples = collect_all(model, calib);
  const auto layers = model.quantizable_conv_layers();
  std::vector<json> rows(layers.size());
  detail::parallel_for(layers.size(), [&](std::size_t i) {
    const std::string& name = layers[i];
    try {
      ActivationSample s = std::move(samples.at(name));
      if (cfg.preprocess) s = saturate(std::move(s), master);
      const Histogram h = Histogram::of(s.values);
      const Codebook cb = kmeans_fit(s, KMeansConfig::for_bits(cfg.bits), master);
      const std::string cb_file = "codebook_" + name + ".csv";
      const std::string hist_file = "hist_" + name + ".csv";
      save_codebooks((dir / cb_file).string(), {cb});
      std::ostringstream hist;
      write_histogram_csv(hist, h);
      write_text(dir / hist_file, hist.str());
      rows[i] = {{"layer", name},         {"values", s.values.size()},
                 {"distinct", h.values.size()}, {"codebook", cb_file},
                 {"histogram", hist_file}, {"entries", cb.entries()}};
    } catch (const Error& e) {
      throw Error(e.kind(), "layer '" + name + "': " + e.what());
    }
  });
  json report = {{"schema", kReportSchema},
                 {"command", "calibrate"},
                 {"model", model.name()},
                 {"calibration_samples", calib.size()},
                 {"bits", cfg.bits},
                 {"preprocess", cfg.preprocess},
                 {"layers", rows}};
  const std::string text = dump(report);
  write_text(dir / "calibrate_report.json", text);
  return text;
}

std::string cmd_eval(const RunConfig& cfg) {
  const ModelGraph model = open_model(cfg);
  require(cfg.top_k >= 1, "--topk must be >= 1");
  const Dataset data = open_data(cfg, model);
  const QuantConfig q = config_from_flags(cfg, model);
  const EvalResult r = evaluate_counts(model, data, q, cfg.top_k);

  json report = {{"schema", kReportSchema},
                 {"command", "eval"},
                 {"model", model.name()},
                 {"samples", r.total},
                 {"correct", r.correct},
                 {"top_k", cfg.top_k},
                 {"accuracy", r.accuracy()},
                 {"config", config_json(q, model)}};
  if (q.empty()) {
    report["footprint"] = nullptr;
  } else {
    report["footprint"] = json::parse(to_json(footprint_with_baseline(cfg, model, bits_of(q))));
  }
  const std::string text = dump(report);
  if (const fs::path dir = out_dir(cfg, false); !dir.empty()) {
    write_text(dir / "eval_report.json", text);
  }
  return text;
}

std::string cmd_search(const RunConfig& cfg) {
  const ModelGraph model = open_model(cfg);
  check_delta(cfg);
  const Dataset data = open_data(cfg, model);
  const fs::path dir = out_dir(cfg, true);
  const FxFormat master = model.activation_format();
  const QuantConfig none(master);

  json report = {{"schema", kReportSchema}, {"command", "search"}, {"model", model.name()},
                 {"scheme", cfg.scheme},     {"delta", cfg.delta},   {"top_k", cfg.top_k},
                 {"samples", data.size()}};
  const Scheme scheme = parse_scheme(cfg.scheme);
  SearchBudget budget{cfg.delta, 0.0, cfg.top_k};

  if (scheme == Scheme::Uniform) {
    budget.reference_accuracy = evaluate(model, data, none, cfg.top_k);
    const int f = uniform_f_bits(cfg, model);
    const int q_lo = std::max(cfg.min_bits, f + 1);
    const int q_hi = cfg.max_bits ? cfg.max_bits : FxFormat::kMaxBits;
    const UniformSweep sweep = find_min_uniform_q(model, data, budget, q_lo, q_hi, f);
    std::ostringstream csv;
    csv << "q,accuracy\n";
    for (const auto& [qb, acc] : sweep.table) csv << qb << ',' << fmt_double(acc) << '\n';
    write_text(dir / "uniform_sweep.csv", csv.str());
    report["reference_accuracy"] = budget.reference_accuracy;
    report["f_bits"] = f;
    report["table"] = table_json(sweep.table, "q");
    if (!sweep.q_min) {
      throw InfeasibleError("no uniform width in [" + std::to_string(q_lo) + ", " +
                            std::to_string(q_hi) + "] meets the budget");
    }
    report["q_min"] = *sweep.q_min;
    BitAllocation alloc;
    alloc.scheme = Scheme::Uniform;
    for (const auto& name : model.quantizable_layers()) alloc.bits.emplace_back(name, *sweep.q_min);
    for (const auto& [qb, acc] : sweep.table) {
      if (qb == *sweep.q_min) alloc.achieved_accuracy = acc;
    }
    save_allocation((dir / "alloc_uniform.csv").string(), alloc,
                    summary("uniform", alloc.achieved_accuracy, budget.reference_accuracy, cfg));
    report["achieved_accuracy"] = alloc.achieved_accuracy;
    report["allocation"] = "alloc_uniform.csv";
  } else if (scheme == Scheme::Enq) {
    // ENQ widths are judged against the q_m-bit uniform accuracy.
    budget.reference_accuracy = evaluate(
        model, data, QuantConfig::all_uniform(model, master.q_bits(), master.f_bits()), cfg.top_k);
    EnqSearchOptions opts;
    opts.mode = parse_search_mode(cfg.search_mode);
    opts.min_bits = cfg.min_bits;
    opts.max_bits = cfg.max_bits;
    const BitAllocation alloc = search_enq_allocation(model, data, budget, opts);
    save_allocation((dir / "alloc_enq.csv").string(), alloc,
                    summary("enq", alloc.achieved_accuracy, budget.reference_accuracy, cfg));
    const auto fp = footprint_with_baseline(cfg, model, alloc.bit_map());
    report["reference_accuracy"] = budget.reference_accuracy;
    report["mode"] = cfg.search_mode;
    report["achieved_accuracy"] = alloc.achieved_accuracy;
    report["bits"] = json(alloc.bits);
    report["nb_bits"] = fp.nb_bits;
    report["nnb"] = fp.nnb;
    report["allocation"] = "alloc_enq.csv";
  } else {
    budget.reference_accuracy = evaluate(model, data, none, cfg.top_k);
    const Dataset calib = open_calibration(cfg, model);
    CodebookFitter fitter(model, calib, cfg.preprocess);
    KnqSearchOptions opts;
    opts.min_bits = cfg.min_bits;
    opts.max_bits = cfg.max_bits ? cfg.max_bits : 8;
    opts.per_layer_refine = cfg.refine;
    const auto source = [&](const std::string& layer, int bits) { return fitter.fit(layer, bits); };
    const KnqSearchResult res = search_knq_allocation(model, data, budget, source, opts);
    const BitAllocation& alloc = res.allocation;
    std::vector<Codebook> books;
    for (const auto& [name, b] : alloc.bits) books.push_back(*fitter.fit(name, b));
    save_codebooks((dir / "codebooks_knq.csv").string(), books);
    save_allocation((dir / "alloc_knq.csv").string(), alloc,
                    summary("knq", alloc.achieved_accuracy, budget.reference_accuracy, cfg));
    std::ostringstream csv;
    csv << "bits,accuracy\n";
    for (const auto& [t, acc] : res.table) csv << t << ',' << fmt_double(acc) << '\n';
    write_text(dir / "knq_sweep.csv", csv.str());
    const auto fp = footprint_with_baseline(cfg, model, alloc.bit_map());
    report["reference_accuracy"] = budget.reference_accuracy;
    report["preprocess"] = cfg.preprocess;
    report["calibration_samples"] = calib.size();
    report["uniform_bits"] = res.uniform_bits;
    report["table"] = table_json(res.table, "bits");
    report["achieved_accuracy"] = alloc.achieved_accuracy;
    report["bits"] = json(alloc.bits);
    report["nb_bits"] = fp.nb_bits;
    report["nnb"] = fp.nnb;
    report["allocation"] = "alloc_knq.csv";
    report["codebooks"] = "codebooks_knq.csv";
  }
  const std::string text = dump(report);
  write_text(dir / "search_report.json", text);
  return text;
}

std::string cmd_verify_hw(const RunConfig& cfg) {
  const FxFormat master(cfg.qm_bits ? cfg.qm_bits : 12, cfg.f_bits >= 0 ? cfg.f_bits : 0);
  std::vector<int> shifts = cfg.shifts;
  if (shifts.empty()) {
    for (int s = 0; s <= master.q_bits(); ++s) shifts.push_back(s);
  }
  for (int s : shifts) {
    require(s >= 0 && s <= master.q_bits(), "shift " + std::to_string(s) + " outside [0, q_m]");
  }
  std::vector<Codebook> books;
  if (!cfg.codebook_path.empty()) {
    books = open_codebooks(cfg.codebook_path, master);
    for (const auto& cb : books) hw::KnqUnitConfig check(cb);  // validate before sweeping
  }
  const auto enq = hw::verify_enq_units(master, shifts);
  const auto knq = hw::verify_knq_units(master, books);

  const auto section = [](const hw::EquivalenceReport& r) {
    json mism = json::array();
    for (const auto& m : r.mismatches) {
      mism.push_back({{"unit", m.unit}, {"config", m.config}, {"input", m.input},
                      {"hw", m.hw}, {"sw", m.sw}});
    }
    return json{{"checks", r.checks}, {"passed", r.passed()}, {"mismatches", mism}};
  };
  json codebook_names = json::array();
  for (const auto& cb : books) codebook_names.push_back(cb.layer());
  json report = {{"schema", kReportSchema},
                 {"command", "verify-hw"},
                 {"qm_bits", master.q_bits()},
                 {"shifts", shifts},
                 {"codebooks", codebook_names},
                 {"enq", section(enq)},
                 {"knq", section(knq)},
                 {"passed", enq.passed() && knq.passed()}};
  const std::string text = dump(report);
  if (const fs::path dir = out_dir(cfg, false); !dir.empty()) {
    write_text(dir / "verify_hw_report.json", text);
  }
  if (!enq.passed() || !knq.passed()) {
    const auto& m = !enq.passed() ? enq.mismatches.front() : knq.mismatches.front();
    std::ostringstream msg;
    msg << m.unit << " mismatch (" << m.config << "): input " << m.input << " -> hw " << m.hw
        << ", sw " << m.sw;
    throw VerificationFailure(msg.str(), text);
  }
  return text;
}

std::string cmd_report(const RunConfig& cfg) {
  const ModelGraph model = open_model(cfg);
  require(!cfg.alloc_path.empty(), "--alloc is required for report");
  const BitMap bits = bit_map(load_allocation(cfg.alloc_path));
  json report = json::parse(to_json(footprint_with_baseline(cfg, model, bits)));
  report["command"] = "report";
  report["model"] = model.name();
  report["allocation"] = fs::path(cfg.alloc_path).filename().string();
  const std::string text = dump(report);
  if (const fs::path dir = out_dir(cfg, false); !dir.empty()) {
    write_text(dir / "footprint_report.json", text);
  }
  return text;
}

}  // namespace nuq

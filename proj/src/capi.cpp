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

#include "nuq/nuq.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include "nuq/error.hpp"
#include "nuq/fxcore.hpp"
#include "nuq/hwmodel.hpp"
#include "nuq/netgraph.hpp"
#include "nuq/pipeline.hpp"
#include "nuq/quant.hpp"

struct nuq_model {
  nuq::ModelGraph graph;
};

struct nuq_dataset {
  nuq::Dataset data;
};

struct nuq_codebooks {
  std::vector<std::shared_ptr<const nuq::Codebook>> books;
};

struct nuq_qconfig {
  const nuq::ModelGraph* model;
  nuq::QuantConfig cfg;
};

namespace {

thread_local std::string last_error;

nuq_status status_of(nuq::ErrorKind kind) {
  switch (kind) {
    case nuq::ErrorKind::Validation: return NUQ_ERROR_VALIDATION;
    case nuq::ErrorKind::Parse: return NUQ_ERROR_PARSE;
    case nuq::ErrorKind::Range: return NUQ_ERROR_RANGE;
    case nuq::ErrorKind::DimensionMismatch: return NUQ_ERROR_DIMENSION;
    case nuq::ErrorKind::Io: return NUQ_ERROR_IO;
    case nuq::ErrorKind::Infeasible: return NUQ_ERROR_INFEASIBLE;
    case nuq::ErrorKind::Verification: return NUQ_ERROR_VERIFICATION;
  }
  return NUQ_ERROR_INTERNAL;
}

template <class Fn>
nuq_status guarded(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return NUQ_OK;
  } catch (const nuq::Error& e) {
    last_error = e.what();
    return status_of(e.kind());
  } catch (const std::exception& e) {
    last_error = e.what();
    return NUQ_ERROR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return NUQ_ERROR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) throw nuq::ValidationError(std::string(what) + " must not be NULL");
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::string str(const char* s) { return s ? std::string(s) : std::string(); }

const nuq::Codebook& find_book(const nuq_codebooks* books, const char* layer) {
  need(books, "codebooks");
  need(layer, "layer");
  for (const auto& cb : books->books) {
    if (cb->layer() == layer) return *cb;
  }
  throw nuq::ValidationError(std::string("no codebook for layer '") + layer + "'");
}

nuq::RunConfig to_run_config(const nuq_run_options* o) {
  need(o, "options");
  nuq::RunConfig c;
  c.model_path = str(o->model_path);
  c.data_path = str(o->data_path);
  c.calib_path = str(o->calib_path);
  c.calib_count = o->calib_count;
  c.data_limit = o->data_limit;
  c.scheme = o->scheme && *o->scheme ? o->scheme : "none";
  c.bits = o->bits;
  c.alloc_path = str(o->alloc_path);
  c.codebook_path = str(o->codebook_path);
  c.baseline_alloc_path = str(o->baseline_alloc_path);
  c.baseline_mib = o->baseline_mib;
  c.qm_bits = o->qm_bits;
  c.f_bits = o->f_bits;
  c.delta = o->delta;
  c.top_k = o->top_k;
  c.out_dir = str(o->out_dir);
  c.search_mode = o->search_mode && *o->search_mode ? o->search_mode : "greedy";
  c.min_bits = o->min_bits;
  c.max_bits = o->max_bits;
  c.preprocess = o->preprocess != 0;
  c.refine = o->refine != 0;
  if (o->shifts) c.shifts.assign(o->shifts, o->shifts + o->shift_count);
  return c;
}

template <class Cmd>
nuq_status run_command(const nuq_run_options* opts, char** report_json, Cmd&& cmd) {
  if (report_json) *report_json = nullptr;
  return guarded([&] {
    try {
      const std::string text = cmd(to_run_config(opts));
      if (report_json) *report_json = copy_string(text);
    } catch (const nuq::VerificationFailure& f) {
      if (report_json) *report_json = copy_string(f.report());
      throw;
    }
  });
}

}  // namespace

extern "C" {

const char* nuq_version(void) { return "0.1.0"; }

const char* nuq_last_error(void) { return last_error.c_str(); }

const char* nuq_status_name(nuq_status status) {
  switch (status) {
    case NUQ_OK: return "ok";
    case NUQ_ERROR_VALIDATION: return "validation error";
    case NUQ_ERROR_PARSE: return "parse error";
    case NUQ_ERROR_RANGE: return "range error";
    case NUQ_ERROR_DIMENSION: return "dimension mismatch";
    case NUQ_ERROR_IO: return "i/o error";
    case NUQ_ERROR_INFEASIBLE: return "infeasible";
    case NUQ_ERROR_VERIFICATION: return "verification failure";
    case NUQ_ERROR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void nuq_string_free(char* s) { std::free(s); }

nuq_status nuq_to_fixed(double x, int q_bits, int f_bits, uint32_t* code) {
  return guarded([&] {
    need(code, "code");
    *code = nuq::to_fixed(x, nuq::FxFormat(q_bits, f_bits));
  });
}

nuq_status nuq_from_fixed(uint32_t code, int q_bits, int f_bits, double* value) {
  return guarded([&] {
    need(value, "value");
    *value = nuq::from_fixed(code, nuq::FxFormat(q_bits, f_bits));
  });
}

nuq_status nuq_enq_quantize(uint64_t x_code, int e_bits, int qm_bits, uint32_t* index) {
  return guarded([&] {
    need(index, "index");
    *index = nuq::enq_quantize(x_code, e_bits, nuq::FxFormat(qm_bits, 0)).index;
  });
}

nuq_status nuq_enq_dequantize(uint32_t index, int e_bits, int qm_bits, uint32_t* code) {
  return guarded([&] {
    need(code, "code");
    *code = nuq::enq_dequantize(nuq::QCode{index, e_bits}, e_bits, nuq::FxFormat(qm_bits, 0));
  });
}

nuq_status nuq_codebooks_load(const char* path, int qm_bits, int f_bits, nuq_codebooks** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = nullptr;
    auto books = std::make_unique<nuq_codebooks>();
    for (auto& cb : nuq::load_codebooks(path, nuq::FxFormat(qm_bits, f_bits))) {
      books->books.push_back(std::make_shared<const nuq::Codebook>(std::move(cb)));
    }
    *out = books.release();
  });
}

void nuq_codebooks_free(nuq_codebooks* books) { delete books; }

size_t nuq_codebooks_count(const nuq_codebooks* books) {
  return books ? books->books.size() : 0;
}

const char* nuq_codebooks_layer(const nuq_codebooks* books, size_t i) {
  if (!books || i >= books->books.size()) return nullptr;
  return books->books[i]->layer().c_str();
}

nuq_status nuq_knq_quantize(const nuq_codebooks* books, const char* layer, uint64_t x_code,
                            uint32_t* index) {
  return guarded([&] {
    need(index, "index");
    *index = nuq::knq_quantize(x_code, find_book(books, layer)).index;
  });
}

nuq_status nuq_knq_dequantize(const nuq_codebooks* books, const char* layer, uint32_t index,
                              uint32_t* code) {
  return guarded([&] {
    need(code, "code");
    const auto& cb = find_book(books, layer);
    *code = nuq::knq_dequantize(nuq::QCode{index, cb.bits()}, cb);
  });
}

nuq_status nuq_hw_qe(uint32_t w1, int shift, int qm_bits, uint32_t* w2) {
  return guarded([&] {
    need(w2, "w2");
    const nuq::hw::EnqUnitConfig cfg({{0, shift}}, nuq::FxFormat(qm_bits, 0));
    *w2 = nuq::hw::qe_unit(w1, 0, cfg).index;
  });
}

nuq_status nuq_hw_ce(uint32_t w2, int shift, int qm_bits, uint32_t* w1) {
  return guarded([&] {
    need(w1, "w1");
    const nuq::hw::EnqUnitConfig cfg({{0, shift}}, nuq::FxFormat(qm_bits, 0));
    *w1 = nuq::hw::ce_unit(nuq::QCode{w2, qm_bits - shift}, 0, cfg);
  });
}

nuq_status nuq_hw_qk(const nuq_codebooks* books, const char* layer, uint32_t w1, uint32_t* w2) {
  return guarded([&] {
    need(w2, "w2");
    *w2 = nuq::hw::qk_unit(w1, nuq::hw::KnqUnitConfig(find_book(books, layer))).index;
  });
}

nuq_status nuq_hw_ck(const nuq_codebooks* books, const char* layer, uint32_t w2, uint32_t* w1) {
  return guarded([&] {
    need(w1, "w1");
    const nuq::hw::KnqUnitConfig cfg(find_book(books, layer));
    *w1 = nuq::hw::ck_unit(nuq::QCode{w2, cfg.output_bits()}, cfg);
  });
}

nuq_status nuq_model_load(const char* path, nuq_model** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = nullptr;
    *out = new nuq_model{nuq::load_model(path)};
  });
}

void nuq_model_free(nuq_model* model) { delete model; }

size_t nuq_model_quantizable_count(const nuq_model* model) {
  return model ? model->graph.quantizable_layers().size() : 0;
}

const char* nuq_model_quantizable_layer(const nuq_model* model, size_t i) {
  if (!model || i >= model->graph.quantizable_layers().size()) return nullptr;
  return model->graph.quantizable_layers()[i].c_str();
}

nuq_status nuq_model_activation_count(const nuq_model* model, const char* layer,
                                      uint64_t* count) {
  return guarded([&] {
    need(model, "model");
    need(layer, "layer");
    need(count, "count");
    const auto* def = model->graph.find(layer);
    if (!def) throw nuq::ValidationError(std::string("unknown layer '") + layer + "'");
    *count = nuq::element_count(def->output_dims);
  });
}

nuq_status nuq_dataset_load(const char* dir, const nuq_model* model, size_t limit,
                            nuq_dataset** out) {
  return guarded([&] {
    need(dir, "dir");
    need(model, "model");
    need(out, "out");
    *out = nullptr;
    *out = new nuq_dataset{nuq::load_dataset(dir, model->graph, limit)};
  });
}

void nuq_dataset_free(nuq_dataset* data) { delete data; }

size_t nuq_dataset_size(const nuq_dataset* data) { return data ? data->data.size() : 0; }

nuq_status nuq_qconfig_create(const nuq_model* model, nuq_qconfig** out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    *out = new nuq_qconfig{&model->graph, nuq::QuantConfig(model->graph.activation_format())};
  });
}

void nuq_qconfig_free(nuq_qconfig* cfg) { delete cfg; }

nuq_status nuq_qconfig_set(nuq_qconfig* cfg, const char* layer, nuq_scheme scheme, int bits,
                           const nuq_codebooks* books) {
  return guarded([&] {
    need(cfg, "cfg");
    need(layer, "layer");
    if (!cfg->model->is_quantizable(layer)) {
      throw nuq::ValidationError(std::string("layer '") + layer + "' is not quantizable");
    }
    nuq::LayerQuantSpec spec;
    switch (scheme) {
      case NUQ_SCHEME_UNIFORM:
        spec = nuq::LayerQuantSpec::uniform(bits, cfg->cfg.master().f_bits());
        break;
      case NUQ_SCHEME_ENQ:
        spec = nuq::LayerQuantSpec::enq(bits);
        break;
      case NUQ_SCHEME_KNQ: {
        need(books, "codebooks");
        std::shared_ptr<const nuq::Codebook> found;
        for (const auto& cb : books->books) {
          if (cb->layer() == layer && cb->bits() == bits) found = cb;
        }
        if (!found) {
          throw nuq::ValidationError("no " + std::to_string(bits) + "-bit codebook for layer '" +
                                     layer + "'");
        }
        spec = nuq::LayerQuantSpec::knq(found);
        break;
      }
      default:
        throw nuq::ValidationError("unknown scheme");
    }
    cfg->cfg.set(layer, spec);
  });
}

nuq_status nuq_forward(const nuq_model* model, const uint16_t* input, size_t input_len,
                       const nuq_qconfig* cfg, int64_t* scores, size_t scores_len) {
  return guarded([&] {
    need(model, "model");
    need(input, "input");
    need(scores, "scores");
    const auto& g = model->graph;
    std::vector<std::uint32_t> codes(input, input + input_len);
    const auto tensor = nuq::Tensor::fixed(g.input_dims(), std::move(codes), g.activation_format());
    const nuq::QuantConfig none(g.activation_format());
    const auto out = nuq::forward(g, tensor, cfg ? cfg->cfg : none);
    if (scores_len != out.size()) {
      throw nuq::DimensionError("scores buffer holds " + std::to_string(scores_len) +
                                " entries, model produces " + std::to_string(out.size()));
    }
    std::copy(out.begin(), out.end(), scores);
  });
}

nuq_status nuq_evaluate(const nuq_model* model, const nuq_dataset* data, const nuq_qconfig* cfg,
                        size_t top_k, double* accuracy) {
  return guarded([&] {
    need(model, "model");
    need(data, "data");
    need(accuracy, "accuracy");
    const nuq::QuantConfig none(model->graph.activation_format());
    *accuracy = nuq::evaluate(model->graph, data->data, cfg ? cfg->cfg : none, top_k);
  });
}

void nuq_run_options_init(nuq_run_options* opts) {
  if (!opts) return;
  std::memset(opts, 0, sizeof(*opts));
  opts->calib_count = 100;
  opts->scheme = "none";
  opts->f_bits = -1;
  opts->delta = 0.02;
  opts->top_k = 1;
  opts->search_mode = "greedy";
  opts->min_bits = 1;
  opts->preprocess = 1;
}

nuq_status nuq_cmd_calibrate(const nuq_run_options* opts, char** report_json) {
  return run_command(opts, report_json, nuq::cmd_calibrate);
}

nuq_status nuq_cmd_eval(const nuq_run_options* opts, char** report_json) {
  return run_command(opts, report_json, nuq::cmd_eval);
}

nuq_status nuq_cmd_search(const nuq_run_options* opts, char** report_json) {
  return run_command(opts, report_json, nuq::cmd_search);
}

nuq_status nuq_cmd_verify_hw(const nuq_run_options* opts, char** report_json) {
  return run_command(opts, report_json, nuq::cmd_verify_hw);
}

nuq_status nuq_cmd_report(const nuq_run_options* opts, char** report_json) {
  return run_command(opts, report_json, nuq::cmd_report);
}

}  // extern "C"

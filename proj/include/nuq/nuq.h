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

/* C interface to the nuq activation-quantization library.
 *
 * Every function returns a nuq_status. On failure, nuq_last_error() returns a
 * thread-local message describing the most recent error on the calling
 * thread. Handles are opaque and owned by the caller; release them with the
 * matching *_free function. Strings returned through char** are released
 * with nuq_string_free.
 */

#ifndef NUQ_NUQ_H_
#define NUQ_NUQ_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(NUQ_BUILDING_LIBRARY)
#    define NUQ_API __declspec(dllexport)
#  else
#    define NUQ_API __declspec(dllimport)
#  endif
#else
#  define NUQ_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum nuq_status {
  NUQ_OK = 0,
  NUQ_ERROR_VALIDATION = 1,
  NUQ_ERROR_PARSE = 2,
  NUQ_ERROR_RANGE = 3,
  NUQ_ERROR_DIMENSION = 4,
  NUQ_ERROR_IO = 5,
  NUQ_ERROR_INFEASIBLE = 6,
  NUQ_ERROR_VERIFICATION = 7,
  NUQ_ERROR_INTERNAL = 8
} nuq_status;

typedef enum nuq_scheme {
  NUQ_SCHEME_UNIFORM = 0,
  NUQ_SCHEME_ENQ = 1,
  NUQ_SCHEME_KNQ = 2
} nuq_scheme;

typedef struct nuq_model nuq_model;
typedef struct nuq_dataset nuq_dataset;
typedef struct nuq_codebooks nuq_codebooks;
typedef struct nuq_qconfig nuq_qconfig;

NUQ_API const char* nuq_version(void);
NUQ_API const char* nuq_last_error(void);
NUQ_API const char* nuq_status_name(nuq_status status);
NUQ_API void nuq_string_free(char* str);

/* Fixed point and quantizers. */
NUQ_API nuq_status nuq_to_fixed(double x, int q_bits, int f_bits, uint32_t* code);
NUQ_API nuq_status nuq_from_fixed(uint32_t code, int q_bits, int f_bits, double* value);
NUQ_API nuq_status nuq_enq_quantize(uint64_t x_code, int e_bits, int qm_bits,
                                    uint32_t* index);
NUQ_API nuq_status nuq_enq_dequantize(uint32_t index, int e_bits, int qm_bits,
                                      uint32_t* code);

/* Codebooks: a table of per-layer KNQ codebooks. */
NUQ_API nuq_status nuq_codebooks_load(const char* path, int qm_bits, int f_bits,
                                      nuq_codebooks** out);
NUQ_API void nuq_codebooks_free(nuq_codebooks* books);
NUQ_API size_t nuq_codebooks_count(const nuq_codebooks* books);
NUQ_API const char* nuq_codebooks_layer(const nuq_codebooks* books, size_t i);
NUQ_API nuq_status nuq_knq_quantize(const nuq_codebooks* books, const char* layer,
                                    uint64_t x_code, uint32_t* index);
NUQ_API nuq_status nuq_knq_dequantize(const nuq_codebooks* books, const char* layer,
                                      uint32_t index, uint32_t* code);

/* Behavioral conversion units. shift is q_m - E for the selected layer. */
NUQ_API nuq_status nuq_hw_qe(uint32_t w1, int shift, int qm_bits, uint32_t* w2);
NUQ_API nuq_status nuq_hw_ce(uint32_t w2, int shift, int qm_bits, uint32_t* w1);
NUQ_API nuq_status nuq_hw_qk(const nuq_codebooks* books, const char* layer, uint32_t w1,
                             uint32_t* w2);
NUQ_API nuq_status nuq_hw_ck(const nuq_codebooks* books, const char* layer, uint32_t w2,
                             uint32_t* w1);

/* Models and datasets. */
NUQ_API nuq_status nuq_model_load(const char* path, nuq_model** out);
NUQ_API void nuq_model_free(nuq_model* model);
NUQ_API size_t nuq_model_quantizable_count(const nuq_model* model);
NUQ_API const char* nuq_model_quantizable_layer(const nuq_model* model, size_t i);
NUQ_API nuq_status nuq_model_activation_count(const nuq_model* model, const char* layer,
                                              uint64_t* count);

NUQ_API nuq_status nuq_dataset_load(const char* dir, const nuq_model* model,
                                    size_t limit, nuq_dataset** out);
NUQ_API void nuq_dataset_free(nuq_dataset* data);
NUQ_API size_t nuq_dataset_size(const nuq_dataset* data);

/* Quantization configs. A new config quantizes nothing. */
NUQ_API nuq_status nuq_qconfig_create(const nuq_model* model, nuq_qconfig** out);
NUQ_API void nuq_qconfig_free(nuq_qconfig* cfg);
/* For NUQ_SCHEME_KNQ, books must hold a `bits`-bit codebook for layer. For
 * NUQ_SCHEME_UNIFORM the master format's fractional bits are used. */
NUQ_API nuq_status nuq_qconfig_set(nuq_qconfig* cfg, const char* layer, nuq_scheme scheme,
                                   int bits, const nuq_codebooks* books);

NUQ_API nuq_status nuq_forward(const nuq_model* model, const uint16_t* input,
                               size_t input_len, const nuq_qconfig* cfg,
                               int64_t* scores, size_t scores_len);
NUQ_API nuq_status nuq_evaluate(const nuq_model* model, const nuq_dataset* data,
                                const nuq_qconfig* cfg, size_t top_k, double* accuracy);

/* Commands. Optional string fields may be NULL or empty. */
typedef struct nuq_run_options {
  const char* model_path;
  const char* data_path;
  const char* calib_path;
  size_t calib_count;
  size_t data_limit;
  const char* scheme;
  int bits;
  const char* alloc_path;
  const char* codebook_path;
  const char* baseline_alloc_path;
  double baseline_mib;
  int qm_bits;
  int f_bits;
  double delta;
  size_t top_k;
  const char* out_dir;
  const char* search_mode;
  int min_bits;
  int max_bits;
  int preprocess;
  int refine;
  const int* shifts;
  size_t shift_count;
} nuq_run_options;

/* Fills defaults (calib_count 100, scheme "none", f_bits -1, delta 0.02,
 * top_k 1, search_mode "greedy", min_bits 1, preprocess 1). */
NUQ_API void nuq_run_options_init(nuq_run_options* opts);

/* On success *report_json (if non-NULL) receives the command's JSON report.
 * verify-hw also returns its report when it fails with
 * NUQ_ERROR_VERIFICATION. */
NUQ_API nuq_status nuq_cmd_calibrate(const nuq_run_options* opts, char** report_json);
NUQ_API nuq_status nuq_cmd_eval(const nuq_run_options* opts, char** report_json);
NUQ_API nuq_status nuq_cmd_search(const nuq_run_options* opts, char** report_json);
NUQ_API nuq_status nuq_cmd_verify_hw(const nuq_run_options* opts, char** report_json);
NUQ_API nuq_status nuq_cmd_report(const nuq_run_options* opts, char** report_json);

#ifdef __cplusplus
}
#endif

#endif  // NUQ_NUQ_H_

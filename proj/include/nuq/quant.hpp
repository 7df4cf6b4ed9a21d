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

// Uniform, equal-distance nonuniform (ENQ) and K-means codebook (KNQ)
// activation quantizers as code <-> value mappings.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "nuq/fxcore.hpp"

namespace nuq {

enum class Scheme { Uniform, Enq, Knq };

const char* to_string(Scheme scheme) noexcept;
/// Accepts "uniform", "enq", "knq". Throws ValidationError otherwise.
Scheme parse_scheme(std::string_view text);

/// Per-layer ascending table of 2^bits activation codes in q_m format.
///
/// Entries are the centroid values d_k. The lookup in knq_quantize treats
/// them as closed-left interval boundaries. Entries may repeat (a K-means fit
/// on a sample with fewer distinct values than clusters) and may exceed the
/// q_m maximum code; they are bounded only by the 16-bit storage lane.
class Codebook {
 public:
  Codebook(std::string layer, int bits, std::vector<std::uint32_t> entries,
           FxFormat format);

  const std::string& layer() const noexcept { return layer_; }
  int bits() const noexcept { return bits_; }
  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<std::uint32_t>& entries() const noexcept { return entries_; }
  std::uint32_t entry(std::size_t k) const;
  const FxFormat& format() const noexcept { return format_; }

  friend bool operator==(const Codebook&, const Codebook&) = default;

 private:
  std::string layer_;
  int bits_;
  std::vector<std::uint32_t> entries_;
  FxFormat format_;
};

using CodebookPtr = std::shared_ptr<const Codebook>;

/// Scheme and width for one layer. `bits` is q for uniform, E for ENQ, T for
/// KNQ. Uniform keeps its own fractional bit count; KNQ carries its codebook.
struct LayerQuantSpec {
  Scheme scheme = Scheme::Uniform;
  int bits = 0;
  int f_bits = 0;
  CodebookPtr codebook;

  static LayerQuantSpec uniform(int bits, int f_bits);
  static LayerQuantSpec enq(int bits);
  static LayerQuantSpec knq(CodebookPtr codebook);

  /// Checks bits >= 1, ENQ bits <= q_m, KNQ codebook size == 2^bits.
  void validate(const FxFormat& master) const;
};

// Uniform quantization: the code is to_fixed(x, fmt).
QCode uniform_quantize(double x, FxFormat fmt);

/// floor(x / 2^(q_m - E)), saturated to 2^E - 1. E may be 0..q_m.
QCode enq_quantize(std::uint64_t x_code, int e_bits, FxFormat master);
/// k * 2^(q_m - E).
std::uint32_t enq_dequantize(QCode k, int e_bits, FxFormat master);

/// Largest k with d_k <= x; codes below d_0 map to 0.
QCode knq_quantize(std::uint64_t x_code, const Codebook& cb);
std::uint32_t knq_dequantize(QCode k, const Codebook& cb);

/// Experimental: index of the centroid nearest to x (ties to the lower
/// index). Not used by inference; kept for comparison against the interval
/// rule.
QCode knq_quantize_nearest(std::uint64_t x_code, const Codebook& cb);

/// Quantize-then-dequantize of one activation code through `spec`. The input
/// and output are codes at the master format's fractional bits.
std::int64_t requantize(std::int64_t x_code, const LayerQuantSpec& spec,
                        const FxFormat& master);

// Codebook text tables: one `layer,bits,d_0,...,d_{2^T-1}` row per layer.
// Blank lines and lines starting with '#' are ignored; an optional
// `layer,bits,...` header row is skipped.
std::vector<Codebook> read_codebooks(std::istream& in, FxFormat master);
std::vector<Codebook> load_codebooks(const std::string& path, FxFormat master);
void write_codebooks(std::ostream& out, const std::vector<Codebook>& books);
void save_codebooks(const std::string& path, const std::vector<Codebook>& books);

}  // namespace nuq

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

#include "nuq/quant.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "nuq/error.hpp"

namespace nuq {

const char* to_string(Scheme scheme) noexcept {
  switch (scheme) {
    case Scheme::Uniform: return "uniform";
    case Scheme::Enq: return "enq";
    case Scheme::Knq: return "knq";
  }
  return "unknown";
}

Scheme parse_scheme(std::string_view text) {
  if (text == "uniform") return Scheme::Uniform;
  if (text == "enq") return Scheme::Enq;
  if (text == "knq") return Scheme::Knq;
  throw ValidationError("unknown quantization scheme '" + std::string(text) + "'");
}

Codebook::Codebook(std::string layer, int bits, std::vector<std::uint32_t> entries,
                   FxFormat format)
    : layer_(std::move(layer)), bits_(bits), entries_(std::move(entries)), format_(format) {
  const std::string where = "codebook '" + layer_ + "': ";
  if (bits_ < 1 || bits_ > 16) {
    throw ValidationError(where + "bits must be in [1, 16], got " + std::to_string(bits_));
  }
  if (entries_.size() != (std::size_t{1} << bits_)) {
    throw ValidationError(where + "expected " + std::to_string(1u << bits_) +
                          " entries, got " + std::to_string(entries_.size()));
  }
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    if (entries_[k] > 0xFFFFu) {
      throw ValidationError(where + "entry d_" + std::to_string(k) +
                            " exceeds the 16-bit storage lane");
    }
    if (k > 0 && entries_[k] < entries_[k - 1]) {
      throw ValidationError(where + "entries must be non-decreasing (d_" +
                            std::to_string(k) + " < d_" + std::to_string(k - 1) + ")");
    }
  }
}

std::uint32_t Codebook::entry(std::size_t k) const {
  if (k >= entries_.size()) {
    throw RangeError("codebook '" + layer_ + "': index " + std::to_string(k) +
                     " out of range");
  }
  return entries_[k];
}

LayerQuantSpec LayerQuantSpec::uniform(int bits, int f_bits) {
  return LayerQuantSpec{Scheme::Uniform, bits, f_bits, nullptr};
}

LayerQuantSpec LayerQuantSpec::enq(int bits) {
  return LayerQuantSpec{Scheme::Enq, bits, 0, nullptr};
}

LayerQuantSpec LayerQuantSpec::knq(CodebookPtr codebook) {
  if (!codebook) throw ValidationError("knq spec needs a codebook");
  const int bits = codebook->bits();
  return LayerQuantSpec{Scheme::Knq, bits, 0, std::move(codebook)};
}

void LayerQuantSpec::validate(const FxFormat& master) const {
  if (bits < 1) throw ValidationError("quantization bits must be >= 1");
  switch (scheme) {
    case Scheme::Uniform:
      FxFormat(bits, f_bits);  // throws on a bad format
      break;
    case Scheme::Enq:
      if (bits > master.q_bits()) {
        throw ValidationError("ENQ bits " + std::to_string(bits) + " exceed q_m = " +
                              std::to_string(master.q_bits()));
      }
      break;
    case Scheme::Knq:
      if (!codebook) throw ValidationError("KNQ spec without a codebook");
      if (codebook->bits() != bits) {
        throw ValidationError("KNQ spec bits " + std::to_string(bits) +
                              " disagree with codebook '" + codebook->layer() + "' (" +
                              std::to_string(codebook->bits()) + " bits)");
      }
      break;
  }
}

QCode uniform_quantize(double x, FxFormat fmt) {
  return QCode{to_fixed(x, fmt), fmt.q_bits()};
}

namespace {

void check_enq_bits(int e_bits, const FxFormat& master) {
  if (e_bits < 0 || e_bits > master.q_bits()) {
    throw ValidationError("ENQ bits " + std::to_string(e_bits) + " outside [0, " +
                          std::to_string(master.q_bits()) + "]");
  }
}

}  // namespace

QCode enq_quantize(std::uint64_t x_code, int e_bits, FxFormat master) {
  check_enq_bits(e_bits, master);
  const int shift = master.q_bits() - e_bits;
  const std::uint64_t top = (std::uint64_t{1} << e_bits) - 1;
  const std::uint64_t index = x_code > master.max_code() ? top : (x_code >> shift);
  return QCode{static_cast<std::uint32_t>(std::min(index, top)), e_bits};
}

std::uint32_t enq_dequantize(QCode k, int e_bits, FxFormat master) {
  check_enq_bits(e_bits, master);
  if (k.index >= (std::uint64_t{1} << e_bits)) {
    throw RangeError("ENQ code " + std::to_string(k.index) + " does not fit in " +
                     std::to_string(e_bits) + " bits");
  }
  return k.index << (master.q_bits() - e_bits);
}

QCode knq_quantize(std::uint64_t x_code, const Codebook& cb) {
  const auto& d = cb.entries();
  // First entry strictly greater than x; the interval [d_k, d_{k+1}) holding
  // x is the one just before it.
  const auto it = std::upper_bound(d.begin(), d.end(), x_code,
                                   [](std::uint64_t x, std::uint32_t e) { return x < e; });
  const auto pos = static_cast<std::uint32_t>(it - d.begin());
  return QCode{pos == 0 ? 0u : pos - 1u, cb.bits()};
}

std::uint32_t knq_dequantize(QCode k, const Codebook& cb) {
  return cb.entry(k.index);
}

QCode knq_quantize_nearest(std::uint64_t x_code, const Codebook& cb) {
  const auto& d = cb.entries();
  std::uint32_t best = 0;
  std::uint64_t best_dist = ~std::uint64_t{0};
  for (std::uint32_t k = 0; k < d.size(); ++k) {
    const std::uint64_t dist = x_code > d[k] ? x_code - d[k] : d[k] - x_code;
    if (dist < best_dist) {
      best_dist = dist;
      best = k;
    }
  }
  return QCode{best, cb.bits()};
}

std::int64_t requantize(std::int64_t x_code, const LayerQuantSpec& spec,
                        const FxFormat& master) {
  const std::uint64_t x = x_code < 0 ? 0 : static_cast<std::uint64_t>(x_code);
  switch (spec.scheme) {
    case Scheme::Uniform: {
      const FxFormat fmt(spec.bits, spec.f_bits);
      const double value = std::ldexp(static_cast<double>(x), -master.f_bits());
      const std::uint32_t code = to_fixed(value, fmt);
      // Back onto the master grid, rounding half up when the uniform format
      // is finer.
      const double back = std::ldexp(static_cast<double>(code),
                                     master.f_bits() - fmt.f_bits());
      return static_cast<std::int64_t>(std::floor(back + 0.5));
    }
    case Scheme::Enq:
      return enq_dequantize(enq_quantize(x, spec.bits, master), spec.bits, master);
    case Scheme::Knq:
      return knq_dequantize(knq_quantize(x, *spec.codebook), *spec.codebook);
  }
  return x_code;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  return out;
}

std::uint64_t parse_uint(const std::string& s, const std::string& where) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw ParseError(where + ": expected a non-negative integer, got '" + s + "'");
  }
  try {
    return std::stoull(s);
  } catch (const std::exception&) {
    throw ParseError(where + ": integer out of range '" + s + "'");
  }
}

}  // namespace

std::vector<Codebook> read_codebooks(std::istream& in, FxFormat master) {
  std::vector<Codebook> books;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto cells = split_csv(t);
    if (cells.size() >= 2 && cells[0] == "layer" && cells[1] == "bits") continue;
    const std::string where = "codebook line " + std::to_string(line_no);
    if (cells.size() < 3) throw ParseError(where + ": too few columns");
    const auto bits = parse_uint(cells[1], where);
    if (bits < 1 || bits > 16) throw ParseError(where + ": bits out of range");
    std::vector<std::uint32_t> entries;
    for (std::size_t i = 2; i < cells.size(); ++i) {
      entries.push_back(static_cast<std::uint32_t>(
          std::min<std::uint64_t>(parse_uint(cells[i], where), 0xFFFFFFFFull)));
    }
    books.emplace_back(cells[0], static_cast<int>(bits), std::move(entries), master);
  }
  return books;
}

std::vector<Codebook> load_codebooks(const std::string& path, FxFormat master) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open codebook file '" + path + "'");
  return read_codebooks(in, master);
}

void write_codebooks(std::ostream& out, const std::vector<Codebook>& books) {
  for (const auto& cb : books) {
    out << cb.layer() << ',' << cb.bits();
    for (auto d : cb.entries()) out << ',' << d;
    out << '\n';
  }
}

void save_codebooks(const std::string& path, const std::vector<Codebook>& books) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write codebook file '" + path + "'");
  write_codebooks(out, books);
}

}  // namespace nuq

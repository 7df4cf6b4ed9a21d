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

#include "nuq/fxcore.hpp"

#include <cmath>
#include <sstream>

#include "nuq/error.hpp"
#include "nuq/quant.hpp"

namespace nuq {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Range: return "range";
    case ErrorKind::DimensionMismatch: return "dimension-mismatch";
    case ErrorKind::Io: return "io";
    case ErrorKind::Infeasible: return "infeasible";
    case ErrorKind::Verification: return "verification";
  }
  return "unknown";
}

FxFormat::FxFormat(int q_bits, int f_bits) : q_bits_(q_bits), f_bits_(f_bits) {
  if (q_bits < 1 || q_bits > kMaxBits) {
    throw ValidationError("fixed-point format: q_bits must be in [1, 16], got " +
                          std::to_string(q_bits));
  }
  if (f_bits < 0 || f_bits >= q_bits) {
    throw ValidationError("fixed-point format: f_bits must be in [0, q_bits), got " +
                          std::to_string(f_bits) + " with q_bits " +
                          std::to_string(q_bits));
  }
}

double FxFormat::max_value() const noexcept {
  return std::ldexp(static_cast<double>(max_code()), -f_bits_);
}

double FxFormat::resolution() const noexcept { return std::ldexp(1.0, -f_bits_); }

QCode make_qcode(std::uint64_t index, int width) {
  if (width < 0 || width > 32) {
    throw RangeError("code width out of range: " + std::to_string(width));
  }
  const std::uint64_t limit = width == 32 ? 0xFFFFFFFFull : (1ull << width) - 1ull;
  if (index > limit) {
    throw RangeError("code " + std::to_string(index) + " does not fit in " +
                     std::to_string(width) + " bits");
  }
  return QCode{static_cast<std::uint32_t>(index), width};
}

std::uint32_t to_fixed(double x, FxFormat fmt) {
  if (!(x >= 0.0)) {
    throw ValidationError("to_fixed: value must be non-negative");
  }
  const double scaled = std::ldexp(x, fmt.f_bits());
  const double max = static_cast<double>(fmt.max_code());
  if (scaled >= max) return fmt.max_code();
  return static_cast<std::uint32_t>(std::floor(scaled + 0.5));
}

double from_fixed(std::uint64_t code, FxFormat fmt) {
  if (code > fmt.max_code()) {
    std::ostringstream msg;
    msg << "from_fixed: code " << code << " outside [0, " << fmt.max_code() << "]";
    throw RangeError(msg.str());
  }
  return std::ldexp(static_cast<double>(code), -fmt.f_bits());
}

int storage_bits(int bits) noexcept {
  if (bits <= 8) return 8;
  if (bits <= 16) return 16;
  if (bits <= 32) return 32;
  return 64;
}

std::size_t element_count(const Shape& dims) noexcept {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

namespace {

void check_dims(const Shape& dims, std::size_t n) {
  for (auto d : dims) {
    if (d == 0) throw DimensionError("tensor extents must be positive");
  }
  if (element_count(dims) != n) {
    throw DimensionError("tensor holds " + std::to_string(n) + " values but its dims need " +
                         std::to_string(element_count(dims)));
  }
}

}  // namespace

Tensor Tensor::reals(Shape dims, std::vector<double> values) {
  check_dims(dims, values.size());
  for (double v : values) {
    if (!(v >= 0.0)) throw RangeError("real tensor values must be non-negative");
  }
  Tensor t;
  t.dims_ = std::move(dims);
  t.kind_ = RealStorage{};
  t.reals_ = std::move(values);
  return t;
}

Tensor Tensor::fixed(Shape dims, std::vector<std::uint32_t> codes, FxFormat fmt) {
  check_dims(dims, codes.size());
  for (auto c : codes) {
    if (c > fmt.max_code()) {
      throw RangeError("tensor code " + std::to_string(c) + " exceeds " +
                       std::to_string(fmt.q_bits()) + "-bit range");
    }
  }
  Tensor t;
  t.dims_ = std::move(dims);
  t.kind_ = FixedStorage{fmt};
  t.codes_ = std::move(codes);
  return t;
}

Tensor Tensor::coded(Shape dims, std::vector<std::uint32_t> codes,
                     std::shared_ptr<const Codebook> codebook) {
  if (!codebook) throw ValidationError("coded tensor needs a codebook");
  check_dims(dims, codes.size());
  for (auto c : codes) {
    if (c >= codebook->size()) {
      throw RangeError("tensor code " + std::to_string(c) + " exceeds codebook size");
    }
  }
  Tensor t;
  t.dims_ = std::move(dims);
  t.kind_ = CodebookStorage{std::move(codebook)};
  t.codes_ = std::move(codes);
  return t;
}

std::span<const double> Tensor::real_values() const {
  if (!is_real()) throw ValidationError("tensor does not hold real values");
  return reals_;
}

std::span<const std::uint32_t> Tensor::codes() const {
  if (is_real()) throw ValidationError("tensor does not hold codes");
  return codes_;
}

}  // namespace nuq

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

// Unsigned fixed-point formats, quantization codes and dense tensors.

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <variant>
#include <vector>

namespace nuq {

/// Unsigned fixed-point format: `q_bits` total bits, `f_bits` of them
/// fractional. Code c stands for the value c * 2^-f_bits.
class FxFormat {
 public:
  static constexpr int kMaxBits = 16;

  FxFormat() = default;
  /// Throws ValidationError unless 1 <= q_bits <= 16 and 0 <= f_bits < q_bits.
  FxFormat(int q_bits, int f_bits);

  int q_bits() const noexcept { return q_bits_; }
  int f_bits() const noexcept { return f_bits_; }

  /// 2^q - 1, the largest code.
  std::uint32_t max_code() const noexcept { return (1u << q_bits_) - 1u; }
  /// (2^q - 1) * 2^-F, the largest representable value.
  double max_value() const noexcept;
  /// 2^-F.
  double resolution() const noexcept;

  friend bool operator==(const FxFormat&, const FxFormat&) = default;

 private:
  int q_bits_ = 12;
  int f_bits_ = 0;
};

/// A quantization point index stored in `width` bits.
struct QCode {
  std::uint32_t index = 0;
  int width = 0;

  friend bool operator==(const QCode&, const QCode&) = default;
};

/// Builds a QCode, checking 0 <= index <= 2^width - 1.
QCode make_qcode(std::uint64_t index, int width);

/// clamp(round_half_up(x * 2^F), 0, 2^q - 1). Requires x >= 0.
std::uint32_t to_fixed(double x, FxFormat fmt);

/// code * 2^-F. Throws RangeError for codes outside [0, 2^q - 1].
double from_fixed(std::uint64_t code, FxFormat fmt);

/// Round-half-up of value / 2^shift on a signed integer (floor(v/2^s + 1/2)).
constexpr std::int64_t round_shift_right(std::int64_t value, int shift) noexcept {
  if (shift <= 0) return value;
  return (value + (std::int64_t{1} << (shift - 1))) >> shift;
}

/// Smallest standard unsigned storage width, in bits, that holds a code of
/// `bits` logical bits.
int storage_bits(int bits) noexcept;

class Codebook;

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& dims) noexcept;

struct RealStorage {};
struct FixedStorage {
  FxFormat format;
};
struct CodebookStorage {
  std::shared_ptr<const Codebook> codebook;
};

/// Storage kind of a tensor's elements.
using StorageKind = std::variant<RealStorage, FixedStorage, CodebookStorage>;

/// Dense row-major tensor holding either non-negative reals or integer codes.
class Tensor {
 public:
  Tensor() = default;

  static Tensor reals(Shape dims, std::vector<double> values);
  static Tensor fixed(Shape dims, std::vector<std::uint32_t> codes, FxFormat fmt);
  static Tensor coded(Shape dims, std::vector<std::uint32_t> codes,
                      std::shared_ptr<const Codebook> codebook);

  const Shape& dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return element_count(dims_); }
  const StorageKind& kind() const noexcept { return kind_; }

  bool is_real() const noexcept { return std::holds_alternative<RealStorage>(kind_); }
  std::span<const double> real_values() const;
  std::span<const std::uint32_t> codes() const;

 private:
  Shape dims_;
  StorageKind kind_;
  std::vector<double> reals_;
  std::vector<std::uint32_t> codes_;
};

}  // namespace nuq

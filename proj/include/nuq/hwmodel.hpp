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

// Behavioral models of the activation conversion units:
//   QE  q_m-bit code -> ENQ point (layer-selected right shift)
//   CE  ENQ point -> q_m-bit code (layer-selected left shift)
//   QK  q_m-bit code -> KNQ point (comparator bank + priority encoder)
//   CK  KNQ point -> centroid code (multiplexer)
// Each unit is bit-exact against the algorithmic quantizer it implements.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nuq/fxcore.hpp"
#include "nuq/quant.hpp"

namespace nuq::hw {

class EnqUnitConfig {
 public:
  /// `shift_table` maps layer index to q_m - E_i. Shifts must lie in [0, q_m].
  EnqUnitConfig(std::map<int, int> shift_table, FxFormat master);

  /// Number of distinct shift amounts (mux inputs).
  int distinct_shifts() const noexcept { return static_cast<int>(amounts_.size()); }
  const std::vector<int>& shift_amounts() const noexcept { return amounts_; }
  const FxFormat& master() const noexcept { return master_; }

  /// DEC1: one-hot select over the distinct shift amounts.
  std::vector<bool> decode(int l_idx) const;
  int shift_for(int l_idx) const;

 private:
  std::map<int, int> select_;  // layer index -> mux input
  std::vector<int> amounts_;
  FxFormat master_;
};

/// Right shift through log2 mux stages.
std::uint32_t barrel_shift_right(std::uint32_t value, int amount, int width);
std::uint32_t barrel_shift_left(std::uint32_t value, int amount, int width);

QCode qe_unit(std::uint32_t w1, int l_idx, const EnqUnitConfig& cfg);
std::uint32_t ce_unit(QCode w2, int l_idx, const EnqUnitConfig& cfg);

class KnqUnitConfig {
 public:
  /// Throws ValidationError unless centroids are ascending and M = 2^T.
  explicit KnqUnitConfig(std::vector<std::uint32_t> centroids);
  explicit KnqUnitConfig(const Codebook& cb) : KnqUnitConfig(cb.entries()) {}

  const std::vector<std::uint32_t>& centroids() const noexcept { return centroids_; }
  int output_bits() const noexcept { return bits_; }

 private:
  std::vector<std::uint32_t> centroids_;
  int bits_ = 0;
};

/// The M comparator outputs (w1 >= d_k), index k at position k.
std::vector<bool> comparator_bank(std::uint32_t w1, const KnqUnitConfig& cfg);
/// DEC2: highest asserted line, 0 when none is asserted.
std::uint32_t priority_encode(const std::vector<bool>& lines);

QCode qk_unit(std::uint32_t w1, const KnqUnitConfig& cfg);
std::uint32_t ck_unit(QCode w2, const KnqUnitConfig& cfg);

/// One disagreement between a unit and its quantizer.
struct Mismatch {
  std::string unit;
  std::string config;
  std::uint64_t input = 0;
  std::uint64_t hw = 0;
  std::uint64_t sw = 0;
};

struct EquivalenceReport {
  std::uint64_t checks = 0;
  std::vector<Mismatch> mismatches;  // capped
  bool passed() const noexcept { return mismatches.empty(); }
};

/// QE/CE against enq_quantize/enq_dequantize over all q_m-bit inputs, one
/// single-layer unit per shift amount.
EquivalenceReport verify_enq_units(FxFormat master, const std::vector<int>& shifts);
/// QK/CK against knq_quantize/knq_dequantize over all q_m-bit inputs.
EquivalenceReport verify_knq_units(FxFormat master, const std::vector<Codebook>& books);

}  // namespace nuq::hw

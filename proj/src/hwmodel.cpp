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

#include "nuq/hwmodel.hpp"

#include <algorithm>

#include "nuq/error.hpp"

namespace nuq::hw {

EnqUnitConfig::EnqUnitConfig(std::map<int, int> shift_table, FxFormat master)
    : master_(master) {
  if (shift_table.empty()) throw ValidationError("ENQ unit: empty shift table");
  for (const auto& [l_idx, shift] : shift_table) {
    if (shift < 0 || shift > master.q_bits()) {
      throw ValidationError("ENQ unit: shift " + std::to_string(shift) + " for layer " +
                            std::to_string(l_idx) + " outside [0, q_m]");
    }
    if (std::find(amounts_.begin(), amounts_.end(), shift) == amounts_.end()) {
      amounts_.push_back(shift);
    }
  }
  std::sort(amounts_.begin(), amounts_.end());
  for (const auto& [l_idx, shift] : shift_table) {
    select_[l_idx] = static_cast<int>(
        std::find(amounts_.begin(), amounts_.end(), shift) - amounts_.begin());
  }
}

std::vector<bool> EnqUnitConfig::decode(int l_idx) const {
  const auto it = select_.find(l_idx);
  if (it == select_.end()) {
    throw ValidationError("ENQ unit: unknown layer index " + std::to_string(l_idx));
  }
  std::vector<bool> onehot(amounts_.size(), false);
  onehot[static_cast<std::size_t>(it->second)] = true;
  return onehot;
}

int EnqUnitConfig::shift_for(int l_idx) const {
  // C-input mux driven by the one-hot select.
  const auto sel = decode(l_idx);
  int a = 0;
  for (std::size_t i = 0; i < sel.size(); ++i) {
    if (sel[i]) a |= amounts_[i];
  }
  return a;
}

namespace {

std::uint32_t mask(int width) {
  return width >= 32 ? 0xFFFFFFFFu : (1u << width) - 1u;
}

int stages_for(int width) {
  int s = 0;
  while ((1 << s) <= width) ++s;
  return s;
}

}  // namespace

std::uint32_t barrel_shift_right(std::uint32_t value, int amount, int width) {
  std::uint32_t v = value & mask(width);
  // Stage s shifts by 2^s when bit s of the amount is set.
  for (int s = 0; s < stages_for(width); ++s) {
    if ((amount >> s) & 1) v = (1 << s) >= width ? 0u : (v >> (1 << s));
  }
  return v;
}

std::uint32_t barrel_shift_left(std::uint32_t value, int amount, int width) {
  std::uint32_t v = value & mask(width);
  for (int s = 0; s < stages_for(width); ++s) {
    if ((amount >> s) & 1) v = (1 << s) >= width ? 0u : ((v << (1 << s)) & mask(width));
  }
  return v;
}

QCode qe_unit(std::uint32_t w1, int l_idx, const EnqUnitConfig& cfg) {
  const int qm = cfg.master().q_bits();
  const int a = cfg.shift_for(l_idx);
  const int e = qm - a;
  // Inputs wider than q_m bits saturate to the all-ones output code.
  const bool overflow = (w1 & ~mask(qm)) != 0;
  const std::uint32_t shifted = barrel_shift_right(w1, a, qm);
  return QCode{overflow ? mask(e) : shifted, e};
}

std::uint32_t ce_unit(QCode w2, int l_idx, const EnqUnitConfig& cfg) {
  const int qm = cfg.master().q_bits();
  const int a = cfg.shift_for(l_idx);
  if ((w2.index & ~mask(qm - a)) != 0) {
    throw RangeError("CE unit: input " + std::to_string(w2.index) + " wider than " +
                     std::to_string(qm - a) + " bits");
  }
  return barrel_shift_left(w2.index, a, qm);
}

KnqUnitConfig::KnqUnitConfig(std::vector<std::uint32_t> centroids)
    : centroids_(std::move(centroids)) {
  const std::size_t m = centroids_.size();
  if (m < 2 || (m & (m - 1)) != 0) {
    throw ValidationError("KNQ unit: centroid count must be a power of two >= 2, got " +
                          std::to_string(m));
  }
  if (!std::is_sorted(centroids_.begin(), centroids_.end())) {
    throw ValidationError("KNQ unit: centroids must be ascending");
  }
  while ((std::size_t{1} << bits_) < m) ++bits_;
}

std::vector<bool> comparator_bank(std::uint32_t w1, const KnqUnitConfig& cfg) {
  const auto& d = cfg.centroids();
  std::vector<bool> lines(d.size());
  for (std::size_t k = 0; k < d.size(); ++k) lines[k] = w1 >= d[k];
  return lines;
}

std::uint32_t priority_encode(const std::vector<bool>& lines) {
  for (std::size_t k = lines.size(); k-- > 0;) {
    if (lines[k]) return static_cast<std::uint32_t>(k);
  }
  return 0;
}

QCode qk_unit(std::uint32_t w1, const KnqUnitConfig& cfg) {
  return QCode{priority_encode(comparator_bank(w1, cfg)), cfg.output_bits()};
}

std::uint32_t ck_unit(QCode w2, const KnqUnitConfig& cfg) {
  const auto& d = cfg.centroids();
  if (w2.index >= d.size()) {
    throw RangeError("CK unit: select " + std::to_string(w2.index) + " exceeds " +
                     std::to_string(d.size()) + " inputs");
  }
  return d[w2.index];
}

namespace {

constexpr std::size_t kMaxReportedMismatches = 16;

void record(EquivalenceReport& r, Mismatch m) {
  if (r.mismatches.size() < kMaxReportedMismatches) r.mismatches.push_back(std::move(m));
}

}  // namespace

EquivalenceReport verify_enq_units(FxFormat master, const std::vector<int>& shifts) {
  EquivalenceReport r;
  const std::uint32_t n = master.max_code() + 1u;
  for (int shift : shifts) {
    const EnqUnitConfig cfg({{0, shift}}, master);
    const int e = master.q_bits() - shift;
    const std::string name = "shift=" + std::to_string(shift);
    for (std::uint32_t w1 = 0; w1 < n; ++w1) {
      ++r.checks;
      const auto hw = qe_unit(w1, 0, cfg);
      const auto sw = enq_quantize(w1, e, master);
      if (!(hw == sw)) record(r, {"QE", name, w1, hw.index, sw.index});
    }
    for (std::uint32_t k = 0; k < (1u << e); ++k) {
      ++r.checks;
      const auto hw = ce_unit(QCode{k, e}, 0, cfg);
      const auto sw = enq_dequantize(QCode{k, e}, e, master);
      if (hw != sw) record(r, {"CE", name, k, hw, sw});
    }
  }
  return r;
}

EquivalenceReport verify_knq_units(FxFormat master, const std::vector<Codebook>& books) {
  EquivalenceReport r;
  const std::uint32_t n = master.max_code() + 1u;
  for (const auto& cb : books) {
    const KnqUnitConfig cfg(cb);
    for (std::uint32_t w1 = 0; w1 < n; ++w1) {
      ++r.checks;
      const auto hw = qk_unit(w1, cfg);
      const auto sw = knq_quantize(w1, cb);
      if (!(hw == sw)) record(r, {"QK", cb.layer(), w1, hw.index, sw.index});
    }
    for (std::uint32_t k = 0; k < cb.size(); ++k) {
      ++r.checks;
      const auto hw = ck_unit(QCode{k, cb.bits()}, cfg);
      const auto sw = knq_dequantize(QCode{k, cb.bits()}, cb);
      if (hw != sw) record(r, {"CK", cb.layer(), k, hw, sw});
    }
  }
  return r;
}

}  // namespace nuq::hw

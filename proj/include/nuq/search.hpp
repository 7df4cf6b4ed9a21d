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

// Bit-width selection against an accuracy budget.

#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "nuq/calib.hpp"
#include "nuq/footprint.hpp"
#include "nuq/netgraph.hpp"
#include "nuq/quant.hpp"

namespace nuq {

/// Accept an accuracy a when reference_accuracy - a <= delta.
struct SearchBudget {
  double delta = 0.01;
  double reference_accuracy = 1.0;
  std::size_t top_k = 1;

  void validate() const;
  bool accepts(double accuracy) const noexcept;
};

struct BitAllocation {
  Scheme scheme = Scheme::Enq;
  std::vector<std::pair<std::string, int>> bits;  // chain order
  double achieved_accuracy = 0.0;

  BitMap bit_map() const;
  std::optional<int> bits_for(const std::string& layer) const;
};

// Allocation file: '#' summary lines (achieved_accuracy, delta, ...), a
// `layer,scheme,bits` header and one row per layer.
struct AllocationFile {
  std::vector<std::pair<std::string, LayerQuantSpec>> rows;  // codebooks unresolved
  std::map<std::string, std::string> summary;
};

AllocationFile read_allocation(std::istream& in);
AllocationFile load_allocation(const std::string& path);
void write_allocation(std::ostream& out, const BitAllocation& alloc,
                      const std::map<std::string, std::string>& summary);
void save_allocation(const std::string& path, const BitAllocation& alloc,
                     const std::map<std::string, std::string>& summary);
BitMap bit_map(const AllocationFile& file);

/// Memoized evaluate() keyed by the configuration's (layer, scheme, bits)
/// tuple. Thread-safe.
class EvalCache {
 public:
  EvalCache(const ModelGraph& model, const Dataset& data, std::size_t top_k);

  double accuracy(const QuantConfig& cfg);
  std::size_t evaluations() const noexcept { return evaluations_; }

 private:
  const ModelGraph& model_;
  const Dataset& data_;
  std::size_t top_k_;
  std::map<std::string, double> memo_;
  std::mutex mutex_;
  std::size_t evaluations_ = 0;
};

struct UniformSweep {
  std::optional<int> q_min;                    // q'
  std::vector<std::pair<int, double>> table;   // (q, accuracy), q descending
};

/// Smallest q in [q_lo, q_hi] whose uniform(q, F) accuracy meets the budget.
UniformSweep find_min_uniform_q(const ModelGraph& model, const Dataset& data,
                                const SearchBudget& budget, int q_lo, int q_hi,
                                int f_bits);

enum class SearchMode { Exhaustive, Greedy };
SearchMode parse_search_mode(std::string_view text);

struct EnqSearchOptions {
  SearchMode mode = SearchMode::Greedy;
  int min_bits = 1;
  int max_bits = 0;               // 0: q_m
  std::size_t exhaustive_layer_cap = 6;
};

/// Minimal-footprint per-layer ENQ widths with reference - accuracy <= delta.
/// Throws InfeasibleError when even q_m bits everywhere misses the budget.
BitAllocation search_enq_allocation(const ModelGraph& model, const Dataset& data,
                                    const SearchBudget& budget,
                                    const EnqSearchOptions& options = {});

using CodebookSource = std::function<CodebookPtr(const std::string& layer, int bits)>;

struct KnqSearchOptions {
  int min_bits = 1;
  int max_bits = 8;
  bool per_layer_refine = false;
};

struct KnqSearchResult {
  BitAllocation allocation;
  int uniform_bits = 0;                        // the shared T
  std::vector<std::pair<int, double>> table;   // (T, accuracy), T ascending
};

/// Smallest T shared by all quantizable conv layers meeting the budget, with
/// optional per-layer greedy refinement below it.
KnqSearchResult search_knq_allocation(const ModelGraph& model, const Dataset& data,
                                      const SearchBudget& budget,
                                      const CodebookSource& codebooks,
                                      const KnqSearchOptions& options = {});

/// Builds the QuantConfig an allocation describes. KNQ layers draw their
/// codebooks from `codebooks`.
QuantConfig config_for(const ModelGraph& model, const BitAllocation& alloc,
                       const CodebookSource& codebooks = {});
/// Same for a (possibly mixed-scheme) allocation file.
QuantConfig config_for(const ModelGraph& model, const AllocationFile& file,
                       const CodebookSource& codebooks = {});

}  // namespace nuq

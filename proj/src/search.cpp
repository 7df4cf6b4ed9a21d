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

#include "nuq/search.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include "nuq/error.hpp"
#include "parallel.hpp"

namespace nuq {

namespace {

// Accuracies are count ratios; differences like 0.95 - 0.93 land a few ulps
// past the nominal delta.
constexpr double kAccuracyEps = 1e-9;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

void SearchBudget::validate() const {
  if (!(delta > 0.0 && delta <= 1.0)) {
    throw ValidationError("accuracy budget delta must be in (0, 1]");
  }
  if (!(reference_accuracy >= 0.0 && reference_accuracy <= 1.0)) {
    throw ValidationError("reference accuracy must be in [0, 1]");
  }
  if (top_k < 1) throw ValidationError("top-k must be >= 1");
}

bool SearchBudget::accepts(double accuracy) const noexcept {
  return reference_accuracy - accuracy <= delta + kAccuracyEps;
}

BitMap BitAllocation::bit_map() const {
  return BitMap(bits.begin(), bits.end());
}

std::optional<int> BitAllocation::bits_for(const std::string& layer) const {
  for (const auto& [name, b] : bits) {
    if (name == layer) return b;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Allocation files

AllocationFile read_allocation(std::istream& in) {
  AllocationFile file;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      const auto colon = t.find(':');
      if (colon != std::string::npos) {
        file.summary[trim(t.substr(1, colon - 1))] = trim(t.substr(colon + 1));
      }
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(t);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(trim(c));
    if (cells.size() >= 3 && cells[0] == "layer" && cells[1] == "scheme") continue;
    const std::string where = "allocation line " + std::to_string(line_no);
    if (cells.size() < 3 || cells.size() > 4) throw ParseError(where + ": expected layer,scheme,bits");
    LayerQuantSpec spec;
    try {
      spec.scheme = parse_scheme(cells[1]);
    } catch (const ValidationError& e) {
      throw ParseError(where + ": " + e.what());
    }
    try {
      std::size_t used = 0;
      spec.bits = std::stoi(cells[2], &used);
      if (used != cells[2].size()) throw std::invalid_argument("trailing");
      if (cells.size() == 4) spec.f_bits = std::stoi(cells[3]);
      else spec.f_bits = -1;
    } catch (const std::exception&) {
      throw ParseError(where + ": bad bit width '" + cells[2] + "'");
    }
    for (const auto& [name, s] : file.rows) {
      if (name == cells[0]) throw ParseError(where + ": duplicate layer '" + name + "'");
    }
    file.rows.emplace_back(cells[0], spec);
  }
  return file;
}

AllocationFile load_allocation(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open allocation file '" + path + "'");
  return read_allocation(in);
}

void write_allocation(std::ostream& out, const BitAllocation& alloc,
                      const std::map<std::string, std::string>& summary) {
  for (const auto& [k, v] : summary) out << "# " << k << ": " << v << '\n';
  out << "layer,scheme,bits\n";
  for (const auto& [name, b] : alloc.bits) {
    out << name << ',' << to_string(alloc.scheme) << ',' << b << '\n';
  }
}

void save_allocation(const std::string& path, const BitAllocation& alloc,
                     const std::map<std::string, std::string>& summary) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write allocation file '" + path + "'");
  write_allocation(out, alloc, summary);
}

BitMap bit_map(const AllocationFile& file) {
  BitMap m;
  for (const auto& [name, spec] : file.rows) m[name] = spec.bits;
  return m;
}

// ---------------------------------------------------------------------------

EvalCache::EvalCache(const ModelGraph& model, const Dataset& data, std::size_t top_k)
    : model_(model), data_(data), top_k_(top_k) {}

namespace {

std::string config_key(const QuantConfig& cfg) {
  std::ostringstream key;
  for (const auto& [name, spec] : cfg.layers()) {
    key << name << ':' << to_string(spec.scheme) << ':' << spec.bits << ':' << spec.f_bits;
    if (spec.codebook) {
      for (auto d : spec.codebook->entries()) key << ',' << d;
    }
    key << ';';
  }
  return key.str();
}

}  // namespace

double EvalCache::accuracy(const QuantConfig& cfg) {
  const std::string key = config_key(cfg);
  {
    std::lock_guard lock(mutex_);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  }
  const double acc = evaluate(model_, data_, cfg, top_k_);
  std::lock_guard lock(mutex_);
  ++evaluations_;
  memo_[key] = acc;
  return acc;
}

UniformSweep find_min_uniform_q(const ModelGraph& model, const Dataset& data,
                                const SearchBudget& budget, int q_lo, int q_hi, int f_bits) {
  budget.validate();
  if (q_lo > q_hi) throw ValidationError("empty bit-width range");
  if (q_lo < 1 || q_hi > FxFormat::kMaxBits) throw ValidationError("bit-width range outside [1, 16]");
  if (f_bits < 0 || f_bits >= q_lo) {
    throw ValidationError("fractional bits must be below every width in the range");
  }
  UniformSweep sweep;
  for (int q = q_hi; q >= q_lo; --q) {
    const double acc = evaluate(model, data, QuantConfig::all_uniform(model, q, f_bits), budget.top_k);
    sweep.table.emplace_back(q, acc);
    if (budget.accepts(acc)) sweep.q_min = q;
  }
  return sweep;
}

SearchMode parse_search_mode(std::string_view text) {
  if (text == "greedy") return SearchMode::Greedy;
  if (text == "exhaustive") return SearchMode::Exhaustive;
  throw ValidationError("unknown search mode '" + std::string(text) + "'");
}

namespace {

struct LayerSlot {
  std::string name;
  std::uint64_t count = 0;
};

std::vector<LayerSlot> slots_for(const ModelGraph& model, const std::vector<std::string>& names) {
  std::vector<LayerSlot> out;
  for (const auto& n : names) out.push_back({n, activation_count(model, n)});
  return out;
}

std::uint64_t alloc_bits(const std::vector<LayerSlot>& slots, const std::vector<int>& bits) {
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < slots.size(); ++i) t += slots[i].count * static_cast<std::uint64_t>(bits[i]);
  return t;
}

// Greedy descent: repeatedly take the one-bit decrement with the best
// footprint saving per unit of accuracy lost, among decrements that keep the
// budget. `make_cfg` maps a bit vector to its config.
template <class MakeCfg>
std::pair<std::vector<int>, double> greedy_descent(const std::vector<LayerSlot>& slots,
                                                   std::vector<int> bits, double acc,
                                                   int min_bits, const SearchBudget& budget,
                                                   EvalCache& cache, MakeCfg&& make_cfg) {
  for (;;) {
    std::vector<std::size_t> cand;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (bits[i] > min_bits) cand.push_back(i);
    }
    if (cand.empty()) break;
    std::vector<double> accs(cand.size());
    detail::parallel_for(cand.size(), [&](std::size_t c) {
      auto trial = bits;
      --trial[cand[c]];
      accs[c] = cache.accuracy(make_cfg(trial));
    });
    std::optional<std::size_t> best;
    double best_score = 0.0;
    constexpr double kFree = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cand.size(); ++c) {
      if (!budget.accepts(accs[c])) continue;
      const double saving = static_cast<double>(slots[cand[c]].count);
      const double loss = acc - accs[c];
      const double score = loss <= 0.0 ? kFree : saving / loss;
      bool better = !best || score > best_score;
      if (best && score == best_score && score == kFree) {
        better = saving > static_cast<double>(slots[cand[*best]].count);
      }
      if (better) {
        best = c;
        best_score = score;
      }
    }
    if (!best) break;
    --bits[cand[*best]];
    acc = accs[*best];
  }
  return {bits, acc};
}

QuantConfig enq_config(const ModelGraph& model, const std::vector<LayerSlot>& slots,
                       const std::vector<int>& bits) {
  QuantConfig cfg(model.activation_format());
  for (std::size_t i = 0; i < slots.size(); ++i) cfg.set(slots[i].name, LayerQuantSpec::enq(bits[i]));
  return cfg;
}

// Exact minimum-footprint search by depth-first enumeration with
// branch-and-bound on footprint. Each prefix's activations are computed once
// and shared by every completion of that prefix.
class PrefixSearch {
 public:
  PrefixSearch(const ModelGraph& model, const Dataset& data, const SearchBudget& budget,
               const std::vector<LayerSlot>& slots, int min_bits, int max_bits)
      : model_(model), data_(data), budget_(budget), slots_(slots),
        min_bits_(min_bits), max_bits_(max_bits) {
    for (const auto& s : slots_) relu_.push_back(model_.relu_index(s.name));
  }

  void seed(const std::vector<int>& bits) {
    best_ = bits;
    best_fp_ = alloc_bits(slots_, bits);
  }

  std::optional<std::vector<int>> run() {
    std::vector<ActivationMap> acts(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) {
      const auto codes = data_.inputs[i].codes();
      acts[i].assign(codes.begin(), codes.end());
    }
    std::vector<int> bits(slots_.size(), 0);
    descend(0, 0, acts, bits, 0);
    return best_;
  }

 private:
  void descend(std::size_t depth, std::size_t start, const std::vector<ActivationMap>& acts,
               std::vector<int>& bits, std::uint64_t prefix_fp) {
    const QuantConfig none(model_.activation_format());
    const std::size_t n = data_.size();
    if (depth == slots_.size()) {
      std::vector<std::uint8_t> hit(n);
      detail::parallel_for(n, [&](std::size_t i) {
        const auto scores = run_layers(model_, acts[i], start, model_.layers().size(), none);
        hit[i] = in_top_k(scores, data_.labels[i], budget_.top_k) ? 1 : 0;
      });
      std::size_t correct = 0;
      for (auto h : hit) correct += h;
      const double acc = static_cast<double>(correct) / static_cast<double>(n);
      if (budget_.accepts(acc) && (!best_ || prefix_fp < best_fp_)) {
        best_ = bits;
        best_fp_ = prefix_fp;
      }
      return;
    }
    std::uint64_t rest_min = 0;
    for (std::size_t j = depth; j < slots_.size(); ++j) {
      rest_min += slots_[j].count * static_cast<std::uint64_t>(min_bits_);
    }
    if (best_ && prefix_fp + rest_min >= best_fp_) return;

    const std::size_t stop = relu_[depth] + 1;
    std::vector<ActivationMap> pre(n);
    detail::parallel_for(n, [&](std::size_t i) {
      pre[i] = run_layers(model_, acts[i], start, stop, none);
    });
    const FxFormat master = model_.activation_format();
    std::vector<ActivationMap> next(n);
    for (int b = min_bits_; b <= max_bits_; ++b) {
      const std::uint64_t fp = prefix_fp + slots_[depth].count * static_cast<std::uint64_t>(b);
      std::uint64_t bound = fp;
      for (std::size_t j = depth + 1; j < slots_.size(); ++j) {
        bound += slots_[j].count * static_cast<std::uint64_t>(min_bits_);
      }
      if (best_ && bound >= best_fp_) break;  // larger b only grows the bound
      const LayerQuantSpec spec = LayerQuantSpec::enq(b);
      detail::parallel_for(n, [&](std::size_t i) {
        next[i].resize(pre[i].size());
        for (std::size_t e = 0; e < pre[i].size(); ++e) {
          next[i][e] = requantize(pre[i][e], spec, master);
        }
      });
      bits[depth] = b;
      descend(depth + 1, stop, next, bits, fp);
    }
    bits[depth] = 0;
  }

  const ModelGraph& model_;
  const Dataset& data_;
  const SearchBudget& budget_;
  const std::vector<LayerSlot>& slots_;
  int min_bits_, max_bits_;
  std::vector<std::size_t> relu_;
  std::optional<std::vector<int>> best_;
  std::uint64_t best_fp_ = 0;
};

BitAllocation make_allocation(Scheme scheme, const std::vector<LayerSlot>& slots,
                              const std::vector<int>& bits, double acc) {
  BitAllocation a;
  a.scheme = scheme;
  for (std::size_t i = 0; i < slots.size(); ++i) a.bits.emplace_back(slots[i].name, bits[i]);
  a.achieved_accuracy = acc;
  return a;
}

}  // namespace

BitAllocation search_enq_allocation(const ModelGraph& model, const Dataset& data,
                                    const SearchBudget& budget, const EnqSearchOptions& options) {
  budget.validate();
  const int qm = model.activation_format().q_bits();
  const int max_bits = options.max_bits == 0 ? qm : options.max_bits;
  if (options.min_bits < 1 || options.min_bits > max_bits || max_bits > qm) {
    throw ValidationError("ENQ search bit range must satisfy 1 <= min <= max <= q_m");
  }
  const auto slots = slots_for(model, model.quantizable_layers());
  if (slots.empty()) throw ValidationError("model has no quantizable layers");
  if (options.mode == SearchMode::Exhaustive && slots.size() > options.exhaustive_layer_cap) {
    throw ValidationError("exhaustive search is capped at " +
                          std::to_string(options.exhaustive_layer_cap) + " layers; model has " +
                          std::to_string(slots.size()));
  }

  EvalCache cache(model, data, budget.top_k);
  const auto make_cfg = [&](const std::vector<int>& bits) { return enq_config(model, slots, bits); };
  std::vector<int> top(slots.size(), max_bits);
  const double top_acc = cache.accuracy(make_cfg(top));
  if (!budget.accepts(top_acc)) {
    std::ostringstream msg;
    msg << "infeasible budget: " << max_bits << "-bit ENQ on every layer reaches accuracy "
        << top_acc << ", reference " << budget.reference_accuracy << ", delta " << budget.delta;
    throw InfeasibleError(msg.str());
  }
  auto [bits, acc] = greedy_descent(slots, top, top_acc, options.min_bits, budget, cache, make_cfg);

  if (options.mode == SearchMode::Exhaustive) {
    PrefixSearch search(model, data, budget, slots, options.min_bits, max_bits);
    search.seed(bits);
    bits = *search.run();
    acc = evaluate(model, data, make_cfg(bits), budget.top_k);
  }
  return make_allocation(Scheme::Enq, slots, bits, acc);
}

KnqSearchResult search_knq_allocation(const ModelGraph& model, const Dataset& data,
                                      const SearchBudget& budget, const CodebookSource& codebooks,
                                      const KnqSearchOptions& options) {
  budget.validate();
  if (!codebooks) throw ValidationError("KNQ search needs a codebook source");
  if (options.min_bits < 1 || options.min_bits > options.max_bits || options.max_bits > 16) {
    throw ValidationError("KNQ search bit range must satisfy 1 <= min <= max <= 16");
  }
  const auto slots = slots_for(model, model.quantizable_conv_layers());
  if (slots.empty()) throw ValidationError("model has no quantizable conv layers");

  EvalCache cache(model, data, budget.top_k);
  const auto make_cfg = [&](const std::vector<int>& bits) {
    QuantConfig cfg(model.activation_format());
    for (std::size_t i = 0; i < slots.size(); ++i) {
      cfg.set(slots[i].name, LayerQuantSpec::knq(codebooks(slots[i].name, bits[i])));
    }
    return cfg;
  };

  KnqSearchResult result;
  std::optional<std::pair<int, double>> found;
  for (int t = options.min_bits; t <= options.max_bits; ++t) {
    const double acc = cache.accuracy(make_cfg(std::vector<int>(slots.size(), t)));
    result.table.emplace_back(t, acc);
    if (budget.accepts(acc)) {
      found = {t, acc};
      break;
    }
  }
  if (!found) {
    std::ostringstream msg;
    msg << "infeasible budget: no shared KNQ width in [" << options.min_bits << ", "
        << options.max_bits << "] reaches reference " << budget.reference_accuracy
        << " within delta " << budget.delta;
    throw InfeasibleError(msg.str());
  }
  result.uniform_bits = found->first;
  std::vector<int> bits(slots.size(), found->first);
  double acc = found->second;
  if (options.per_layer_refine) {
    std::tie(bits, acc) =
        greedy_descent(slots, bits, acc, options.min_bits, budget, cache, make_cfg);
  }
  result.allocation = make_allocation(Scheme::Knq, slots, bits, acc);
  return result;
}

QuantConfig config_for(const ModelGraph& model, const BitAllocation& alloc,
                       const CodebookSource& codebooks) {
  QuantConfig cfg(model.activation_format());
  for (const auto& [name, b] : alloc.bits) {
    switch (alloc.scheme) {
      case Scheme::Uniform:
        cfg.set(name, LayerQuantSpec::uniform(b, model.activation_format().f_bits()));
        break;
      case Scheme::Enq:
        cfg.set(name, LayerQuantSpec::enq(b));
        break;
      case Scheme::Knq:
        if (!codebooks) throw ValidationError("KNQ allocation needs codebooks");
        cfg.set(name, LayerQuantSpec::knq(codebooks(name, b)));
        break;
    }
  }
  cfg.validate(model);
  return cfg;
}

QuantConfig config_for(const ModelGraph& model, const AllocationFile& file,
                       const CodebookSource& codebooks) {
  QuantConfig cfg(model.activation_format());
  for (const auto& [name, row] : file.rows) {
    LayerQuantSpec spec = row;
    switch (spec.scheme) {
      case Scheme::Uniform:
        if (spec.f_bits < 0) spec.f_bits = model.activation_format().f_bits();
        break;
      case Scheme::Enq:
        spec.f_bits = 0;
        break;
      case Scheme::Knq:
        if (!codebooks) throw ValidationError("allocation row '" + name + "' needs KNQ codebooks");
        spec = LayerQuantSpec::knq(codebooks(name, row.bits));
        break;
    }
    cfg.set(name, spec);
  }
  cfg.validate(model);
  return cfg;
}

}  // namespace nuq

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

#include "nuq/calib.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>

#include "nuq/error.hpp"
#include "parallel.hpp"

namespace nuq {

KMeansConfig KMeansConfig::for_bits(int bits) {
  if (bits < 1 || bits > 16) {
    throw ValidationError("K-means bits must be in [1, 16], got " + std::to_string(bits));
  }
  KMeansConfig cfg;
  cfg.clusters = 1 << bits;
  return cfg;
}

void KMeansConfig::validate() const {
  if (clusters < 2) throw ValidationError("K-means needs at least 2 clusters");
  if ((clusters & (clusters - 1)) != 0) {
    throw ValidationError("K-means cluster count must be a power of two");
  }
  if (max_iters < 1) throw ValidationError("K-means max_iters must be >= 1");
  if (!(tol >= 0.0)) throw ValidationError("K-means tol must be non-negative");
}

std::map<std::string, ActivationSample> collect_all(const ModelGraph& model,
                                                    const Dataset& calib_set) {
  if (calib_set.size() == 0) throw ValidationError("calibration set is empty");
  const auto& names = model.quantizable_layers();
  // Per-sample buffers keep the pooled order sample-then-element regardless
  // of how samples are scheduled.
  std::vector<std::map<std::string, std::vector<std::uint32_t>>> per_sample(calib_set.size());
  const QuantConfig none(model.activation_format());
  detail::parallel_for(calib_set.size(), [&](std::size_t i) {
    auto& mine = per_sample[i];
    forward(model, calib_set.inputs[i], none,
            [&](const std::string& layer, std::span<const std::int64_t> codes) {
              auto& dst = mine[layer];
              dst.reserve(codes.size());
              for (auto c : codes) {
                dst.push_back(static_cast<std::uint32_t>(std::clamp<std::int64_t>(
                    c, 0, std::numeric_limits<std::uint32_t>::max())));
              }
            });
  });
  std::map<std::string, ActivationSample> out;
  for (const auto& name : names) {
    ActivationSample s;
    s.layer = name;
    for (auto& sample : per_sample) {
      auto& v = sample[name];
      s.values.insert(s.values.end(), v.begin(), v.end());
      std::vector<std::uint32_t>().swap(v);
    }
    out.emplace(name, std::move(s));
  }
  return out;
}

ActivationSample collect(const ModelGraph& model, const Dataset& calib_set,
                         const std::string& layer) {
  if (!model.find(layer)) throw ValidationError("unknown layer '" + layer + "'");
  if (!model.is_quantizable(layer)) {
    throw ValidationError("layer '" + layer + "' is not followed by a relu");
  }
  auto all = collect_all(model, calib_set);
  return std::move(all.at(layer));
}

ActivationSample saturate(ActivationSample s, FxFormat master) {
  const std::uint32_t m = master.max_code();
  for (auto& v : s.values) v = std::min(v, m);
  return s;
}

Histogram Histogram::of(std::span<const std::uint32_t> sample) {
  std::vector<std::uint32_t> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  Histogram h;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    h.values.push_back(sorted[i]);
    h.counts.push_back(j - i);
    i = j;
  }
  return h;
}

std::uint64_t Histogram::total() const noexcept {
  std::uint64_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

void write_histogram_csv(std::ostream& out, const Histogram& h) {
  out << "code,count\n";
  for (std::size_t i = 0; i < h.values.size(); ++i) {
    out << h.values[i] << ',' << h.counts[i] << '\n';
  }
}

namespace {

// Nearest centroid over an ascending centroid array, ties to the lower index.
std::size_t nearest(double v, const std::vector<double>& c) {
  const auto it = std::lower_bound(c.begin(), c.end(), v);
  double pick;
  if (it == c.begin()) {
    pick = *it;
  } else if (it == c.end()) {
    pick = c.back();
  } else {
    const double below = *(it - 1), above = *it;
    pick = (v - below) <= (above - v) ? below : above;
  }
  return static_cast<std::size_t>(std::lower_bound(c.begin(), c.end(), pick) - c.begin());
}

double objective(const Histogram& h, const std::vector<double>& c,
                 std::vector<std::size_t>* assign) {
  double j = 0.0;
  for (std::size_t i = 0; i < h.values.size(); ++i) {
    const double v = h.values[i];
    const std::size_t k = nearest(v, c);
    if (assign) (*assign)[i] = k;
    const double d = v - c[k];
    j += static_cast<double>(h.counts[i]) * d * d;
  }
  return j;
}

// Means of the least-squares split of h into min(K, d) contiguous runs of
// distinct values, padded with the smallest value up to K. Divide and conquer
// over the split point, which is monotone for squared error.
std::vector<double> optimal_partition(const Histogram& h, std::size_t K) {
  const std::size_t d = h.values.size();
  std::vector<long double> s1(d + 1, 0), s2(d + 1, 0), n(d + 1, 0);
  for (std::size_t i = 0; i < d; ++i) {
    const long double v = h.values[i], c = static_cast<long double>(h.counts[i]);
    s1[i + 1] = s1[i] + v * c;
    s2[i + 1] = s2[i] + v * v * c;
    n[i + 1] = n[i] + c;
  }
  auto sse = [&](std::size_t a, std::size_t b) {
    const long double m = s1[b] - s1[a];
    return (s2[b] - s2[a]) - m * m / (n[b] - n[a]);
  };
  const std::size_t k_eff = std::min(K, d);
  // cost[i]: best cost of the first i values in the current number of runs.
  std::vector<long double> prev(d + 1), cur(d + 1);
  std::vector<std::vector<std::size_t>> split(k_eff, std::vector<std::size_t>(d + 1, 0));
  for (std::size_t i = 1; i <= d; ++i) prev[i] = sse(0, i);
  for (std::size_t k = 1; k < k_eff; ++k) {
    // run k+1 ends at i, starts at j in [k, i-1]
    std::function<void(std::size_t, std::size_t, std::size_t, std::size_t)> solve =
        [&](std::size_t lo, std::size_t hi, std::size_t jlo, std::size_t jhi) {
          if (lo > hi) return;
          const std::size_t mid = lo + (hi - lo) / 2;
          long double best = std::numeric_limits<long double>::infinity();
          std::size_t arg = jlo;
          for (std::size_t j = jlo; j <= std::min(jhi, mid - 1); ++j) {
            const long double c = prev[j] + sse(j, mid);
            if (c < best) {
              best = c;
              arg = j;
            }
          }
          cur[mid] = best;
          split[k][mid] = arg;
          if (mid > lo) solve(lo, mid - 1, jlo, arg);
          solve(mid + 1, hi, arg, jhi);
        };
    solve(k + 1, d, k, d - 1);
    std::swap(prev, cur);
  }
  std::vector<double> c(K, static_cast<double>(h.values.front()));
  std::size_t end = d;
  for (std::size_t k = k_eff; k-- > 0;) {
    const std::size_t begin = k == 0 ? 0 : split[k][end];
    c[K - k_eff + k] = static_cast<double>((s1[end] - s1[begin]) / (n[end] - n[begin]));
    end = begin;
  }
  return c;
}

}  // namespace

double kmeans_objective(std::span<const std::uint32_t> sample,
                        std::span<const double> centroids) {
  std::vector<double> c(centroids.begin(), centroids.end());
  std::sort(c.begin(), c.end());
  return objective(Histogram::of(sample), c, nullptr);
}

KMeansResult kmeans_fit_detailed(std::span<const std::uint32_t> sample,
                                 const KMeansConfig& cfg, FxFormat master,
                                 const std::string& layer) {
  cfg.validate();
  if (sample.empty()) throw ValidationError("cannot fit K-means on an empty sample");
  const Histogram h = Histogram::of(sample);
  const std::size_t K = static_cast<std::size_t>(cfg.clusters);
  std::vector<double> c(K);
  if (cfg.init == KMeansInit::OptimalPartition) {
    c = optimal_partition(h, K);
  } else {
    const double top = h.values.back();
    for (std::size_t k = 0; k < K; ++k) {
      c[k] = top * static_cast<double>(k) / static_cast<double>(K - 1);
    }
  }

  std::vector<double> history;
  std::vector<std::size_t> assign(h.values.size());
  for (int it = 0;; ++it) {
    const double j = objective(h, c, &assign);
    if (!history.empty()) {
      const double prev = history.back();
      assert(j <= prev * (1.0 + 1e-12) + 1e-12 && "Lloyd objective increased");
      history.push_back(j);
      if (prev - j <= cfg.tol * prev) break;
    } else {
      history.push_back(j);
      if (j == 0.0) break;
    }
    if (it + 1 >= cfg.max_iters) break;

    std::vector<double> sum(K, 0.0);
    std::vector<std::uint64_t> count(K, 0);
    for (std::size_t i = 0; i < h.values.size(); ++i) {
      sum[assign[i]] += static_cast<double>(h.counts[i]) * h.values[i];
      count[assign[i]] += h.counts[i];
    }
    for (std::size_t k = 0; k < K; ++k) {
      if (count[k]) c[k] = sum[k] / static_cast<double>(count[k]);
    }
    // Empty clusters respawn at the value farthest from its centroid; that
    // value then sits on its new centroid, so the next respawn picks another.
    for (std::size_t k = 0; k < K; ++k) {
      if (count[k]) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < h.values.size(); ++i) {
        const double d = std::abs(h.values[i] - c[assign[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      c[k] = h.values[far];
      assign[far] = k;
    }
    std::sort(c.begin(), c.end());
  }

  std::vector<std::uint32_t> entries(K);
  for (std::size_t k = 0; k < K; ++k) {
    entries[k] = static_cast<std::uint32_t>(std::clamp(std::floor(c[k] + 0.5), 0.0, 65535.0));
  }
  int bits = 0;
  while ((std::size_t{1} << bits) < K) ++bits;
  const int iterations = static_cast<int>(history.size());
  return KMeansResult{std::move(c), std::move(history), iterations,
                      Codebook(layer.empty() ? std::string("layer") : layer, bits,
                               std::move(entries), master)};
}

Codebook kmeans_fit(const ActivationSample& s, const KMeansConfig& cfg, FxFormat master) {
  return kmeans_fit_detailed(s.values, cfg, master, s.layer).codebook;
}

CodebookFitter::CodebookFitter(const ModelGraph& model, const Dataset& calib_set,
                               bool preprocess)
    : master_(model.activation_format()),
      preprocess_(preprocess),
      samples_(collect_all(model, calib_set)) {
  if (preprocess_) {
    for (auto& [name, s] : samples_) s = saturate(std::move(s), master_);
  }
}

const ActivationSample& CodebookFitter::sample(const std::string& layer) const {
  const auto it = samples_.find(layer);
  if (it == samples_.end()) {
    throw ValidationError("no calibration sample for layer '" + layer + "'");
  }
  return it->second;
}

CodebookPtr CodebookFitter::fit(const std::string& layer, int bits) {
  const ActivationSample& s = sample(layer);
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find({layer, bits}); it != cache_.end()) return it->second;
  }
  auto cb = std::make_shared<const Codebook>(kmeans_fit(s, KMeansConfig::for_bits(bits), master_));
  std::lock_guard lock(mutex_);
  return cache_.emplace(std::make_pair(layer, bits), std::move(cb)).first->second;
}

}  // namespace nuq

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

// Activation collection, saturation and the 1-D K-means solver that
// produces KNQ codebooks.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "nuq/fxcore.hpp"
#include "nuq/netgraph.hpp"
#include "nuq/quant.hpp"

namespace nuq {

/// Pooled post-ReLU activations of one layer, as master-format codes, in
/// sample-then-element order.
struct ActivationSample {
  std::string layer;
  std::vector<std::uint32_t> values;
};

/// EvenlySpaced: centroids at k * max / (K - 1). OptimalPartition: means of
/// the least-squares contiguous split of the sorted sample, which Lloyd then
/// only confirms; evenly spaced starts can stall in a local optimum.
enum class KMeansInit { OptimalPartition, EvenlySpaced };

struct KMeansConfig {
  int clusters = 2;
  int max_iters = 100;
  double tol = 1e-6;
  KMeansInit init = KMeansInit::OptimalPartition;

  static KMeansConfig for_bits(int bits);
  void validate() const;
};

/// Collects every quantizable layer in one pass per calibration input.
std::map<std::string, ActivationSample> collect_all(const ModelGraph& model,
                                                    const Dataset& calib_set);
ActivationSample collect(const ModelGraph& model, const Dataset& calib_set,
                         const std::string& layer);

/// Replaces every code above 2^q_m - 1 with 2^q_m - 1.
ActivationSample saturate(ActivationSample s, FxFormat master);

/// Sorted (value, count) pairs.
struct Histogram {
  std::vector<std::uint32_t> values;
  std::vector<std::uint64_t> counts;

  static Histogram of(std::span<const std::uint32_t> sample);
  std::uint64_t total() const noexcept;
};

/// Writes `code,count` rows for every code with a nonzero count.
void write_histogram_csv(std::ostream& out, const Histogram& h);

struct KMeansResult {
  std::vector<double> centroids;         // ascending, before rounding
  std::vector<double> objective_history; // objective at each iteration's centroids
  int iterations = 0;
  Codebook codebook;
};

/// Lloyd iteration on a 1-D sample from the configured start. Centroids are
/// fitted in real arithmetic and rounded half-up to codes at the end.
KMeansResult kmeans_fit_detailed(std::span<const std::uint32_t> sample,
                                 const KMeansConfig& cfg, FxFormat master,
                                 const std::string& layer = {});
Codebook kmeans_fit(const ActivationSample& s, const KMeansConfig& cfg, FxFormat master);

/// Sum of squared distances to the nearest centroid.
double kmeans_objective(std::span<const std::uint32_t> sample,
                        std::span<const double> centroids);

/// Fits and caches KNQ codebooks per (layer, bits) from one calibration pass.
/// Thread-safe.
class CodebookFitter {
 public:
  CodebookFitter(const ModelGraph& model, const Dataset& calib_set,
                 bool preprocess = true);

  CodebookPtr fit(const std::string& layer, int bits);
  const ActivationSample& sample(const std::string& layer) const;
  bool preprocess() const noexcept { return preprocess_; }

 private:
  FxFormat master_;
  bool preprocess_;
  std::map<std::string, ActivationSample> samples_;
  std::map<std::pair<std::string, int>, CodebookPtr> cache_;
  std::mutex mutex_;
};

}  // namespace nuq

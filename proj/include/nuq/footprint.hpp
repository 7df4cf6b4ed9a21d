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

// Activation storage accounting (NB / NNB).

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nuq/netgraph.hpp"

namespace nuq {

struct LayerCount {
  std::string layer;
  std::uint64_t count = 0;
};

/// Single-image activation counts of the quantizable layers, in chain order.
std::vector<LayerCount> activation_counts(const ModelGraph& model);

/// Activation count of any weighted layer (product of its output dims).
std::uint64_t activation_count(const ModelGraph& model, const std::string& layer);

using BitMap = std::map<std::string, int>;

constexpr double kBitsPerMiB = 8.0 * 1024.0 * 1024.0;

struct FootprintBaseline {
  std::string name;
  double nb_bits = 0.0;

  static FootprintBaseline from_mib(std::string name, double mib) {
    return {std::move(name), mib * kBitsPerMiB};
  }
};

struct LayerFootprint {
  std::string layer;
  std::uint64_t count = 0;
  int bits = 0;
  std::uint64_t total_bits = 0;
};

struct FootprintReport {
  std::vector<LayerFootprint> layers;
  std::uint64_t nb_bits = 0;
  FootprintBaseline baseline;
  double nnb = 0.0;

  double nb_mib() const noexcept { return static_cast<double>(nb_bits) / kBitsPerMiB; }
};

/// Sum of count * bits over the allocation's layers. The allocation must
/// name weighted layers only and must cover every quantizable conv layer.
std::uint64_t total_bits(const ModelGraph& model, const BitMap& bits);

FootprintReport footprint(const ModelGraph& model, const BitMap& bits,
                          const FootprintBaseline& baseline);
/// Baseline taken from another allocation over the same model.
FootprintReport footprint(const ModelGraph& model, const BitMap& bits,
                          const std::string& baseline_name, const BitMap& baseline_bits);

/// JSON-shaped text: per-layer rows plus the NB / NNB summary.
std::string to_json(const FootprintReport& report, int indent = 2);

}  // namespace nuq

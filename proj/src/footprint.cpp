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

#include "nuq/footprint.hpp"

#include <json.hpp>

#include "nuq/error.hpp"

namespace nuq {

std::vector<LayerCount> activation_counts(const ModelGraph& model) {
  std::vector<LayerCount> out;
  for (const auto& name : model.quantizable_layers()) {
    out.push_back({name, element_count(model.find(name)->output_dims)});
  }
  return out;
}

std::uint64_t activation_count(const ModelGraph& model, const std::string& layer) {
  const LayerDef* l = model.find(layer);
  if (!l) throw ValidationError("unknown layer '" + layer + "'");
  if (!l->is_weighted()) {
    throw ValidationError("layer '" + layer + "' is not a conv or fully-connected layer");
  }
  return element_count(l->output_dims);
}

namespace {

std::vector<LayerFootprint> rows(const ModelGraph& model, const BitMap& bits) {
  for (const auto& name : model.quantizable_conv_layers()) {
    if (!bits.count(name)) {
      throw ValidationError("allocation is missing conv layer '" + name + "'");
    }
  }
  for (const auto& [name, b] : bits) {
    activation_count(model, name);  // rejects unknown / unweighted layers
    if (b < 1 || b > 32) {
      throw ValidationError("layer '" + name + "': bits must be in [1, 32]");
    }
  }
  std::vector<LayerFootprint> out;
  for (const auto& l : model.layers()) {
    const auto it = bits.find(l.name);
    if (it == bits.end()) continue;
    const std::uint64_t count = element_count(l.output_dims);
    out.push_back({l.name, count, it->second, count * static_cast<std::uint64_t>(it->second)});
  }
  return out;
}

}  // namespace

std::uint64_t total_bits(const ModelGraph& model, const BitMap& bits) {
  std::uint64_t nb = 0;
  for (const auto& r : rows(model, bits)) nb += r.total_bits;
  return nb;
}

FootprintReport footprint(const ModelGraph& model, const BitMap& bits,
                          const FootprintBaseline& baseline) {
  if (!(baseline.nb_bits > 0.0)) throw ValidationError("footprint baseline must be positive");
  FootprintReport r;
  r.layers = rows(model, bits);
  for (const auto& l : r.layers) r.nb_bits += l.total_bits;
  r.baseline = baseline;
  r.nnb = static_cast<double>(r.nb_bits) / baseline.nb_bits;
  return r;
}

FootprintReport footprint(const ModelGraph& model, const BitMap& bits,
                          const std::string& baseline_name, const BitMap& baseline_bits) {
  return footprint(model, bits,
                   FootprintBaseline{baseline_name,
                                     static_cast<double>(total_bits(model, baseline_bits))});
}

std::string to_json(const FootprintReport& report, int indent) {
  nlohmann::json j;
  j["schema"] = 1;
  auto& layers = j["layers"] = nlohmann::json::array();
  for (const auto& l : report.layers) {
    layers.push_back({{"layer", l.layer}, {"count", l.count}, {"bits", l.bits},
                      {"total_bits", l.total_bits}});
  }
  j["nb_bits"] = report.nb_bits;
  j["nb_mib"] = report.nb_mib();
  j["baseline"] = {{"name", report.baseline.name},
                   {"nb_bits", report.baseline.nb_bits},
                   {"nb_mib", report.baseline.nb_bits / kBitsPerMiB}};
  j["nnb"] = report.nnb;
  return j.dump(indent);
}

}  // namespace nuq

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

#include "nuq/netgraph.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "nuq/error.hpp"
#include "parallel.hpp"

namespace nuq {

namespace fs = std::filesystem;
using json = nlohmann::json;

const char* to_string(LayerKind kind) noexcept {
  switch (kind) {
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::Relu: return "relu";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::FullyConnected: return "fullyconnected";
    case LayerKind::Softmax: return "softmax";
  }
  return "unknown";
}

LayerKind parse_layer_kind(std::string_view text) {
  if (text == "conv2d") return LayerKind::Conv2d;
  if (text == "relu") return LayerKind::Relu;
  if (text == "maxpool") return LayerKind::MaxPool;
  if (text == "fullyconnected") return LayerKind::FullyConnected;
  if (text == "softmax") return LayerKind::Softmax;
  throw ParseError("unknown layer kind '" + std::string(text) + "'");
}

namespace {

std::string dims_str(const Shape& d) {
  std::string s = "[";
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(d[i]);
  }
  return s + "]";
}

std::size_t window_out(std::size_t in, int kernel, int stride, int pad,
                       const std::string& layer) {
  const long long span = static_cast<long long>(in) + 2LL * pad - kernel;
  if (kernel < 1 || stride < 1 || pad < 0 || span < 0) {
    throw DimensionError("layer '" + layer + "': window does not fit its input");
  }
  return static_cast<std::size_t>(span / stride + 1);
}

void check_weight(const LayerDef& l, const std::optional<WeightTensor>& t,
                  const Shape& want, const char* what) {
  if (!t) return;
  if (t->dims != want) {
    throw DimensionError("layer '" + l.name + "': " + what + " dims " + dims_str(t->dims) +
                         " but expected " + dims_str(want));
  }
  if (t->values.size() != element_count(want)) {
    throw DimensionError("layer '" + l.name + "': " + what + " holds " +
                         std::to_string(t->values.size()) + " codes, expected " +
                         std::to_string(element_count(want)));
  }
  if (t->format.q_bits != kWeightBits) {
    throw ValidationError("layer '" + l.name + "': " + what + " must use " +
                          std::to_string(kWeightBits) + "-bit codes");
  }
  if (t->format.f_bits < 0 || t->format.f_bits >= t->format.q_bits) {
    throw ValidationError("layer '" + l.name + "': " + what + " f_bits out of range");
  }
  const std::int32_t lo = -(1 << (t->format.q_bits - 1));
  const std::int32_t hi = (1 << (t->format.q_bits - 1)) - 1;
  for (auto v : t->values) {
    if (v < lo || v > hi) {
      throw RangeError("layer '" + l.name + "': " + what + " code out of range");
    }
  }
}

}  // namespace

ModelGraph::ModelGraph(std::string name, Shape input_dims, FxFormat activation_format,
                       std::vector<LayerDef> layers)
    : name_(std::move(name)),
      input_dims_(std::move(input_dims)),
      activation_format_(activation_format),
      layers_(std::move(layers)) {
  if (input_dims_.empty() ||
      std::any_of(input_dims_.begin(), input_dims_.end(), [](auto d) { return d == 0; })) {
    throw DimensionError("model input dims must be non-empty and positive");
  }
  if (layers_.empty()) throw ValidationError("model has no layers");

  bool any_weights = false, any_missing = false;
  int relus_since_weighted = 0;
  Shape cur = input_dims_;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    LayerDef& l = layers_[i];
    if (l.name.empty()) throw ValidationError("layer " + std::to_string(i) + " has no name");
    for (std::size_t j = 0; j < i; ++j) {
      if (layers_[j].name == l.name) {
        throw ValidationError("duplicate layer name '" + l.name + "'");
      }
    }
    Shape out;
    switch (l.kind) {
      case LayerKind::Conv2d: {
        if (cur.size() != 3 || cur[0] != static_cast<std::size_t>(l.in_channels)) {
          throw DimensionError("layer '" + l.name + "': input " + dims_str(cur) +
                               " does not match in_channels " +
                               std::to_string(l.in_channels));
        }
        if (l.out_channels < 1) {
          throw ValidationError("layer '" + l.name + "': out_channels must be positive");
        }
        out = {static_cast<std::size_t>(l.out_channels),
               window_out(cur[1], l.kernel_h, l.stride_h, l.pad_h, l.name),
               window_out(cur[2], l.kernel_w, l.stride_w, l.pad_w, l.name)};
        check_weight(l, l.weights,
                     {static_cast<std::size_t>(l.out_channels),
                      static_cast<std::size_t>(l.in_channels),
                      static_cast<std::size_t>(l.kernel_h),
                      static_cast<std::size_t>(l.kernel_w)},
                     "weights");
        check_weight(l, l.bias, {static_cast<std::size_t>(l.out_channels)}, "bias");
        break;
      }
      case LayerKind::FullyConnected: {
        if (l.in_features < 1 || l.out_features < 1 ||
            element_count(cur) != static_cast<std::size_t>(l.in_features)) {
          throw DimensionError("layer '" + l.name + "': input " + dims_str(cur) +
                               " does not match in_features " +
                               std::to_string(l.in_features));
        }
        out = {static_cast<std::size_t>(l.out_features)};
        check_weight(l, l.weights,
                     {static_cast<std::size_t>(l.out_features),
                      static_cast<std::size_t>(l.in_features)},
                     "weights");
        check_weight(l, l.bias, {static_cast<std::size_t>(l.out_features)}, "bias");
        break;
      }
      case LayerKind::MaxPool:
        if (cur.size() != 3) {
          throw DimensionError("layer '" + l.name + "': maxpool needs a CHW input");
        }
        out = {cur[0], window_out(cur[1], l.kernel_h, l.stride_h, 0, l.name),
               window_out(cur[2], l.kernel_w, l.stride_w, 0, l.name)};
        break;
      case LayerKind::Relu:
      case LayerKind::Softmax:
        out = cur;
        break;
    }
    if (l.kind == LayerKind::Softmax && i + 1 != layers_.size()) {
      throw ValidationError("layer '" + l.name + "': softmax must be the last layer");
    }
    if (l.is_weighted()) {
      relus_since_weighted = 0;
      (l.weights && l.bias ? any_weights : any_missing) = true;
      if (l.weights && l.bias &&
          l.bias->format.f_bits > l.weights->format.f_bits + activation_format_.f_bits()) {
        throw ValidationError("layer '" + l.name +
                              "': bias has more fractional bits than the accumulator");
      }
    } else if (l.kind == LayerKind::Relu && ++relus_since_weighted > 1) {
      throw ValidationError("layer '" + l.name + "': more than one relu after a weighted layer");
    }
    if (l.output_dims.empty()) {
      l.output_dims = out;
    } else if (l.output_dims != out) {
      throw DimensionError("layer '" + l.name + "': declared output dims " +
                           dims_str(l.output_dims) + " but input and params give " +
                           dims_str(out));
    }
    cur = out;
  }
  if (any_weights && any_missing) {
    throw ValidationError("model mixes weighted and topology-only layers");
  }
  has_weights_ = !any_missing;

  for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
    if (layers_[i].is_weighted() && layers_[i + 1].kind == LayerKind::Relu) {
      quantizable_.push_back(layers_[i].name);
    }
  }
}

std::size_t ModelGraph::num_classes() const noexcept {
  return element_count(layers_.back().output_dims);
}

const LayerDef* ModelGraph::find(std::string_view name) const noexcept {
  for (const auto& l : layers_) {
    if (l.name == name) return &l;
  }
  return nullptr;
}

std::optional<std::size_t> ModelGraph::index_of(std::string_view name) const noexcept {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].name == name) return i;
  }
  return std::nullopt;
}

std::vector<std::string> ModelGraph::quantizable_conv_layers() const {
  std::vector<std::string> out;
  for (const auto& name : quantizable_) {
    if (find(name)->kind == LayerKind::Conv2d) out.push_back(name);
  }
  return out;
}

bool ModelGraph::is_quantizable(std::string_view name) const noexcept {
  return std::find(quantizable_.begin(), quantizable_.end(), name) != quantizable_.end();
}

std::size_t ModelGraph::relu_index(std::string_view name) const {
  const auto idx = index_of(name);
  if (!idx || !is_quantizable(name)) {
    throw ValidationError("layer '" + std::string(name) + "' is not a quantizable layer");
  }
  return *idx + 1;
}

// ---------------------------------------------------------------------------
// Manifest loading

namespace {

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

Shape to_shape(const json& j, const std::string& where) {
  if (!j.is_array()) throw ParseError(where + ": expected an array of extents");
  Shape s;
  for (const auto& v : j) {
    if (!v.is_number_unsigned() || v.get<std::uint64_t>() == 0) {
      throw ParseError(where + ": extents must be positive integers");
    }
    s.push_back(v.get<std::size_t>());
  }
  return s;
}

std::pair<int, int> pair_param(const json& layer, const char* key, int fallback,
                               const std::string& where) {
  if (!layer.contains(key)) return {fallback, fallback};
  const auto& v = layer.at(key);
  if (v.is_number_integer()) return {v.get<int>(), v.get<int>()};
  if (v.is_array() && v.size() == 2) return {v[0].get<int>(), v[1].get<int>()};
  throw ParseError(where + ": '" + key + "' must be an integer or a pair");
}

WeightTensor read_tensor(const json& j, const std::vector<std::uint8_t>& blob,
                         const std::string& where) {
  WeightTensor t;
  t.dims = to_shape(j.at("dims"), where + ".dims");
  const auto& f = j.at("format");
  t.format.q_bits = f.at("q_bits").get<int>();
  t.format.f_bits = f.at("f_bits").get<int>();
  if (f.contains("encoding") && f.at("encoding") != "twos_complement") {
    throw ParseError(where + ": unsupported weight encoding");
  }
  const auto offset = j.at("offset").get<std::size_t>();
  const auto length = j.at("length").get<std::size_t>();
  if (length != element_count(t.dims)) {
    throw DimensionError(where + ": length " + std::to_string(length) +
                         " does not match dims " + dims_str(t.dims));
  }
  if (offset % 2 != 0 || offset + 2 * length > blob.size()) {
    throw ParseError(where + ": tensor range lies outside the blob");
  }
  if (t.format.q_bits < 2 || t.format.q_bits > 16) {
    throw ParseError(where + ": weight q_bits out of range");
  }
  const std::uint32_t lane_limit = 1u << t.format.q_bits;
  const std::int32_t half = 1 << (t.format.q_bits - 1);
  t.values.resize(length);
  for (std::size_t i = 0; i < length; ++i) {
    const std::uint32_t raw =
        blob[offset + 2 * i] | (static_cast<std::uint32_t>(blob[offset + 2 * i + 1]) << 8);
    if (raw >= lane_limit) throw ParseError(where + ": code exceeds its bit width");
    const auto v = static_cast<std::int32_t>(raw);
    t.values[i] = v >= half ? v - static_cast<std::int32_t>(lane_limit) : v;
  }
  return t;
}

}  // namespace

ModelGraph load_model(const std::string& path) {
  json doc;
  {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model manifest '" + path + "'");
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw ParseError("model manifest '" + path + "': " + e.what());
    }
  }
  try {
    if (doc.value("format", std::string{}) != "nuq-model") {
      throw ParseError("model manifest '" + path + "': not a nuq-model document");
    }
    const bool topology_only = doc.value("topology_only", false);
    std::vector<std::uint8_t> blob;
    if (!topology_only) {
      const fs::path blob_path = fs::path(path).parent_path() / doc.at("blob").get<std::string>();
      blob = read_file(blob_path);
    }
    const auto& af = doc.at("activation_format");
    const FxFormat act(af.at("q_bits").get<int>(), af.at("f_bits").get<int>());

    std::vector<LayerDef> layers;
    for (const auto& jl : doc.at("layers")) {
      LayerDef l;
      l.name = jl.at("name").get<std::string>();
      const std::string where = "layer '" + l.name + "'";
      l.kind = parse_layer_kind(jl.at("kind").get<std::string>());
      if (jl.contains("output_dims")) l.output_dims = to_shape(jl.at("output_dims"), where);
      if (l.kind == LayerKind::Conv2d || l.kind == LayerKind::MaxPool) {
        std::tie(l.kernel_h, l.kernel_w) = pair_param(jl, "kernel", 0, where);
        std::tie(l.stride_h, l.stride_w) = pair_param(jl, "stride", 1, where);
        std::tie(l.pad_h, l.pad_w) = pair_param(jl, "padding", 0, where);
      }
      if (l.kind == LayerKind::Conv2d) {
        l.in_channels = jl.at("in_channels").get<int>();
        l.out_channels = jl.at("out_channels").get<int>();
      }
      if (l.kind == LayerKind::FullyConnected) {
        l.in_features = jl.at("in_features").get<int>();
        l.out_features = jl.at("out_features").get<int>();
      }
      if (l.is_weighted() && !topology_only) {
        l.weights = read_tensor(jl.at("weights"), blob, where + " weights");
        l.bias = read_tensor(jl.at("bias"), blob, where + " bias");
      }
      layers.push_back(std::move(l));
    }
    return ModelGraph(doc.value("name", std::string{}),
                      to_shape(doc.at("input_dims"), "input_dims"), act, std::move(layers));
  } catch (const json::exception& e) {
    throw ParseError("model manifest '" + path + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Quantization configs

QuantConfig& QuantConfig::set(const std::string& layer, LayerQuantSpec spec) {
  spec.validate(master_);
  layers_[layer] = std::move(spec);
  return *this;
}

const LayerQuantSpec* QuantConfig::find(std::string_view layer) const noexcept {
  const auto it = layers_.find(std::string(layer));
  return it == layers_.end() ? nullptr : &it->second;
}

void QuantConfig::validate(const ModelGraph& model) const {
  if (!(master_ == model.activation_format())) {
    throw ValidationError("quantization config master format differs from the model's");
  }
  for (const auto& [name, spec] : layers_) {
    if (!model.find(name)) {
      throw ValidationError("quantization config names unknown layer '" + name + "'");
    }
    if (!model.is_quantizable(name)) {
      throw ValidationError("layer '" + name + "' is not followed by a relu and cannot be quantized");
    }
    spec.validate(master_);
  }
}

QuantConfig QuantConfig::all_uniform(const ModelGraph& model, int bits, int f_bits) {
  QuantConfig cfg(model.activation_format());
  for (const auto& name : model.quantizable_layers()) {
    cfg.set(name, LayerQuantSpec::uniform(bits, f_bits));
  }
  return cfg;
}

QuantConfig QuantConfig::all_enq(const ModelGraph& model, int bits) {
  QuantConfig cfg(model.activation_format());
  for (const auto& name : model.quantizable_layers()) {
    cfg.set(name, LayerQuantSpec::enq(bits));
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Forward engine

namespace {

void conv2d(const LayerDef& l, const Shape& in_dims, const ActivationMap& in,
            ActivationMap& out, int act_f) {
  const auto& w = *l.weights;
  const auto& b = *l.bias;
  const std::size_t C = in_dims[0], H = in_dims[1], W = in_dims[2];
  const std::size_t OC = l.output_dims[0], OH = l.output_dims[1], OW = l.output_dims[2];
  const int wf = w.format.f_bits;
  const int bias_shift = wf + act_f - b.format.f_bits;
  const long long kh_n = l.kernel_h, kw_n = l.kernel_w;
  const long long sh = l.stride_h, sw = l.stride_w, ph = l.pad_h, pw = l.pad_w;

  out.assign(OC * OH * OW, 0);
  std::vector<std::int64_t> acc(OH * OW);
  for (std::size_t oc = 0; oc < OC; ++oc) {
    std::fill(acc.begin(), acc.end(), 0);
    for (std::size_t ic = 0; ic < C; ++ic) {
      const std::int64_t* plane = in.data() + ic * H * W;
      for (long long kh = 0; kh < kh_n; ++kh) {
        for (long long kw = 0; kw < kw_n; ++kw) {
          const std::int64_t wv =
              w.values[((oc * C + ic) * kh_n + kh) * kw_n + kw];
          if (wv == 0) continue;
          // Output columns whose input column ow*sw - pw + kw lies in [0, W).
          long long ow_lo = pw - kw > 0 ? (pw - kw + sw - 1) / sw : 0;
          long long ow_hi = (static_cast<long long>(W) - 1 + pw - kw);
          ow_hi = ow_hi < 0 ? -1 : std::min<long long>(ow_hi / sw, OW - 1);
          for (long long oh = 0; oh < static_cast<long long>(OH); ++oh) {
            const long long ih = oh * sh - ph + kh;
            if (ih < 0 || ih >= static_cast<long long>(H)) continue;
            const std::int64_t* row = plane + ih * W;
            std::int64_t* arow = acc.data() + oh * OW;
            for (long long ow = ow_lo; ow <= ow_hi; ++ow) {
              arow[ow] += wv * row[ow * sw - pw + kw];
            }
          }
        }
      }
    }
    const std::int64_t bias = static_cast<std::int64_t>(b.values[oc]) << bias_shift;
    std::int64_t* dst = out.data() + oc * OH * OW;
    for (std::size_t i = 0; i < OH * OW; ++i) dst[i] = round_shift_right(acc[i] + bias, wf);
  }
}

void fully_connected(const LayerDef& l, const ActivationMap& in, ActivationMap& out,
                     int act_f) {
  const auto& w = *l.weights;
  const auto& b = *l.bias;
  const std::size_t IN = l.in_features, OUT = l.out_features;
  const int wf = w.format.f_bits;
  const int bias_shift = wf + act_f - b.format.f_bits;
  out.assign(OUT, 0);
  for (std::size_t o = 0; o < OUT; ++o) {
    const std::int32_t* row = w.values.data() + o * IN;
    std::int64_t acc = static_cast<std::int64_t>(b.values[o]) << bias_shift;
    for (std::size_t i = 0; i < IN; ++i) acc += static_cast<std::int64_t>(row[i]) * in[i];
    out[o] = round_shift_right(acc, wf);
  }
}

void max_pool(const LayerDef& l, const Shape& in_dims, const ActivationMap& in,
              ActivationMap& out) {
  const std::size_t H = in_dims[1], W = in_dims[2];
  const std::size_t C = l.output_dims[0], OH = l.output_dims[1], OW = l.output_dims[2];
  out.assign(C * OH * OW, 0);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t oh = 0; oh < OH; ++oh) {
      for (std::size_t ow = 0; ow < OW; ++ow) {
        std::int64_t m = in[(c * H + oh * l.stride_h) * W + ow * l.stride_w];
        for (int kh = 0; kh < l.kernel_h; ++kh) {
          const std::int64_t* row = in.data() + (c * H + oh * l.stride_h + kh) * W + ow * l.stride_w;
          for (int kw = 0; kw < l.kernel_w; ++kw) m = std::max(m, row[kw]);
        }
        out[(c * OH + oh) * OW + ow] = m;
      }
    }
  }
}

}  // namespace

ActivationMap run_layers(const ModelGraph& model, ActivationMap act, std::size_t begin,
                         std::size_t end, const QuantConfig& cfg, const ActivationTap& tap) {
  const auto& layers = model.layers();
  if (begin > end || end > layers.size()) throw RangeError("run_layers: bad layer range");
  if (!model.has_weights()) {
    throw ValidationError("model '" + model.name() + "' is topology-only and cannot run inference");
  }
  const int act_f = model.activation_format().f_bits();
  ActivationMap next;
  for (std::size_t i = begin; i < end; ++i) {
    const LayerDef& l = layers[i];
    const Shape& in_dims = i == 0 ? model.input_dims() : layers[i - 1].output_dims;
    switch (l.kind) {
      case LayerKind::Conv2d:
        conv2d(l, in_dims, act, next, act_f);
        act.swap(next);
        break;
      case LayerKind::FullyConnected:
        fully_connected(l, act, next, act_f);
        act.swap(next);
        break;
      case LayerKind::MaxPool:
        max_pool(l, in_dims, act, next);
        act.swap(next);
        break;
      case LayerKind::Relu: {
        for (auto& v : act) v = std::max<std::int64_t>(v, 0);
        if (i == 0 || !layers[i - 1].is_weighted()) break;
        const std::string& owner = layers[i - 1].name;
        if (tap) tap(owner, act);
        if (const LayerQuantSpec* spec = cfg.find(owner)) {
          for (auto& v : act) v = requantize(v, *spec, cfg.master());
        }
        break;
      }
      case LayerKind::Softmax:
        break;
    }
  }
  return act;
}

std::vector<std::int64_t> forward(const ModelGraph& model, const Tensor& input,
                                  const QuantConfig& cfg, const ActivationTap& tap) {
  if (input.dims() != model.input_dims()) {
    throw DimensionError("input dims " + dims_str(input.dims()) + " do not match model input " +
                         dims_str(model.input_dims()));
  }
  const auto* fixed = std::get_if<FixedStorage>(&input.kind());
  if (!fixed || !(fixed->format == model.activation_format())) {
    throw ValidationError("input must be fixed-point codes in the model's activation format");
  }
  cfg.validate(model);
  const auto codes = input.codes();
  ActivationMap act(codes.begin(), codes.end());
  return run_layers(model, std::move(act), 0, model.layers().size(), cfg, tap);
}

std::vector<double> softmax(std::span<const std::int64_t> scores, FxFormat fmt) {
  std::vector<double> p(scores.size());
  if (scores.empty()) return p;
  const auto mx = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    p[i] = std::exp(std::ldexp(static_cast<double>(scores[i] - mx), -fmt.f_bits()));
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

bool in_top_k(std::span<const std::int64_t> scores, std::size_t label, std::size_t k) {
  if (label >= scores.size()) return false;
  // Rank of the label: entries that beat it, with ties going to lower indices.
  std::size_t ahead = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] > scores[label] || (scores[i] == scores[label] && i < label)) ++ahead;
  }
  return ahead < k;
}

// ---------------------------------------------------------------------------
// Datasets and evaluation

Dataset Dataset::head(std::size_t n) const {
  Dataset d;
  const std::size_t m = std::min(n, size());
  d.names.assign(names.begin(), names.begin() + static_cast<std::ptrdiff_t>(m));
  d.inputs.assign(inputs.begin(), inputs.begin() + static_cast<std::ptrdiff_t>(m));
  d.labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(m));
  return d;
}

Dataset load_dataset(const std::string& dir, const Shape& dims, FxFormat fmt,
                     std::size_t limit) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw IoError("dataset directory '" + dir + "' does not exist");
  const fs::path labels_path = root / "labels.csv";
  if (!fs::exists(labels_path)) {
    throw ValidationError("dataset directory '" + dir + "' has no labels.csv (empty dataset)");
  }
  std::ifstream in(labels_path);
  if (!in) throw IoError("cannot open '" + labels_path.string() + "'");
  Dataset data;
  const std::size_t n = element_count(dims);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#' || line == "filename,label") continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) {
      throw ParseError("labels.csv line " + std::to_string(line_no) + ": expected filename,label");
    }
    const std::string file = line.substr(0, comma);
    const std::string label = line.substr(comma + 1);
    if (label.empty() || label.find_first_not_of("0123456789") != std::string::npos) {
      throw ParseError("labels.csv line " + std::to_string(line_no) + ": bad label '" + label + "'");
    }
    const auto bytes = read_file(root / file);
    if (bytes.size() != 2 * n) {
      throw DimensionError("dataset file '" + file + "' holds " + std::to_string(bytes.size()) +
                           " bytes, expected " + std::to_string(2 * n));
    }
    std::vector<std::uint32_t> codes(n);
    for (std::size_t i = 0; i < n; ++i) {
      codes[i] = bytes[2 * i] | (static_cast<std::uint32_t>(bytes[2 * i + 1]) << 8);
    }
    data.names.push_back(file);
    data.inputs.push_back(Tensor::fixed(dims, std::move(codes), fmt));
    data.labels.push_back(std::stoull(label));
    if (limit && data.size() >= limit) break;
  }
  return data;
}

void check_labels(const Dataset& data, const ModelGraph& model) {
  const std::size_t classes = model.num_classes();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.labels[i] >= classes) {
      throw ValidationError("sample '" + (i < data.names.size() ? data.names[i] : std::to_string(i)) +
                            "' has label " + std::to_string(data.labels[i]) +
                            " outside the model's " + std::to_string(classes) + " classes");
    }
  }
}

Dataset load_dataset(const std::string& dir, const ModelGraph& model, std::size_t limit) {
  Dataset data = load_dataset(dir, model.input_dims(), model.activation_format(), limit);
  check_labels(data, model);
  return data;
}

EvalResult evaluate_counts(const ModelGraph& model, const Dataset& data,
                           const QuantConfig& cfg, std::size_t k) {
  if (data.size() == 0) throw ValidationError("cannot evaluate on an empty dataset");
  if (k < 1) throw ValidationError("top-k must be >= 1");
  check_labels(data, model);
  cfg.validate(model);
  std::vector<std::uint8_t> hit(data.size(), 0);
  detail::parallel_for(data.size(), [&](std::size_t i) {
    const auto scores = forward(model, data.inputs[i], cfg);
    hit[i] = in_top_k(scores, data.labels[i], k) ? 1 : 0;
  });
  EvalResult r;
  r.total = data.size();
  for (auto h : hit) r.correct += h;
  return r;
}

double evaluate(const ModelGraph& model, const Dataset& data, const QuantConfig& cfg,
                std::size_t k) {
  return evaluate_counts(model, data, cfg, k).accuracy();
}

}  // namespace nuq

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

// Layer-chain CNN graphs with 14-bit fixed-point weights and an integer
// forward engine with per-layer activation quantization.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nuq/fxcore.hpp"
#include "nuq/quant.hpp"

namespace nuq {

enum class LayerKind { Conv2d, Relu, MaxPool, FullyConnected, Softmax };

const char* to_string(LayerKind kind) noexcept;
LayerKind parse_layer_kind(std::string_view text);

/// Signed two's-complement weight format. Codes are stored in the low
/// `q_bits` of a 16-bit lane.
struct WeightFormat {
  int q_bits = 14;
  int f_bits = 0;

  friend bool operator==(const WeightFormat&, const WeightFormat&) = default;
};

inline constexpr int kWeightBits = 14;

struct WeightTensor {
  Shape dims;
  WeightFormat format;
  std::vector<std::int32_t> values;  // decoded signed codes, row-major
};

struct LayerDef {
  std::string name;
  LayerKind kind = LayerKind::Relu;

  // conv2d / maxpool
  int kernel_h = 0, kernel_w = 0;
  int stride_h = 1, stride_w = 1;
  int pad_h = 0, pad_w = 0;
  int in_channels = 0, out_channels = 0;
  // fullyconnected
  int in_features = 0, out_features = 0;

  // Empty for topology-only graphs.
  std::optional<WeightTensor> weights;
  std::optional<WeightTensor> bias;

  Shape output_dims;

  bool is_weighted() const noexcept {
    return kind == LayerKind::Conv2d || kind == LayerKind::FullyConnected;
  }
};

/// Validated layer chain. Immutable after construction.
class ModelGraph {
 public:
  /// Checks chain consistency and per-layer dims. Throws DimensionError
  /// naming the offending layer, ValidationError for other defects.
  ModelGraph(std::string name, Shape input_dims, FxFormat activation_format,
             std::vector<LayerDef> layers);

  const std::string& name() const noexcept { return name_; }
  const Shape& input_dims() const noexcept { return input_dims_; }
  /// The master activation format q_m: inputs and inter-layer activations.
  const FxFormat& activation_format() const noexcept { return activation_format_; }
  const std::vector<LayerDef>& layers() const noexcept { return layers_; }
  bool has_weights() const noexcept { return has_weights_; }
  std::size_t num_classes() const noexcept;

  const LayerDef* find(std::string_view name) const noexcept;
  std::optional<std::size_t> index_of(std::string_view name) const noexcept;

  /// Weighted layers directly followed by a ReLU, in chain order. These are
  /// the layers whose activations get quantized and stored.
  const std::vector<std::string>& quantizable_layers() const noexcept {
    return quantizable_;
  }
  /// Quantizable conv2d layers only.
  std::vector<std::string> quantizable_conv_layers() const;
  bool is_quantizable(std::string_view name) const noexcept;
  /// Index of the ReLU that follows quantizable layer `name`.
  std::size_t relu_index(std::string_view name) const;

 private:
  std::string name_;
  Shape input_dims_;
  FxFormat activation_format_;
  std::vector<LayerDef> layers_;
  std::vector<std::string> quantizable_;
  bool has_weights_ = true;
};

/// Reads a JSON manifest plus the sidecar blob it references.
ModelGraph load_model(const std::string& path);

/// Layer name -> quantizer for the activations after that layer's ReLU.
/// Layers not present stay unquantized: their codes keep the master
/// fractional bits with no range limit.
class QuantConfig {
 public:
  QuantConfig() = default;
  explicit QuantConfig(FxFormat master) : master_(master) {}

  const FxFormat& master() const noexcept { return master_; }
  const std::map<std::string, LayerQuantSpec>& layers() const noexcept {
    return layers_;
  }
  bool empty() const noexcept { return layers_.empty(); }

  QuantConfig& set(const std::string& layer, LayerQuantSpec spec);
  const LayerQuantSpec* find(std::string_view layer) const noexcept;

  /// Every layer must be quantizable in `model` and every spec valid.
  void validate(const ModelGraph& model) const;

  /// Same scheme on every quantizable layer.
  static QuantConfig all_uniform(const ModelGraph& model, int bits, int f_bits);
  static QuantConfig all_enq(const ModelGraph& model, int bits);

 private:
  FxFormat master_;
  std::map<std::string, LayerQuantSpec> layers_;
};

/// Called with the post-ReLU, pre-quantization codes of each quantizable
/// layer.
using ActivationTap =
    std::function<void(const std::string& layer, std::span<const std::int64_t> codes)>;

/// Activations as signed codes at the master fractional bits.
using ActivationMap = std::vector<std::int64_t>;

/// Runs layers [begin, end) on `act` (the codes entering layer `begin`).
/// Quantization is applied at every ReLU whose weighted layer is in cfg.
ActivationMap run_layers(const ModelGraph& model, ActivationMap act,
                         std::size_t begin, std::size_t end, const QuantConfig& cfg,
                         const ActivationTap& tap = {});

/// Full forward pass. Returns class scores as codes at the master fractional
/// bits (pre-softmax). Input must be a fixed tensor in the master format.
std::vector<std::int64_t> forward(const ModelGraph& model, const Tensor& input,
                                  const QuantConfig& cfg,
                                  const ActivationTap& tap = {});

std::vector<double> softmax(std::span<const std::int64_t> scores, FxFormat fmt);

/// True when `label` is among the k largest scores (ties to the lower index).
bool in_top_k(std::span<const std::int64_t> scores, std::size_t label, std::size_t k);

struct Dataset {
  std::vector<std::string> names;
  std::vector<Tensor> inputs;
  std::vector<std::size_t> labels;

  std::size_t size() const noexcept { return inputs.size(); }
  /// First n samples (or all when n >= size()).
  Dataset head(std::size_t n) const;
};

/// Loads `labels.csv` (filename,label) and one little-endian u16 tensor per
/// line. Each tensor must hold element_count(dims) codes in `fmt`.
Dataset load_dataset(const std::string& dir, const Shape& dims, FxFormat fmt,
                     std::size_t limit = 0);
/// Loads with the model's input dims and format, and checks labels against
/// its class count.
Dataset load_dataset(const std::string& dir, const ModelGraph& model,
                     std::size_t limit = 0);
void check_labels(const Dataset& data, const ModelGraph& model);

struct EvalResult {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const noexcept {
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  }
};

/// Top-k accuracy. Samples are processed in parallel; the result does not
/// depend on the thread count.
EvalResult evaluate_counts(const ModelGraph& model, const Dataset& data,
                           const QuantConfig& cfg, std::size_t k);
double evaluate(const ModelGraph& model, const Dataset& data, const QuantConfig& cfg,
                std::size_t k);

}  // namespace nuq

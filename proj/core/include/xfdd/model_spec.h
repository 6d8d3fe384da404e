/*
 * Copyright 2026 The xfdd Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Declarative layer stacks, shape propagation and parameter accounting.

#ifndef XFDD_MODEL_SPEC_H_
#define XFDD_MODEL_SPEC_H_

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

namespace xfdd::nn {

struct Conv1dSpec {
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t padding = 1;
};
struct BatchNormSpec {
  double eps = 1e-5;
  double momentum = 0.1;
};
struct ReluSpec {};
struct MaxPoolSpec {
  std::size_t kernel = 2;
  std::size_t stride = 1;
};

enum class CellKind { kGru, kRnn, kLstm };

struct RecurrentSpec {
  CellKind cell = CellKind::kGru;
  std::size_t hidden = 0;
  std::size_t layers = 1;
};
struct LinearSpec {
  std::size_t out_features = 0;
};
struct DropoutSpec {
  double rate = 0.0;
};

using LayerSpec = std::variant<Conv1dSpec, BatchNormSpec, ReluSpec, MaxPoolSpec,
                               RecurrentSpec, LinearSpec, DropoutSpec>;

// Input is [channels x window]; the last layer must emit `classes` logits.
struct ModelSpec {
  std::string name;
  std::size_t input_channels = 0;
  std::size_t window = 0;
  std::size_t classes = 7;
  std::vector<LayerSpec> layers;
};

// Activation shape between layers, without the batch axis.
struct ActivationShape {
  bool sequence = true;  // [channels x length] when true, [features] otherwise
  std::size_t channels = 0;
  std::size_t length = 0;
  std::size_t features = 0;
};

struct LayerSummary {
  std::string name;          // "Conv1d-1"
  std::string output_shape;  // "[-1, 32, 500]"
  std::size_t params = 0;    // every trainable parameter of the layer
  bool recurrent = false;
  // Recurrent rows report 0 in the published layer tables.
  std::size_t table_params() const { return recurrent ? 0 : params; }
};

struct ParamCounts {
  std::vector<LayerSummary> layers;
  std::size_t non_recurrent = 0;
  std::size_t recurrent = 0;
  std::size_t total = 0;
  // Convention of the published layer tables, where recurrent rows show 0.
  std::size_t table_total() const { return non_recurrent; }
};

std::string LayerKindName(const LayerSpec& layer);

// Propagates shapes through `spec`. Throws ShapeError naming the first layer
// whose input shape it cannot accept, or when the head does not emit
// `classes` features.
ParamCounts CountParams(const ModelSpec& spec);
std::vector<ActivationShape> PropagateShapes(const ModelSpec& spec);

// Per-layer parameter count of a recurrent stack with one bias per gate.
std::size_t RecurrentParamCount(CellKind cell, std::size_t input,
                                std::size_t hidden, std::size_t layers);

struct ArchOptions {
  std::size_t input_channels = 24;
  std::size_t window = 500;
  std::size_t classes = 7;
  std::size_t channel_divisor = 1;  // scales every conv width down
  std::size_t hidden = 512;
  std::size_t recurrent_layers = 2;
  std::size_t fc_hidden = 128;
  double dropout = 0.3;
};

// Fault type classification model: 4 conv blocks 32..256, last pool stride 2.
ModelSpec FtcmSpec(const ArchOptions& opts = {});
// Fault localisation model: 5 conv blocks 32..512, all pools stride 1.
ModelSpec FlmSpec(const ArchOptions& opts = {});
// Recurrent stack over the raw window followed by a single linear head.
ModelSpec BaselineSpec(CellKind cell, std::size_t hidden, std::size_t layers,
                       std::size_t input_channels, std::size_t window,
                       std::size_t classes = 7);
// Generic conv-recurrent-FC stack used by the grid search.
ModelSpec HybridSpec(std::size_t conv_layers, std::size_t recurrent_layers,
                     std::size_t hidden, std::size_t fc_layers,
                     const ArchOptions& opts);

CellKind ParseCellKind(const std::string& name);
std::string CellKindName(CellKind cell);

}  // namespace xfdd::nn

#endif  // XFDD_MODEL_SPEC_H_

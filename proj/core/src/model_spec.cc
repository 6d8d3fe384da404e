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

#include "xfdd/model_spec.h"

#include <algorithm>
#include <sstream>

#include "xfdd/error.h"

namespace xfdd::nn {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string SeqShape(std::size_t c, std::size_t l) {
  return "[-1, " + std::to_string(c) + ", " + std::to_string(l) + "]";
}

std::string VecShape(std::size_t f) {
  return "[-1, " + std::to_string(f) + "]";
}

std::size_t GateCount(CellKind cell) {
  switch (cell) {
    case CellKind::kGru: return 3;
    case CellKind::kRnn: return 1;
    case CellKind::kLstm: return 4;
  }
  return 0;
}

struct Step {
  ActivationShape out;
  std::string shape_text;
  std::size_t params = 0;
  bool recurrent = false;
};

Step Apply(const LayerSpec& layer, const ActivationShape& in,
           const std::string& name) {
  auto fail = [&](const std::string& why) -> ShapeError {
    return ShapeError("layer " + name + ": " + why);
  };
  Step s;
  std::visit(
      Overloaded{
          [&](const Conv1dSpec& c) {
            if (!in.sequence) throw fail("expects a sequence input");
            if (c.out_channels == 0 || c.kernel == 0 || c.stride == 0) {
              throw fail("channels, kernel and stride must be positive");
            }
            if (in.length + 2 * c.padding < c.kernel) {
              throw fail("kernel longer than padded input length " +
                         std::to_string(in.length));
            }
            s.out = {true, c.out_channels,
                     (in.length + 2 * c.padding - c.kernel) / c.stride + 1, 0};
            s.params = c.out_channels * in.channels * c.kernel + c.out_channels;
          },
          [&](const BatchNormSpec&) {
            if (!in.sequence) throw fail("expects a sequence input");
            s.out = in;
            s.params = 2 * in.channels;
          },
          [&](const ReluSpec&) { s.out = in; },
          [&](const DropoutSpec& d) {
            if (d.rate < 0.0 || d.rate >= 1.0) throw fail("rate outside [0, 1)");
            s.out = in;
          },
          [&](const MaxPoolSpec& p) {
            if (!in.sequence) throw fail("expects a sequence input");
            if (p.kernel == 0 || p.stride == 0) {
              throw fail("kernel and stride must be positive");
            }
            if (p.kernel > in.length) {
              throw fail("kernel exceeds input length " +
                         std::to_string(in.length));
            }
            s.out = {true, in.channels, (in.length - p.kernel) / p.stride + 1, 0};
          },
          [&](const RecurrentSpec& r) {
            if (!in.sequence) throw fail("expects a sequence input");
            if (r.hidden == 0 || r.layers == 0) {
              throw fail("hidden size and layer count must be positive");
            }
            s.out = {false, 0, 0, r.hidden};
            s.params = RecurrentParamCount(r.cell, in.channels, r.hidden, r.layers);
            s.recurrent = true;
            s.shape_text = "[[[-1, " + std::to_string(in.length) + ", " +
                           std::to_string(r.hidden) + "], [-1, " +
                           std::to_string(r.layers) + ", " +
                           std::to_string(r.hidden) + "]]]";
          },
          [&](const LinearSpec& l) {
            if (in.sequence) throw fail("expects a vector input");
            if (l.out_features == 0) throw fail("zero output features");
            s.out = {false, 0, 0, l.out_features};
            s.params = l.out_features * in.features + l.out_features;
          },
      },
      layer);
  if (s.shape_text.empty()) {
    s.shape_text = s.out.sequence ? SeqShape(s.out.channels, s.out.length)
                                  : VecShape(s.out.features);
  }
  return s;
}

}  // namespace

std::string LayerKindName(const LayerSpec& layer) {
  return std::visit(
      Overloaded{
          [](const Conv1dSpec&) { return std::string("Conv1d"); },
          [](const BatchNormSpec&) { return std::string("BatchNorm1d"); },
          [](const ReluSpec&) { return std::string("ReLU"); },
          [](const MaxPoolSpec&) { return std::string("MaxPool1d"); },
          [](const RecurrentSpec& r) { return CellKindName(r.cell); },
          [](const LinearSpec&) { return std::string("Linear"); },
          [](const DropoutSpec&) { return std::string("Dropout"); },
      },
      layer);
}

std::size_t RecurrentParamCount(CellKind cell, std::size_t input,
                                std::size_t hidden, std::size_t layers) {
  std::size_t total = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t d = l == 0 ? input : hidden;
    total += GateCount(cell) * (hidden * d + hidden * hidden + hidden);
  }
  return total;
}

std::vector<ActivationShape> PropagateShapes(const ModelSpec& spec) {
  if (spec.input_channels == 0 || spec.window == 0) {
    throw ShapeError("model input must have positive channels and window");
  }
  std::vector<ActivationShape> shapes;
  ActivationShape cur{true, spec.input_channels, spec.window, 0};
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const std::string name =
        LayerKindName(spec.layers[i]) + "-" + std::to_string(i + 1);
    cur = Apply(spec.layers[i], cur, name).out;
    shapes.push_back(cur);
  }
  return shapes;
}

ParamCounts CountParams(const ModelSpec& spec) {
  if (spec.layers.empty()) {
    throw ShapeError("model has no layers, so no classification head");
  }
  ParamCounts counts;
  ActivationShape cur{true, spec.input_channels, spec.window, 0};
  if (spec.input_channels == 0 || spec.window == 0) {
    throw ShapeError("model input must have positive channels and window");
  }
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const std::string name =
        LayerKindName(spec.layers[i]) + "-" + std::to_string(i + 1);
    Step s = Apply(spec.layers[i], cur, name);
    counts.layers.push_back({name, s.shape_text, s.params, s.recurrent});
    (s.recurrent ? counts.recurrent : counts.non_recurrent) += s.params;
    cur = s.out;
  }
  if (cur.sequence || cur.features != spec.classes) {
    throw ShapeError("model head emits " +
                     (cur.sequence ? std::string("a sequence")
                                   : std::to_string(cur.features)) +
                     " outputs, expected " + std::to_string(spec.classes) +
                     " class logits");
  }
  counts.total = counts.non_recurrent + counts.recurrent;
  return counts;
}

namespace {

void AppendConvBlocks(ModelSpec& spec, const std::vector<std::size_t>& widths,
                      const std::vector<std::size_t>& pool_strides,
                      std::size_t divisor) {
  for (std::size_t i = 0; i < widths.size(); ++i) {
    spec.layers.push_back(
        Conv1dSpec{std::max<std::size_t>(1, widths[i] / divisor), 3, 1, 1});
    spec.layers.push_back(BatchNormSpec{});
    spec.layers.push_back(ReluSpec{});
    spec.layers.push_back(MaxPoolSpec{2, pool_strides[i]});
  }
}

void AppendHead(ModelSpec& spec, std::size_t fc_layers, const ArchOptions& o) {
  for (std::size_t i = 0; i + 1 < fc_layers; ++i) {
    spec.layers.push_back(LinearSpec{o.fc_hidden});
    spec.layers.push_back(ReluSpec{});
    spec.layers.push_back(DropoutSpec{o.dropout});
  }
  spec.layers.push_back(LinearSpec{o.classes});
}

ModelSpec Base(const std::string& name, const ArchOptions& o) {
  ModelSpec spec;
  spec.name = name;
  spec.input_channels = o.input_channels;
  spec.window = o.window;
  spec.classes = o.classes;
  return spec;
}

}  // namespace

ModelSpec FtcmSpec(const ArchOptions& o) {
  ModelSpec spec = Base("ftcm", o);
  AppendConvBlocks(spec, {32, 64, 128, 256}, {1, 1, 1, 2}, o.channel_divisor);
  spec.layers.push_back(RecurrentSpec{CellKind::kGru, o.hidden, o.recurrent_layers});
  AppendHead(spec, 2, o);
  return spec;
}

ModelSpec FlmSpec(const ArchOptions& o) {
  ModelSpec spec = Base("flm", o);
  AppendConvBlocks(spec, {32, 64, 128, 256, 512}, {1, 1, 1, 1, 1},
                   o.channel_divisor);
  spec.layers.push_back(RecurrentSpec{CellKind::kGru, o.hidden, o.recurrent_layers});
  AppendHead(spec, 2, o);
  return spec;
}

ModelSpec BaselineSpec(CellKind cell, std::size_t hidden, std::size_t layers,
                       std::size_t input_channels, std::size_t window,
                       std::size_t classes) {
  ModelSpec spec;
  spec.name = CellKindName(cell);
  std::transform(spec.name.begin(), spec.name.end(), spec.name.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  spec.input_channels = input_channels;
  spec.window = window;
  spec.classes = classes;
  spec.layers.push_back(RecurrentSpec{cell, hidden, layers});
  spec.layers.push_back(LinearSpec{classes});
  return spec;
}

ModelSpec HybridSpec(std::size_t conv_layers, std::size_t recurrent_layers,
                     std::size_t hidden, std::size_t fc_layers,
                     const ArchOptions& o) {
  ModelSpec spec = Base("hybrid", o);
  std::vector<std::size_t> widths, strides;
  for (std::size_t i = 0; i < conv_layers; ++i) {
    widths.push_back(std::size_t{32} << std::min<std::size_t>(i, 4));
    strides.push_back(1);
  }
  AppendConvBlocks(spec, widths, strides, o.channel_divisor);
  spec.layers.push_back(RecurrentSpec{CellKind::kGru, hidden, recurrent_layers});
  AppendHead(spec, std::max<std::size_t>(1, fc_layers), o);
  return spec;
}

CellKind ParseCellKind(const std::string& name) {
  std::string n = name;
  std::transform(n.begin(), n.end(), n.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (n == "gru") return CellKind::kGru;
  if (n == "rnn") return CellKind::kRnn;
  if (n == "lstm") return CellKind::kLstm;
  throw InvalidArgument("unknown recurrent cell '" + name + "'");
}

std::string CellKindName(CellKind cell) {
  switch (cell) {
    case CellKind::kGru: return "GRU";
    case CellKind::kRnn: return "RNN";
    case CellKind::kLstm: return "LSTM";
  }
  return "?";
}

}  // namespace xfdd::nn

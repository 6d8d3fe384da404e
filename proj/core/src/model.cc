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

#include "xfdd/model.h"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "xfdd/error.h"

namespace xfdd::nn {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string Lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

template <typename T>
ad::Var<T> Unbound() {
  return ad::Var<T>();
}

}  // namespace

std::vector<std::string> CellGates(CellKind cell) {
  switch (cell) {
    case CellKind::kGru: return {"z", "r", "h"};
    case CellKind::kRnn: return {"h"};
    case CellKind::kLstm: return {"i", "f", "g", "o"};
  }
  return {};
}

template <typename T>
RecurrentResult<T> RunRecurrent(CellKind cell, const ad::Var<T>& seq,
                                std::size_t batch,
                                std::span<const RecurrentLayerVars<T>> layers,
                                std::span<const ad::Var<T>> h0,
                                bool keep_last_outputs) {
  using namespace ad;
  if (seq.shape().size() != 2 || batch == 0 || seq.shape()[0] % batch != 0) {
    throw ShapeError("recurrent input must be time-major [L*B x D], got " +
                     ShapeToString(seq.shape()));
  }
  if (!h0.empty() && h0.size() != layers.size()) {
    throw ShapeError("initial state count does not match layer count");
  }
  const std::size_t steps = seq.shape()[0] / batch;
  const std::size_t gates = CellGates(cell).size();
  Tape<T>& tape = *seq.tape();

  RecurrentResult<T> result;
  Var<T> input = seq;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const RecurrentLayerVars<T>& p = layers[l];
    if (p.W.size() != gates || p.U.size() != gates || p.b.size() != gates) {
      throw ShapeError("recurrent layer " + std::to_string(l) +
                       " has the wrong number of gates");
    }
    const std::size_t hidden = p.W[0].shape()[0];
    std::vector<Var<T>> gx(gates);
    for (std::size_t g = 0; g < gates; ++g) gx[g] = Linear(input, p.U[g], p.b[g]);

    Var<T> h = h0.empty() ? tape.Constant(Tensor<T>({batch, hidden}, T{0}))
                          : h0[l];
    Var<T> c = tape.Constant(Tensor<T>({batch, hidden}, T{0}));
    const bool keep = l + 1 < layers.size() || keep_last_outputs;
    std::vector<Var<T>> outs;
    if (keep) outs.reserve(steps);

    auto pre = [&](std::size_t g, std::size_t t, const Var<T>& state) {
      return Add(RowBlock(gx[g], t * batch, batch),
                 Linear(state, p.W[g], Unbound<T>()));
    };
    for (std::size_t t = 0; t < steps; ++t) {
      switch (cell) {
        case CellKind::kGru: {
          Var<T> z = Sigmoid(pre(0, t, h));
          Var<T> r = Sigmoid(pre(1, t, h));
          Var<T> cand = Tanh(pre(2, t, Mul(r, h)));
          h = Add(h, Mul(z, Sub(cand, h)));
          break;
        }
        case CellKind::kRnn:
          h = Tanh(pre(0, t, h));
          break;
        case CellKind::kLstm: {
          Var<T> i = Sigmoid(pre(0, t, h));
          Var<T> f = Sigmoid(pre(1, t, h));
          Var<T> g = Tanh(pre(2, t, h));
          Var<T> o = Sigmoid(pre(3, t, h));
          c = Add(Mul(f, c), Mul(i, g));
          h = Mul(o, Tanh(c));
          break;
        }
      }
      if (keep) outs.push_back(h);
    }
    result.final.push_back(h);
    if (keep) {
      input = ConcatRows<T>(std::span<const Var<T>>(outs));
      if (l + 1 == layers.size()) result.outputs = input;
    }
  }
  return result;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> GruForward(const Tensor<T>& seq,
                                           const GruParams<T>& params,
                                           const Tensor<T>* h0) {
  if (seq.rank() != 2) throw ShapeError("GRU sequence must be [L x D]");
  const std::size_t n_layers = params.layers.size();
  const std::size_t hidden = params.hidden;
  if (h0 != nullptr && (h0->rank() != 2 || h0->dim(0) != n_layers ||
                        h0->dim(1) != hidden)) {
    throw ShapeError("GRU initial state must be [layers x hidden], got " +
                     ShapeToString(h0->shape()));
  }
  ad::Tape<T> tape;
  std::vector<RecurrentLayerVars<T>> vars(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    for (int g = 0; g < 3; ++g) {
      vars[l].W.push_back(tape.Constant(params.layers[l].W[g]));
      vars[l].U.push_back(tape.Constant(params.layers[l].U[g]));
      vars[l].b.push_back(tape.Constant(params.layers[l].b[g]));
    }
  }
  std::vector<ad::Var<T>> init;
  if (h0 != nullptr) {
    for (std::size_t l = 0; l < n_layers; ++l) {
      Tensor<T> row({1, hidden});
      for (std::size_t j = 0; j < hidden; ++j) row[j] = h0->at(l, j);
      init.push_back(tape.Constant(std::move(row)));
    }
  }
  auto res = RunRecurrent<T>(CellKind::kGru, tape.Constant(seq), 1,
                             std::span<const RecurrentLayerVars<T>>(vars),
                             std::span<const ad::Var<T>>(init));
  Tensor<T> final({n_layers, hidden});
  for (std::size_t l = 0; l < n_layers; ++l) {
    const Tensor<T>& v = res.final[l].value();
    std::copy(v.raw(), v.raw() + hidden, final.raw() + l * hidden);
  }
  return {res.outputs.value(), std::move(final)};
}

template <typename T>
Model<T>::Model(ModelSpec spec, std::uint64_t seed)
    : spec_(std::move(spec)), seed_(seed) {
  (void)CountParams(spec_);  // validates shapes
  std::mt19937_64 rng(seed);
  auto add = [&](const std::string& name, Shape shape, bool trainable,
                 T fill) -> Tensor<T>& {
    tensors_.emplace_back(std::move(shape), fill);
    info_.push_back({name, trainable});
    return tensors_.back();
  };
  auto uniform = [&](Tensor<T>& t, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(dist(rng));
  };

  ActivationShape cur{true, spec_.input_channels, spec_.window, 0};
  const std::vector<ActivationShape> shapes = PropagateShapes(spec_);
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& layer = spec_.layers[i];
    const std::string prefix =
        Lower(LayerKindName(layer)) + "-" + std::to_string(i + 1) + ".";
    slots_.push_back({tensors_.size(), cur.sequence ? cur.channels : cur.features});
    std::visit(
        Overloaded{
            [&](const Conv1dSpec& c) {
              Tensor<T>& w = add(prefix + "weight",
                                 {c.out_channels, cur.channels, c.kernel}, true, T{0});
              uniform(w, cur.channels * c.kernel);
              add(prefix + "bias", {c.out_channels}, true, T{0});
            },
            [&](const BatchNormSpec&) {
              add(prefix + "gamma", {cur.channels}, true, T{1});
              add(prefix + "beta", {cur.channels}, true, T{0});
              add(prefix + "running_mean", {cur.channels}, false, T{0});
              add(prefix + "running_var", {cur.channels}, false, T{1});
            },
            [&](const RecurrentSpec& r) {
              const auto gates = CellGates(r.cell);
              for (std::size_t l = 0; l < r.layers; ++l) {
                const std::size_t d = l == 0 ? cur.channels : r.hidden;
                const std::string lp = prefix + "l" + std::to_string(l) + ".";
                for (const auto& g : gates) {
                  uniform(add(lp + "W_" + g, {r.hidden, r.hidden}, true, T{0}),
                          r.hidden);
                }
                for (const auto& g : gates) {
                  uniform(add(lp + "U_" + g, {r.hidden, d}, true, T{0}), d);
                }
                for (const auto& g : gates) {
                  add(lp + "b_" + g, {r.hidden}, true, T{0});
                }
              }
            },
            [&](const LinearSpec& l) {
              uniform(add(prefix + "weight", {l.out_features, cur.features}, true,
                          T{0}),
                      cur.features);
              add(prefix + "bias", {l.out_features}, true, T{0});
            },
            [](const auto&) {},
        },
        layer);
    cur = shapes[i];
  }
}

template <typename T>
std::size_t Model<T>::TrainableCount() const {
  return static_cast<std::size_t>(
      std::count_if(info_.begin(), info_.end(),
                    [](const TensorInfo& i) { return i.trainable; }));
}

template <typename T>
ad::Var<T> Model<T>::Forward(const ad::Var<T>& input, Mode mode,
                             std::mt19937_64* rng,
                             std::vector<ad::Var<T>>* trainable) {
  using namespace ad;
  const Shape& in = input.shape();
  if (in.size() != 3 || in[1] != spec_.input_channels || in[2] != spec_.window) {
    throw ShapeError("model " + spec_.name + " expects input [B, " +
                     std::to_string(spec_.input_channels) + ", " +
                     std::to_string(spec_.window) + "], got " +
                     ShapeToString(in));
  }
  const bool train = mode == Mode::kTrain;
  Tape<T>& tape = *input.tape();
  const std::size_t batch = in[0];

  std::vector<Var<T>> bound(tensors_.size());
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    if (!info_[i].trainable) continue;
    if (trainable != nullptr) {
      bound[i] = tape.Leaf(tensors_[i], true);
      trainable->push_back(bound[i]);
    } else {
      bound[i] = tape.Constant(tensors_[i]);
    }
  }

  Var<T> x = input;
  for (std::size_t li = 0; li < spec_.layers.size(); ++li) {
    const std::size_t k = slots_[li].first_tensor;
    std::visit(
        Overloaded{
            [&](const Conv1dSpec& c) {
              x = Conv1d(x, bound[k], bound[k + 1], c.stride, c.padding);
            },
            [&](const BatchNormSpec& b) {
              x = BatchNorm1d(x, bound[k], bound[k + 1], tensors_[k + 2],
                              tensors_[k + 3], train, static_cast<T>(b.eps),
                              static_cast<T>(b.momentum));
            },
            [&](const ReluSpec&) { x = Relu(x); },
            [&](const MaxPoolSpec& p) { x = MaxPool1d(x, p.kernel, p.stride); },
            [&](const DropoutSpec& d) {
              if (train && d.rate > 0.0 && rng == nullptr) {
                throw InvalidArgument("training-mode dropout needs an rng");
              }
              std::mt19937_64 unused(0);
              x = Dropout(x, d.rate, train, rng != nullptr ? *rng : unused);
            },
            [&](const RecurrentSpec& r) {
              const std::size_t g = CellGates(r.cell).size();
              std::vector<RecurrentLayerVars<T>> vars(r.layers);
              for (std::size_t l = 0; l < r.layers; ++l) {
                const std::size_t base = k + l * 3 * g;
                for (std::size_t j = 0; j < g; ++j) {
                  vars[l].W.push_back(bound[base + j]);
                  vars[l].U.push_back(bound[base + g + j]);
                  vars[l].b.push_back(bound[base + 2 * g + j]);
                }
              }
              auto res = RunRecurrent<T>(r.cell, ToTimeMajor(x), batch,
                                         std::span<const RecurrentLayerVars<T>>(vars),
                                         {}, false);
              x = res.final.back();
            },
            [&](const LinearSpec&) { x = Linear(x, bound[k], bound[k + 1]); },
        },
        spec_.layers[li]);
  }
  return x;
}

template <typename T>
Tensor<T> Model<T>::Predict(const Tensor<T>& input) {
  ad::Tape<T> tape;
  return Forward(tape.Constant(input), Mode::kEval).value();
}

template RecurrentResult<float> RunRecurrent<float>(
    CellKind, const ad::Var<float>&, std::size_t,
    std::span<const RecurrentLayerVars<float>>, std::span<const ad::Var<float>>,
    bool);
template RecurrentResult<double> RunRecurrent<double>(
    CellKind, const ad::Var<double>&, std::size_t,
    std::span<const RecurrentLayerVars<double>>, std::span<const ad::Var<double>>,
    bool);
template std::pair<Tensor<float>, Tensor<float>> GruForward<float>(
    const Tensor<float>&, const GruParams<float>&, const Tensor<float>*);
template std::pair<Tensor<double>, Tensor<double>> GruForward<double>(
    const Tensor<double>&, const GruParams<double>&, const Tensor<double>*);
template class Model<float>;
template class Model<double>;

}  // namespace xfdd::nn

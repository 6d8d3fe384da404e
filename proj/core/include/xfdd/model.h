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

#ifndef XFDD_MODEL_H_
#define XFDD_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "xfdd/autodiff.h"
#include "xfdd/model_spec.h"
#include "xfdd/ops.h"
#include "xfdd/tensor.h"

namespace xfdd::nn {

enum class Mode { kTrain, kEval };

struct TensorInfo {
  std::string name;  // "conv1d-1.weight"
  bool trainable = true;
};

// Per-gate weights of one recurrent layer, gate order as in CellGates().
// W: [H x H] recurrent, U: [H x D] input, b: [H].
template <typename T>
struct RecurrentLayerVars {
  std::vector<ad::Var<T>> W, U, b;
};

template <typename T>
struct RecurrentResult {
  ad::Var<T> outputs;            // last layer, time-major [L*B x H]
  std::vector<ad::Var<T>> final;  // per layer [B x H]
};

// "z r h" for GRU, "i f g o" for LSTM, "h" for RNN.
std::vector<std::string> CellGates(CellKind cell);

// Runs a recurrent stack over a time-major sequence [L*B x D]. `h0` holds one
// [B x H] initial state per layer, zeros when empty. GRU follows
//   z = s(W_z h + U_z x + b_z), r = s(W_r h + U_r x + b_r),
//   c = tanh(W_h (r . h) + U_h x + b_h), h' = (1 - z) . h + z . c.
template <typename T>
RecurrentResult<T> RunRecurrent(CellKind cell, const ad::Var<T>& seq,
                                std::size_t batch,
                                std::span<const RecurrentLayerVars<T>> layers,
                                std::span<const ad::Var<T>> h0 = {},
                                bool keep_last_outputs = true);

// Tensor-level GRU evaluation for a single sequence seq[L x D] with
// h0[layers x H]. Returns {outputs [L x H], final [layers x H]}.
template <typename T>
struct GruParams {
  std::size_t hidden = 0;
  // Per layer, gates z, r, h.
  struct Layer {
    Tensor<T> W[3], U[3], b[3];
  };
  std::vector<Layer> layers;
};
template <typename T>
std::pair<Tensor<T>, Tensor<T>> GruForward(const Tensor<T>& seq,
                                           const GruParams<T>& params,
                                           const Tensor<T>* h0 = nullptr);

// A built, parameterised layer stack.
template <typename T>
class Model {
 public:
  // Builds and initialises: weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)) with
  // fan_in the column count of each weight matrix, zero biases, unit gamma.
  Model(ModelSpec spec, std::uint64_t seed);

  const ModelSpec& spec() const { return spec_; }
  std::uint64_t seed() const { return seed_; }
  ParamCounts Counts() const { return CountParams(spec_); }

  // Every persisted tensor in manifest order (parameters and running stats).
  std::vector<Tensor<T>>& tensors() { return tensors_; }
  const std::vector<Tensor<T>>& tensors() const { return tensors_; }
  const std::vector<TensorInfo>& tensor_info() const { return info_; }
  std::size_t TrainableCount() const;

  // Logits [B x classes] for input [B x C x L]. In train mode `rng` drives
  // dropout and batch statistics update the running stats. When `trainable`
  // is given, trainable tensors are bound as gradient leaves and appended in
  // tensor order; otherwise they enter the tape as constants.
  ad::Var<T> Forward(const ad::Var<T>& input, Mode mode,
                     std::mt19937_64* rng = nullptr,
                     std::vector<ad::Var<T>>* trainable = nullptr);

  // Eval-mode logits without keeping a tape.
  Tensor<T> Predict(const Tensor<T>& input);

  template <typename U>
  Model<U> Cast() const {
    Model<U> out(spec_, seed_);
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
      out.tensors()[i] = tensors_[i].template Cast<U>();
    }
    return out;
  }

 private:
  struct LayerSlot {
    std::size_t first_tensor = 0;
    std::size_t input_dim = 0;  // channels or features entering the layer
  };

  ModelSpec spec_;
  std::uint64_t seed_;
  std::vector<Tensor<T>> tensors_;
  std::vector<TensorInfo> info_;
  std::vector<LayerSlot> slots_;
};

extern template class Model<float>;
extern template class Model<double>;

}  // namespace xfdd::nn

#endif  // XFDD_MODEL_H_

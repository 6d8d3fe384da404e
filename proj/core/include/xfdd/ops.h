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

// Differentiable primitives recorded on an ad::Tape.
//
// Batched activations are batch-major: [B x C x L] for sequences and [B x D]
// for vectors. The only exception is the time-major layout produced by
// ToTimeMajor(), which must feed linear primitives only.

#ifndef XFDD_OPS_H_
#define XFDD_OPS_H_

#include <cstddef>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

#include "xfdd/autodiff.h"

namespace xfdd::ad {

enum class ElementwiseKind { kSigmoid, kTanh, kRelu, kAdd, kSub, kMul, kScale };

// Binary ops accept equal shapes or a single-element operand.
template <typename T>
Var<T> Add(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> Sub(const Var<T>& a, const Var<T>& b);
// Under the Rescale rule the product uses the exact difference split
// d(uv) = mean(u) dv + mean(v) du over each (actual, reference) pair.
template <typename T>
Var<T> Mul(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> Scale(const Var<T>& a, T factor);

template <typename T>
Var<T> Sigmoid(const Var<T>& x);
template <typename T>
Var<T> Tanh(const Var<T>& x);
// Derivative at exactly 0 is 0.
template <typename T>
Var<T> Relu(const Var<T>& x);

// Dispatches on `kind`; kScale takes `factor`, binary kinds take two inputs.
template <typename T>
Var<T> Elementwise(ElementwiseKind kind, std::span<const Var<T>> inputs,
                   T factor = T{1});

// [m x k] * [k x n] -> [m x n]
template <typename T>
Var<T> MatMul(const Var<T>& a, const Var<T>& b);

// x[B x D] * W[K x D]^T + bias[K] -> [B x K]. `bias` may be unbound.
template <typename T>
Var<T> Linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias);

// Cross-correlation. x[B x C_in x L], weight[C_out x C_in x k], bias[C_out].
template <typename T>
Var<T> Conv1d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias,
              std::size_t stride, std::size_t padding);

// Sliding max over the last axis of x[B x C x L]. Ties pick the first index.
template <typename T>
Var<T> MaxPool1d(const Var<T>& x, std::size_t kernel, std::size_t stride);

// Per-channel normalisation of x[B x C x L]. Train mode normalises with batch
// statistics and folds them into the running statistics with `momentum`
// (the variance update uses the unbiased estimate); eval mode applies the
// running statistics.
template <typename T>
Var<T> BatchNorm1d(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                   Tensor<T>& running_mean, Tensor<T>& running_var, bool train,
                   T eps = T(1e-5), T momentum = T(0.1));

// Inverted dropout. Identity in eval mode or when rate == 0.
template <typename T>
Var<T> Dropout(const Var<T>& x, double rate, bool train, std::mt19937_64& rng);

// x[B x C x L] -> [L*B x C], row t*B + b holding x[b, :, t].
template <typename T>
Var<T> ToTimeMajor(const Var<T>& x);

// Rows [begin, begin + count) of a 2-D tensor.
template <typename T>
Var<T> RowBlock(const Var<T>& x, std::size_t begin, std::size_t count);

// Stacks 2-D tensors with equal column counts.
template <typename T>
Var<T> ConcatRows(std::span<const Var<T>> parts);

template <typename T>
Var<T> Reshape(const Var<T>& x, Shape shape);

// Sum of all elements -> scalar.
template <typename T>
Var<T> Sum(const Var<T>& x);
// Sum of |x| (subgradient 0 at 0) and sum of x^2 -> scalar.
template <typename T>
Var<T> AbsSum(const Var<T>& x);
template <typename T>
Var<T> SquareSum(const Var<T>& x);

// x[B x K] -> [B], element b = x[b, cols[b]].
template <typename T>
Var<T> GatherColumns(const Var<T>& x, std::span<const std::size_t> cols);

// Mean over the batch of w_b * (logsumexp(z_b) - z_b[label_b]). Empty
// `weights` means unit weights.
template <typename T>
Var<T> SoftmaxCrossEntropy(const Var<T>& logits,
                           std::span<const std::size_t> labels,
                           std::span<const T> weights = {});

// Row-wise softmax with max-logit subtraction (not differentiable).
template <typename T>
Tensor<T> Softmax(const Tensor<T>& logits);

}  // namespace xfdd::ad

#endif  // XFDD_OPS_H_

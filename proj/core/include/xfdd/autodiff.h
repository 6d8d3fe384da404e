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

// Define-by-run reverse-mode differentiation over dense tensors.
//
// A Tape records every primitive applied to its variables in execution
// order. Backward() walks the record in reverse and returns the gradient of a
// scalar output with respect to every recorded node. The tape is never
// mutated by Backward(), so the same record can be replayed any number of
// times.
//
// Besides plain gradients the tape supports the Rescale propagation rule used
// for DeepLIFT attributions. In that mode the leading half of every tensor
// holds activations for the actual inputs and the trailing half holds the
// activations for the paired references; nonlinear primitives replace their
// local derivative by the finite-difference multiplier between the halves.

#ifndef XFDD_AUTODIFF_H_
#define XFDD_AUTODIFF_H_

#include <cstddef>
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "xfdd/error.h"
#include "xfdd/tensor.h"

namespace xfdd::ad {

enum class BackwardRule {
  kGradient,
  // DeepLIFT Rescale. Requires batch-major tensors whose first half pairs
  // element-wise with the second half at every nonlinear site.
  kRescale,
};

template <typename T>
class Tape;

// Handle to a node of a Tape. Cheap to copy; valid while the tape lives.
template <typename T>
class Var {
 public:
  Var() = default;

  Tape<T>* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }

 private:
  friend class Tape<T>;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Result of a backward pass. Nodes outside the output's ancestry report a
// zero gradient of their own shape.
template <typename T>
class Gradients {
 public:
  const Tensor<T>& of(const Var<T>& v) const { return of(v.id()); }
  const Tensor<T>& of(std::size_t id) const;
  bool touched(std::size_t id) const { return touched_.at(id); }

 private:
  friend class Tape<T>;
  template <typename>
  friend class BackwardContext;

  Tensor<T>& Accumulator(std::size_t id);

  const Tape<T>* tape_ = nullptr;
  std::vector<Tensor<T>> grads_;
  std::vector<bool> touched_;
  mutable std::vector<std::unique_ptr<Tensor<T>>> zeros_;
};

// View handed to a node's backward function.
template <typename T>
class BackwardContext {
 public:
  BackwardRule rule() const { return rule_; }
  const Tensor<T>& output() const;
  const Tensor<T>& out_grad() const { return grads_.grads_[self_]; }
  std::size_t num_inputs() const;
  const Tensor<T>& input(std::size_t k) const;
  bool needs(std::size_t k) const;
  // Gradient accumulator of input k, zero-initialised on first access.
  Tensor<T>& grad(std::size_t k);

 private:
  friend class Tape<T>;
  BackwardContext(const Tape<T>& tape, Gradients<T>& grads, std::size_t self,
                  BackwardRule rule)
      : tape_(tape), grads_(grads), self_(self), rule_(rule) {}

  const Tape<T>& tape_;
  Gradients<T>& grads_;
  std::size_t self_;
  BackwardRule rule_;
};

template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(BackwardContext<T>&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf node. Gradients are reported for leaves with requires_grad.
  Var<T> Leaf(Tensor<T> value, bool requires_grad = true);
  Var<T> Constant(Tensor<T> value) { return Leaf(std::move(value), false); }

  // Appends a primitive. `parents` must already be on this tape.
  Var<T> Record(Tensor<T> value, std::vector<Var<T>> parents, BackwardFn fn);

  // Gradient of the scalar `output` with respect to every node.
  Gradients<T> Backward(const Var<T>& output,
                        BackwardRule rule = BackwardRule::kGradient) const;

  std::size_t size() const { return nodes_.size(); }
  const Tensor<T>& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const {
    return nodes_.at(id).requires_grad;
  }
  const std::vector<std::size_t>& parents(std::size_t id) const {
    return nodes_.at(id).parents;
  }

 private:
  template <typename>
  friend class BackwardContext;

  struct Node {
    Tensor<T> value;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    bool requires_grad = false;
  };
  std::deque<Node> nodes_;  // stable addresses: values outlive later records
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  if (tape_ == nullptr) throw InvalidArgument("use of an unbound Var");
  return tape_->value(id_);
}

// |analytic - numeric| / max(1e-8, |analytic| + |numeric|)
double RelativeError(double analytic, double numeric);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  // False when either gradient contained NaN; `failure` names the coordinate.
  bool finite = true;
  std::string failure;
};

// Compares the tape gradient of the scalar function `f` at `x` with central
// finite differences of step `eps`. `coords` restricts the check to a subset
// of flat coordinates (all coordinates when empty).
template <typename T>
GradCheckResult GradCheck(const std::function<Var<T>(const Var<T>&)>& f,
                          const Tensor<T>& x, T eps,
                          std::span<const std::size_t> coords = {});

extern template class Tape<float>;
extern template class Tape<double>;
extern template class Gradients<float>;
extern template class Gradients<double>;
extern template class BackwardContext<float>;
extern template class BackwardContext<double>;

}  // namespace xfdd::ad

#endif  // XFDD_AUTODIFF_H_

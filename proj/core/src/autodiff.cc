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

#include "xfdd/autodiff.h"

#include <algorithm>
#include <cmath>

namespace xfdd::ad {

template <typename T>
const Tensor<T>& Gradients<T>::of(std::size_t id) const {
  if (id >= grads_.size()) throw InvalidArgument("gradient id out of range");
  if (touched_[id]) return grads_[id];
  if (!zeros_[id]) {
    zeros_[id] = std::make_unique<Tensor<T>>(tape_->value(id).shape());
  }
  return *zeros_[id];
}

template <typename T>
Tensor<T>& Gradients<T>::Accumulator(std::size_t id) {
  if (!touched_[id]) {
    grads_[id] = Tensor<T>(tape_->value(id).shape());
    touched_[id] = true;
  }
  return grads_[id];
}

template <typename T>
const Tensor<T>& BackwardContext<T>::output() const {
  return tape_.nodes_[self_].value;
}

template <typename T>
std::size_t BackwardContext<T>::num_inputs() const {
  return tape_.nodes_[self_].parents.size();
}

template <typename T>
const Tensor<T>& BackwardContext<T>::input(std::size_t k) const {
  return tape_.nodes_[tape_.nodes_[self_].parents.at(k)].value;
}

template <typename T>
bool BackwardContext<T>::needs(std::size_t k) const {
  return tape_.nodes_[tape_.nodes_[self_].parents.at(k)].requires_grad;
}

template <typename T>
Tensor<T>& BackwardContext<T>::grad(std::size_t k) {
  return grads_.Accumulator(tape_.nodes_[self_].parents.at(k));
}

template <typename T>
Var<T> Tape<T>::Leaf(Tensor<T> value, bool requires_grad) {
  nodes_.push_back(Node{std::move(value), {}, nullptr, requires_grad});
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::Record(Tensor<T> value, std::vector<Var<T>> parents,
                       BackwardFn fn) {
  Node node;
  node.value = std::move(value);
  const std::size_t self = nodes_.size();
  for (const Var<T>& p : parents) {
    if (p.tape() != this) {
      throw InvalidArgument("operand recorded on a different tape");
    }
    // Append-only recording makes this unreachable through the public API.
    if (p.id() >= self) throw InvalidArgument("tape would become cyclic");
    node.parents.push_back(p.id());
    node.requires_grad = node.requires_grad || nodes_[p.id()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var<T>(this, self);
}

template <typename T>
Gradients<T> Tape<T>::Backward(const Var<T>& output, BackwardRule rule) const {
  if (output.tape() != this) {
    throw InvalidArgument("backward output is not on this tape");
  }
  const Tensor<T>& out = nodes_.at(output.id()).value;
  if (out.size() != 1) {
    throw ShapeError("backward requires a scalar output, got shape " +
                     ShapeToString(out.shape()));
  }

  Gradients<T> grads;
  grads.tape_ = this;
  grads.grads_.resize(nodes_.size());
  grads.touched_.assign(nodes_.size(), false);
  grads.zeros_.resize(nodes_.size());
  grads.Accumulator(output.id())[0] = T{1};

  for (std::size_t i = output.id() + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (!grads.touched_[i] || !node.backward) continue;
    for (std::size_t p : node.parents) {
      if (p >= i) throw InvalidArgument("cyclic tape");
    }
    BackwardContext<T> ctx(*this, grads, i, rule);
    node.backward(ctx);
  }
  return grads;
}

double RelativeError(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

template <typename T>
GradCheckResult GradCheck(const std::function<Var<T>(const Var<T>&)>& f,
                          const Tensor<T>& x, T eps,
                          std::span<const std::size_t> coords) {
  if (!(eps > T{0})) throw InvalidArgument("grad_check requires eps > 0");

  Tape<T> tape;
  Var<T> leaf = tape.Leaf(x, true);
  Var<T> out = f(leaf);
  const Tensor<T> analytic = tape.Backward(out).of(leaf);

  auto eval = [&](const Tensor<T>& at) {
    Tape<T> t;
    return static_cast<double>(f(t.Leaf(at, false)).value().item());
  };

  std::vector<std::size_t> all;
  if (coords.empty()) {
    all.resize(x.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    coords = all;
  }

  GradCheckResult result;
  Tensor<T> probe = x;
  for (std::size_t i : coords) {
    const T saved = probe[i];
    probe[i] = saved + eps;
    const double plus = eval(probe);
    probe[i] = saved - eps;
    const double minus = eval(probe);
    probe[i] = saved;
    // Use the realised step so rounding of saved±eps does not bias the ratio.
    const double step = static_cast<double>(saved + eps) -
                        static_cast<double>(saved - eps);
    const double numeric = (plus - minus) / step;
    const double a = analytic[i];
    if (std::isnan(a) || std::isnan(numeric)) {
      result.finite = false;
      result.failure = "NaN gradient at coordinate " + std::to_string(i);
      result.worst_index = i;
      result.max_rel_error = std::numeric_limits<double>::infinity();
      return result;
    }
    const double err = RelativeError(a, numeric);
    if (err > result.max_rel_error) {
      result.max_rel_error = err;
      result.worst_index = i;
    }
  }
  return result;
}

template class Tape<float>;
template class Tape<double>;
template class Gradients<float>;
template class Gradients<double>;
template class BackwardContext<float>;
template class BackwardContext<double>;

template GradCheckResult GradCheck<float>(
    const std::function<Var<float>(const Var<float>&)>&, const Tensor<float>&,
    float, std::span<const std::size_t>);
template GradCheckResult GradCheck<double>(
    const std::function<Var<double>(const Var<double>&)>&,
    const Tensor<double>&, double, std::span<const std::size_t>);

}  // namespace xfdd::ad

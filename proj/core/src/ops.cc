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

#include "xfdd/ops.h"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

namespace xfdd::ad {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

// Below this activation difference the Rescale rule falls back to the local
// derivative.
constexpr double kRescaleEps = 1e-7;

void Require(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

template <typename T>
std::size_t PairHalf(const Tensor<T>& t) {
  if (t.size() % 2 != 0) {
    throw ShapeError("Rescale rule needs paired (even) batch, got shape " +
                     ShapeToString(t.shape()));
  }
  return t.size() / 2;
}

template <typename T, typename F, typename D>
Var<T> Unary(const Var<T>& x, F f, D deriv) {
  const Tensor<T>& xv = x.value();
  Tensor<T> y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) y[i] = f(xv[i]);
  return x.tape()->Record(
      std::move(y), {x}, [deriv](BackwardContext<T>& ctx) {
        const Tensor<T>& xv = ctx.input(0);
        const Tensor<T>& yv = ctx.output();
        const Tensor<T>& g = ctx.out_grad();
        Tensor<T>& gx = ctx.grad(0);
        if (ctx.rule() == BackwardRule::kGradient) {
          for (std::size_t i = 0; i < xv.size(); ++i) {
            gx[i] += g[i] * deriv(xv[i], yv[i]);
          }
          return;
        }
        const std::size_t h = PairHalf(xv);
        for (std::size_t i = 0; i < h; ++i) {
          const T dx = xv[i] - xv[i + h];
          const T m = std::abs(dx) > T(kRescaleEps) ? (yv[i] - yv[i + h]) / dx
                                                    : deriv(xv[i], yv[i]);
          gx[i] += g[i] * m;
          gx[i + h] += g[i + h] * m;
        }
      });
}

enum class BinaryKind { kAdd, kSub, kMul };

template <typename T>
Var<T> Binary(const Var<T>& a, const Var<T>& b, BinaryKind kind) {
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  const bool same = av.shape() == bv.shape();
  if (!same && av.size() != 1 && bv.size() != 1) {
    throw ShapeError("elementwise shape mismatch: " +
                     ShapeToString(av.shape()) + " vs " +
                     ShapeToString(bv.shape()));
  }
  const bool a_big = same || bv.size() == 1;
  Tensor<T> out(a_big ? av.shape() : bv.shape());
  const std::size_t n = out.size();
  const bool a_scalar = av.size() == 1 && !same;
  const bool b_scalar = bv.size() == 1 && !same;
  for (std::size_t i = 0; i < n; ++i) {
    const T x = av[a_scalar ? 0 : i];
    const T y = bv[b_scalar ? 0 : i];
    switch (kind) {
      case BinaryKind::kAdd: out[i] = x + y; break;
      case BinaryKind::kSub: out[i] = x - y; break;
      case BinaryKind::kMul: out[i] = x * y; break;
    }
  }
  return a.tape()->Record(
      std::move(out), {a, b},
      [kind, a_scalar, b_scalar, same](BackwardContext<T>& ctx) {
        const Tensor<T>& g = ctx.out_grad();
        const Tensor<T>& av = ctx.input(0);
        const Tensor<T>& bv = ctx.input(1);
        const std::size_t n = g.size();
        const bool rescale_mul = kind == BinaryKind::kMul && same &&
                                 ctx.rule() == BackwardRule::kRescale;
        for (std::size_t k = 0; k < 2; ++k) {
          if (!ctx.needs(k)) continue;
          Tensor<T>& gk = ctx.grad(k);
          const bool scalar = k == 0 ? a_scalar : b_scalar;
          const Tensor<T>& other = k == 0 ? bv : av;
          const bool other_scalar = k == 0 ? b_scalar : a_scalar;
          T sign = T{1};
          if (kind == BinaryKind::kSub && k == 1) sign = T{-1};
          if (rescale_mul) {
            const std::size_t h = PairHalf(g);
            for (std::size_t i = 0; i < h; ++i) {
              const T mean_other = (other[i] + other[i + h]) / T{2};
              gk[i] += g[i] * mean_other;
              gk[i + h] += g[i + h] * mean_other;
            }
            continue;
          }
          for (std::size_t i = 0; i < n; ++i) {
            T local = sign;
            if (kind == BinaryKind::kMul) local = other[other_scalar ? 0 : i];
            gk[scalar ? 0 : i] += g[i] * local;
          }
        }
      });
}

}  // namespace

template <typename T>
Var<T> Add(const Var<T>& a, const Var<T>& b) {
  return Binary(a, b, BinaryKind::kAdd);
}
template <typename T>
Var<T> Sub(const Var<T>& a, const Var<T>& b) {
  return Binary(a, b, BinaryKind::kSub);
}
template <typename T>
Var<T> Mul(const Var<T>& a, const Var<T>& b) {
  return Binary(a, b, BinaryKind::kMul);
}

template <typename T>
Var<T> Scale(const Var<T>& a, T factor) {
  const Tensor<T>& av = a.value();
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * factor;
  return a.tape()->Record(std::move(out), {a},
                          [factor](BackwardContext<T>& ctx) {
                            const Tensor<T>& g = ctx.out_grad();
                            Tensor<T>& gx = ctx.grad(0);
                            for (std::size_t i = 0; i < g.size(); ++i) {
                              gx[i] += g[i] * factor;
                            }
                          });
}

template <typename T>
Var<T> Sigmoid(const Var<T>& x) {
  return Unary(
      x,
      [](T v) {
        // Branches keep exp() from overflowing for large |v|.
        if (v >= T{0}) return T{1} / (T{1} + std::exp(-v));
        const T e = std::exp(v);
        return e / (T{1} + e);
      },
      [](T, T y) { return y * (T{1} - y); });
}

template <typename T>
Var<T> Tanh(const Var<T>& x) {
  return Unary(
      x, [](T v) { return std::tanh(v); },
      [](T, T y) { return T{1} - y * y; });
}

template <typename T>
Var<T> Relu(const Var<T>& x) {
  return Unary(
      x, [](T v) { return v > T{0} ? v : T{0}; },
      [](T v, T) { return v > T{0} ? T{1} : T{0}; });
}

template <typename T>
Var<T> Elementwise(ElementwiseKind kind, std::span<const Var<T>> inputs,
                   T factor) {
  const bool binary = kind == ElementwiseKind::kAdd ||
                      kind == ElementwiseKind::kSub ||
                      kind == ElementwiseKind::kMul;
  if (inputs.size() != (binary ? 2u : 1u)) {
    throw InvalidArgument("elementwise: wrong operand count");
  }
  switch (kind) {
    case ElementwiseKind::kSigmoid: return Sigmoid(inputs[0]);
    case ElementwiseKind::kTanh: return Tanh(inputs[0]);
    case ElementwiseKind::kRelu: return Relu(inputs[0]);
    case ElementwiseKind::kAdd: return Add(inputs[0], inputs[1]);
    case ElementwiseKind::kSub: return Sub(inputs[0], inputs[1]);
    case ElementwiseKind::kMul: return Mul(inputs[0], inputs[1]);
    case ElementwiseKind::kScale: return Scale(inputs[0], factor);
  }
  throw InvalidArgument("elementwise: unknown kind");
}

template <typename T>
Var<T> MatMul(const Var<T>& a, const Var<T>& b) {
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  Require(av.rank() == 2 && bv.rank() == 2 && av.dim(1) == bv.dim(0),
          "matmul dimension mismatch: " + ShapeToString(av.shape()) + " x " +
              ShapeToString(bv.shape()));
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor<T> out({m, n});
  MapMat<T>(out.raw(), m, n).noalias() =
      ConstMapMat<T>(av.raw(), m, k) * ConstMapMat<T>(bv.raw(), k, n);
  return a.tape()->Record(
      std::move(out), {a, b}, [m, k, n](BackwardContext<T>& ctx) {
        ConstMapMat<T> g(ctx.out_grad().raw(), m, n);
        if (ctx.needs(0)) {
          MapMat<T>(ctx.grad(0).raw(), m, k).noalias() +=
              g * ConstMapMat<T>(ctx.input(1).raw(), k, n).transpose();
        }
        if (ctx.needs(1)) {
          MapMat<T>(ctx.grad(1).raw(), k, n).noalias() +=
              ConstMapMat<T>(ctx.input(0).raw(), m, k).transpose() * g;
        }
      });
}

template <typename T>
Var<T> Linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  const Tensor<T>& xv = x.value();
  const Tensor<T>& wv = weight.value();
  Require(xv.rank() == 2 && wv.rank() == 2 && xv.dim(1) == wv.dim(1),
          "linear dimension mismatch: input " + ShapeToString(xv.shape()) +
              ", weight " + ShapeToString(wv.shape()));
  const std::size_t rows = xv.dim(0), in = xv.dim(1), out_dim = wv.dim(0);
  const bool has_bias = bias.valid();
  if (has_bias) {
    Require(bias.size() == out_dim, "linear bias length mismatch");
  }
  Tensor<T> out({rows, out_dim});
  MapMat<T> y(out.raw(), rows, out_dim);
  y.noalias() = ConstMapMat<T>(xv.raw(), rows, in) *
                ConstMapMat<T>(wv.raw(), out_dim, in).transpose();
  if (has_bias) {
    const T* b = bias.value().raw();
    for (std::size_t r = 0; r < rows; ++r) {
      T* row = out.raw() + r * out_dim;
      for (std::size_t j = 0; j < out_dim; ++j) row[j] += b[j];
    }
  }
  std::vector<Var<T>> parents{x, weight};
  if (has_bias) parents.push_back(bias);
  return x.tape()->Record(
      std::move(out), std::move(parents),
      [rows, in, out_dim, has_bias](BackwardContext<T>& ctx) {
        ConstMapMat<T> g(ctx.out_grad().raw(), rows, out_dim);
        if (ctx.needs(0)) {
          MapMat<T>(ctx.grad(0).raw(), rows, in).noalias() +=
              g * ConstMapMat<T>(ctx.input(1).raw(), out_dim, in);
        }
        if (ctx.needs(1)) {
          MapMat<T>(ctx.grad(1).raw(), out_dim, in).noalias() +=
              g.transpose() * ConstMapMat<T>(ctx.input(0).raw(), rows, in);
        }
        if (has_bias && ctx.needs(2)) {
          T* gb = ctx.grad(2).raw();
          const T* gr = ctx.out_grad().raw();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < out_dim; ++j) {
              gb[j] += gr[r * out_dim + j];
            }
          }
        }
      });
}

namespace {

// Column matrix [C*k x B*L_out] for a batched 1-D cross-correlation.
template <typename T>
void Im2Col(const T* x, std::size_t batch, std::size_t channels,
            std::size_t length, std::size_t kernel, std::size_t stride,
            std::size_t padding, std::size_t out_len, T* col) {
  const std::size_t cols = batch * out_len;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t j = 0; j < kernel; ++j) {
      T* row = col + (c * kernel + j) * cols;
      for (std::size_t b = 0; b < batch; ++b) {
        const T* xs = x + (b * channels + c) * length;
        for (std::size_t l = 0; l < out_len; ++l) {
          const std::ptrdiff_t pos =
              static_cast<std::ptrdiff_t>(l * stride + j) -
              static_cast<std::ptrdiff_t>(padding);
          row[b * out_len + l] =
              (pos >= 0 && pos < static_cast<std::ptrdiff_t>(length))
                  ? xs[pos]
                  : T{0};
        }
      }
    }
  }
}

template <typename T>
void Col2ImAdd(const T* col, std::size_t batch, std::size_t channels,
               std::size_t length, std::size_t kernel, std::size_t stride,
               std::size_t padding, std::size_t out_len, T* x) {
  const std::size_t cols = batch * out_len;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t j = 0; j < kernel; ++j) {
      const T* row = col + (c * kernel + j) * cols;
      for (std::size_t b = 0; b < batch; ++b) {
        T* xs = x + (b * channels + c) * length;
        for (std::size_t l = 0; l < out_len; ++l) {
          const std::ptrdiff_t pos =
              static_cast<std::ptrdiff_t>(l * stride + j) -
              static_cast<std::ptrdiff_t>(padding);
          if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(length)) {
            xs[pos] += row[b * out_len + l];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Var<T> Conv1d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias,
              std::size_t stride, std::size_t padding) {
  const Tensor<T>& xv = x.value();
  const Tensor<T>& wv = weight.value();
  Require(xv.rank() == 3, "conv1d expects [B x C x L] input, got " +
                              ShapeToString(xv.shape()));
  Require(wv.rank() == 3, "conv1d expects [C_out x C_in x k] weight");
  Require(xv.dim(1) == wv.dim(1),
          "conv1d channel mismatch: input has " + std::to_string(xv.dim(1)) +
              " channels, weight expects " + std::to_string(wv.dim(1)));
  if (stride == 0) throw InvalidArgument("conv1d stride must be positive");
  const std::size_t batch = xv.dim(0), cin = xv.dim(1), len = xv.dim(2);
  const std::size_t cout = wv.dim(0), kernel = wv.dim(2);
  Require(len + 2 * padding >= kernel,
          "conv1d kernel longer than padded input");
  const std::size_t out_len = (len + 2 * padding - kernel) / stride + 1;
  const bool has_bias = bias.valid();
  if (has_bias) Require(bias.size() == cout, "conv1d bias length mismatch");

  const std::size_t rows = cin * kernel, cols = batch * out_len;
  std::vector<T> col(rows * cols);
  Im2Col(xv.raw(), batch, cin, len, kernel, stride, padding, out_len,
         col.data());
  RowMat<T> prod = ConstMapMat<T>(wv.raw(), cout, rows) *
                   ConstMapMat<T>(col.data(), rows, cols);
  Tensor<T> out({batch, cout, out_len});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < cout; ++o) {
      const T bo = has_bias ? bias.value()[o] : T{0};
      T* dst = out.raw() + (b * cout + o) * out_len;
      const T* src = prod.data() + o * cols + b * out_len;
      for (std::size_t l = 0; l < out_len; ++l) dst[l] = src[l] + bo;
    }
  }

  std::vector<Var<T>> parents{x, weight};
  if (has_bias) parents.push_back(bias);
  return x.tape()->Record(
      std::move(out), std::move(parents),
      [=](BackwardContext<T>& ctx) {
        const T* g = ctx.out_grad().raw();
        // Gradient rearranged to [C_out x B*L_out].
        RowMat<T> gm(cout, cols);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t o = 0; o < cout; ++o) {
            const T* src = g + (b * cout + o) * out_len;
            T* dst = gm.data() + o * cols + b * out_len;
            std::copy(src, src + out_len, dst);
          }
        }
        if (ctx.needs(1)) {
          std::vector<T> colb(rows * cols);
          Im2Col(ctx.input(0).raw(), batch, cin, len, kernel, stride, padding,
                 out_len, colb.data());
          MapMat<T>(ctx.grad(1).raw(), cout, rows).noalias() +=
              gm * ConstMapMat<T>(colb.data(), rows, cols).transpose();
        }
        if (has_bias && ctx.needs(2)) {
          T* gb = ctx.grad(2).raw();
          for (std::size_t o = 0; o < cout; ++o) gb[o] += gm.row(o).sum();
        }
        if (ctx.needs(0)) {
          RowMat<T> dcol =
              ConstMapMat<T>(ctx.input(1).raw(), cout, rows).transpose() * gm;
          Col2ImAdd(dcol.data(), batch, cin, len, kernel, stride, padding,
                    out_len, ctx.grad(0).raw());
        }
      });
}

template <typename T>
Var<T> MaxPool1d(const Var<T>& x, std::size_t kernel, std::size_t stride) {
  const Tensor<T>& xv = x.value();
  Require(xv.rank() == 3, "maxpool1d expects [B x C x L] input, got " +
                              ShapeToString(xv.shape()));
  if (kernel == 0 || stride == 0) {
    throw InvalidArgument("maxpool1d kernel and stride must be positive");
  }
  const std::size_t batch = xv.dim(0), ch = xv.dim(1), len = xv.dim(2);
  if (kernel > len) {
    throw InvalidArgument("maxpool1d kernel " + std::to_string(kernel) +
                          " exceeds input length " + std::to_string(len));
  }
  const std::size_t out_len = (len - kernel) / stride + 1;
  Tensor<T> out({batch, ch, out_len});
  std::vector<std::uint32_t> arg(out.size());
  for (std::size_t bc = 0; bc < batch * ch; ++bc) {
    const T* src = xv.raw() + bc * len;
    for (std::size_t l = 0; l < out_len; ++l) {
      std::size_t best = l * stride;
      for (std::size_t j = 1; j < kernel; ++j) {
        if (src[l * stride + j] > src[best]) best = l * stride + j;
      }
      out[bc * out_len + l] = src[best];
      arg[bc * out_len + l] = static_cast<std::uint32_t>(bc * len + best);
    }
  }
  return x.tape()->Record(
      std::move(out), {x},
      [arg = std::move(arg), kernel, stride, len,
       out_len](BackwardContext<T>& ctx) {
        const Tensor<T>& g = ctx.out_grad();
        Tensor<T>& gx = ctx.grad(0);
        if (ctx.rule() == BackwardRule::kGradient) {
          for (std::size_t o = 0; o < g.size(); ++o) gx[arg[o]] += g[o];
          return;
        }
        // Rescale: route the whole output difference to one input of the
        // window so the contributions sum exactly to the delta. Prefer the
        // argmax of the actual input; fall back to the largest input change
        // when that would need a multiplier above one in magnitude.
        const Tensor<T>& xv = ctx.input(0);
        const Tensor<T>& yv = ctx.output();
        const std::size_t h_out = PairHalf(g);
        const std::size_t h_in = PairHalf(xv);
        for (std::size_t o = 0; o < h_out; ++o) {
          const std::size_t a = arg[o];
          const T dy = yv[o] - yv[o + h_out];
          const T dxa = xv[a] - xv[a + h_in];
          std::size_t target = a;
          T m = T{1};
          if (std::abs(dxa) > T(kRescaleEps) && std::abs(dy) <= std::abs(dxa)) {
            m = dy / dxa;
          } else {
            const std::size_t bc = o / out_len, l = o % out_len;
            const std::size_t start = bc * len + l * stride;
            std::size_t best = start;
            T best_dx = T{-1};
            for (std::size_t j = 0; j < kernel; ++j) {
              const T d = std::abs(xv[start + j] - xv[start + j + h_in]);
              if (d > best_dx) {
                best_dx = d;
                best = start + j;
              }
            }
            if (best_dx > T(kRescaleEps)) {
              target = best;
              m = dy / (xv[best] - xv[best + h_in]);
            }
          }
          gx[target] += g[o] * m;
          gx[target + h_in] += g[o + h_out] * m;
        }
      });
}

template <typename T>
Var<T> BatchNorm1d(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                   Tensor<T>& running_mean, Tensor<T>& running_var, bool train,
                   T eps, T momentum) {
  const Tensor<T>& xv = x.value();
  Require(xv.rank() == 3, "batchnorm1d expects [B x C x L] input, got " +
                              ShapeToString(xv.shape()));
  const std::size_t batch = xv.dim(0), ch = xv.dim(1), len = xv.dim(2);
  Require(gamma.size() == ch && beta.size() == ch &&
              running_mean.size() == ch && running_var.size() == ch,
          "batchnorm1d parameter length mismatch");
  const std::size_t count = batch * len;
  if (train && count < 2) {
    throw InvalidArgument("batchnorm1d training needs at least 2 values per "
                          "channel");
  }
  std::vector<T> mean(ch), inv_std(ch);
  if (train) {
    for (std::size_t c = 0; c < ch; ++c) {
      double s = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const T* p = xv.raw() + (b * ch + c) * len;
        for (std::size_t l = 0; l < len; ++l) s += p[l];
      }
      const double mu = s / static_cast<double>(count);
      double ss = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const T* p = xv.raw() + (b * ch + c) * len;
        for (std::size_t l = 0; l < len; ++l) {
          const double d = p[l] - mu;
          ss += d * d;
        }
      }
      const double var = ss / static_cast<double>(count);
      mean[c] = static_cast<T>(mu);
      inv_std[c] = static_cast<T>(1.0 / std::sqrt(var + eps));
      const double unbiased = ss / static_cast<double>(count - 1);
      running_mean[c] =
          (T{1} - momentum) * running_mean[c] + momentum * static_cast<T>(mu);
      running_var[c] = (T{1} - momentum) * running_var[c] +
                       momentum * static_cast<T>(unbiased);
    }
  } else {
    for (std::size_t c = 0; c < ch; ++c) {
      mean[c] = running_mean[c];
      inv_std[c] = T{1} / std::sqrt(running_var[c] + eps);
    }
  }

  Tensor<T> out(xv.shape());
  const T* gm = gamma.value().raw();
  const T* bt = beta.value().raw();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < ch; ++c) {
      const T* p = xv.raw() + (b * ch + c) * len;
      T* q = out.raw() + (b * ch + c) * len;
      for (std::size_t l = 0; l < len; ++l) {
        q[l] = gm[c] * (p[l] - mean[c]) * inv_std[c] + bt[c];
      }
    }
  }
  return x.tape()->Record(
      std::move(out), {x, gamma, beta},
      [=, mean = std::move(mean),
       inv_std = std::move(inv_std)](BackwardContext<T>& ctx) {
        if (train && ctx.rule() == BackwardRule::kRescale) {
          throw InvalidArgument("Rescale rule requires eval-mode batchnorm");
        }
        const T* g = ctx.out_grad().raw();
        const T* xp = ctx.input(0).raw();
        const T* gm = ctx.input(1).raw();
        std::vector<double> sum_g(ch, 0.0), sum_gx(ch, 0.0);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t c = 0; c < ch; ++c) {
            const std::size_t off = (b * ch + c) * len;
            for (std::size_t l = 0; l < len; ++l) {
              const double xhat = (xp[off + l] - mean[c]) * inv_std[c];
              sum_g[c] += g[off + l];
              sum_gx[c] += g[off + l] * xhat;
            }
          }
        }
        if (ctx.needs(1)) {
          T* gg = ctx.grad(1).raw();
          for (std::size_t c = 0; c < ch; ++c) gg[c] += static_cast<T>(sum_gx[c]);
        }
        if (ctx.needs(2)) {
          T* gb = ctx.grad(2).raw();
          for (std::size_t c = 0; c < ch; ++c) gb[c] += static_cast<T>(sum_g[c]);
        }
        if (!ctx.needs(0)) return;
        T* gx = ctx.grad(0).raw();
        const double n = static_cast<double>(batch * len);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t c = 0; c < ch; ++c) {
            const std::size_t off = (b * ch + c) * len;
            const double scale = gm[c] * inv_std[c];
            for (std::size_t l = 0; l < len; ++l) {
              if (!train) {
                gx[off + l] += static_cast<T>(g[off + l] * scale);
                continue;
              }
              const double xhat = (xp[off + l] - mean[c]) * inv_std[c];
              gx[off + l] += static_cast<T>(
                  scale * (g[off + l] - sum_g[c] / n - xhat * sum_gx[c] / n));
            }
          }
        }
      });
}

template <typename T>
Var<T> Dropout(const Var<T>& x, double rate, bool train, std::mt19937_64& rng) {
  if (!(rate >= 0.0) || rate >= 1.0) {
    throw InvalidArgument("dropout rate must lie in [0, 1), got " +
                          std::to_string(rate));
  }
  if (!train || rate == 0.0) return x;
  const Tensor<T>& xv = x.value();
  std::vector<T> mask(xv.size());
  std::bernoulli_distribution keep(1.0 - rate);
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  for (T& m : mask) m = keep(rng) ? scale : T{0};
  Tensor<T> out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[i];
  return x.tape()->Record(std::move(out), {x},
                          [mask = std::move(mask)](BackwardContext<T>& ctx) {
                            const Tensor<T>& g = ctx.out_grad();
                            Tensor<T>& gx = ctx.grad(0);
                            for (std::size_t i = 0; i < g.size(); ++i) {
                              gx[i] += g[i] * mask[i];
                            }
                          });
}

template <typename T>
Var<T> ToTimeMajor(const Var<T>& x) {
  const Tensor<T>& xv = x.value();
  Require(xv.rank() == 3, "ToTimeMajor expects [B x C x L], got " +
                              ShapeToString(xv.shape()));
  const std::size_t batch = xv.dim(0), ch = xv.dim(1), len = xv.dim(2);
  Tensor<T> out({len * batch, ch});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < ch; ++c) {
      const T* src = xv.raw() + (b * ch + c) * len;
      for (std::size_t t = 0; t < len; ++t) out[(t * batch + b) * ch + c] = src[t];
    }
  }
  return x.tape()->Record(
      std::move(out), {x}, [batch, ch, len](BackwardContext<T>& ctx) {
        const T* g = ctx.out_grad().raw();
        T* gx = ctx.grad(0).raw();
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t c = 0; c < ch; ++c) {
            T* dst = gx + (b * ch + c) * len;
            for (std::size_t t = 0; t < len; ++t) {
              dst[t] += g[(t * batch + b) * ch + c];
            }
          }
        }
      });
}

template <typename T>
Var<T> RowBlock(const Var<T>& x, std::size_t begin, std::size_t count) {
  const Tensor<T>& xv = x.value();
  Require(xv.rank() == 2 && begin + count <= xv.dim(0),
          "row block out of range for shape " + ShapeToString(xv.shape()));
  const std::size_t cols = xv.dim(1);
  Tensor<T> out({count, cols},
                std::vector<T>(xv.raw() + begin * cols,
                               xv.raw() + (begin + count) * cols));
  return x.tape()->Record(
      std::move(out), {x}, [begin, cols](BackwardContext<T>& ctx) {
        const Tensor<T>& g = ctx.out_grad();
        T* gx = ctx.grad(0).raw() + begin * cols;
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      });
}

template <typename T>
Var<T> ConcatRows(std::span<const Var<T>> parts) {
  if (parts.empty()) throw InvalidArgument("ConcatRows of nothing");
  const std::size_t cols = parts[0].value().dim(1);
  std::size_t rows = 0;
  for (const Var<T>& p : parts) {
    Require(p.value().rank() == 2 && p.value().dim(1) == cols,
            "ConcatRows column mismatch");
    rows += p.value().dim(0);
  }
  Tensor<T> out({rows, cols});
  std::size_t off = 0;
  for (const Var<T>& p : parts) {
    std::copy(p.value().raw(), p.value().raw() + p.size(), out.raw() + off);
    off += p.size();
  }
  return parts[0].tape()->Record(
      std::move(out), std::vector<Var<T>>(parts.begin(), parts.end()),
      [](BackwardContext<T>& ctx) {
        const T* g = ctx.out_grad().raw();
        std::size_t off = 0;
        for (std::size_t k = 0; k < ctx.num_inputs(); ++k) {
          const std::size_t n = ctx.input(k).size();
          if (ctx.needs(k)) {
            T* gk = ctx.grad(k).raw();
            for (std::size_t i = 0; i < n; ++i) gk[i] += g[off + i];
          }
          off += n;
        }
      });
}

template <typename T>
Var<T> Reshape(const Var<T>& x, Shape shape) {
  if (ShapeSize(shape) != x.size()) {
    throw ShapeError("cannot reshape " + ShapeToString(x.shape()) + " to " +
                     ShapeToString(shape));
  }
  return x.tape()->Record(x.value().Reshaped(std::move(shape)), {x},
                          [](BackwardContext<T>& ctx) {
                            const Tensor<T>& g = ctx.out_grad();
                            Tensor<T>& gx = ctx.grad(0);
                            for (std::size_t i = 0; i < g.size(); ++i) {
                              gx[i] += g[i];
                            }
                          });
}

template <typename T>
Var<T> Sum(const Var<T>& x) {
  const Tensor<T>& xv = x.value();
  T s{0};
  for (std::size_t i = 0; i < xv.size(); ++i) s += xv[i];
  return x.tape()->Record(Tensor<T>::Scalar(s), {x},
                          [](BackwardContext<T>& ctx) {
                            const T g = ctx.out_grad()[0];
                            Tensor<T>& gx = ctx.grad(0);
                            for (std::size_t i = 0; i < gx.size(); ++i) {
                              gx[i] += g;
                            }
                          });
}

template <typename T>
Var<T> AbsSum(const Var<T>& x) {
  const Tensor<T>& xv = x.value();
  double s = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) s += std::abs(xv[i]);
  return x.tape()->Record(
      Tensor<T>::Scalar(static_cast<T>(s)), {x}, [](BackwardContext<T>& ctx) {
        const T g = ctx.out_grad()[0];
        const Tensor<T>& xv = ctx.input(0);
        Tensor<T>& gx = ctx.grad(0);
        for (std::size_t i = 0; i < gx.size(); ++i) {
          gx[i] += xv[i] > T{0} ? g : (xv[i] < T{0} ? -g : T{0});
        }
      });
}

template <typename T>
Var<T> SquareSum(const Var<T>& x) {
  const Tensor<T>& xv = x.value();
  double s = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    s += static_cast<double>(xv[i]) * xv[i];
  }
  return x.tape()->Record(
      Tensor<T>::Scalar(static_cast<T>(s)), {x}, [](BackwardContext<T>& ctx) {
        const T g = ctx.out_grad()[0];
        const Tensor<T>& xv = ctx.input(0);
        Tensor<T>& gx = ctx.grad(0);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += T{2} * g * xv[i];
      });
}

template <typename T>
Var<T> GatherColumns(const Var<T>& x, std::span<const std::size_t> cols) {
  const Tensor<T>& xv = x.value();
  Require(xv.rank() == 2 && cols.size() == xv.dim(0),
          "GatherColumns expects one column index per row");
  const std::size_t k = xv.dim(1);
  Tensor<T> out({cols.size()});
  std::vector<std::size_t> idx(cols.size());
  for (std::size_t b = 0; b < cols.size(); ++b) {
    if (cols[b] >= k) throw InvalidArgument("column index out of range");
    idx[b] = b * k + cols[b];
    out[b] = xv[idx[b]];
  }
  return x.tape()->Record(std::move(out), {x},
                          [idx = std::move(idx)](BackwardContext<T>& ctx) {
                            const Tensor<T>& g = ctx.out_grad();
                            Tensor<T>& gx = ctx.grad(0);
                            for (std::size_t b = 0; b < idx.size(); ++b) {
                              gx[idx[b]] += g[b];
                            }
                          });
}

template <typename T>
Tensor<T> Softmax(const Tensor<T>& logits) {
  if (logits.rank() != 2 && logits.rank() != 1) {
    throw ShapeError("softmax expects [K] or [B x K] logits");
  }
  const std::size_t k = logits.shape().back();
  const std::size_t rows = logits.size() / k;
  Tensor<T> out(logits.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* z = logits.raw() + r * k;
    T* y = out.raw() + r * k;
    const T zmax = *std::max_element(z, z + k);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      y[j] = std::exp(z[j] - zmax);
      s += y[j];
    }
    for (std::size_t j = 0; j < k; ++j) y[j] = static_cast<T>(y[j] / s);
  }
  return out;
}

template <typename T>
Var<T> SoftmaxCrossEntropy(const Var<T>& logits,
                           std::span<const std::size_t> labels,
                           std::span<const T> weights) {
  const Tensor<T>& z = logits.value();
  Require(z.rank() == 2 && labels.size() == z.dim(0),
          "cross-entropy expects [B x K] logits and B labels");
  if (!weights.empty() && weights.size() != labels.size()) {
    throw ShapeError("cross-entropy weight count mismatch");
  }
  const std::size_t batch = z.dim(0), k = z.dim(1);
  for (std::size_t label : labels) {
    if (label >= k) {
      throw InvalidArgument("label " + std::to_string(label) +
                            " outside [0, " + std::to_string(k) + ")");
    }
  }
  Tensor<T> probs = Softmax(z);
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const T* zr = z.raw() + b * k;
    const T zmax = *std::max_element(zr, zr + k);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(zr[j] - zmax);
    const double lse = zmax + std::log(s);
    const double w = weights.empty() ? 1.0 : weights[b];
    total += w * (lse - zr[labels[b]]);
  }
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  std::vector<T> wts(weights.begin(), weights.end());
  return logits.tape()->Record(
      Tensor<T>::Scalar(static_cast<T>(total / static_cast<double>(batch))),
      {logits},
      [probs = std::move(probs), lab = std::move(lab), wts = std::move(wts),
       batch, k](BackwardContext<T>& ctx) {
        const T g = ctx.out_grad()[0];
        Tensor<T>& gz = ctx.grad(0);
        for (std::size_t b = 0; b < batch; ++b) {
          const T w = wts.empty() ? T{1} : wts[b];
          const T s = g * w / static_cast<T>(batch);
          for (std::size_t j = 0; j < k; ++j) {
            const T onehot = j == lab[b] ? T{1} : T{0};
            gz[b * k + j] += s * (probs[b * k + j] - onehot);
          }
        }
      });
}

#define XFDD_INSTANTIATE_OPS(T)                                               \
  template Var<T> Add<T>(const Var<T>&, const Var<T>&);                        \
  template Var<T> Sub<T>(const Var<T>&, const Var<T>&);                        \
  template Var<T> Mul<T>(const Var<T>&, const Var<T>&);                        \
  template Var<T> Scale<T>(const Var<T>&, T);                                  \
  template Var<T> Sigmoid<T>(const Var<T>&);                                   \
  template Var<T> Tanh<T>(const Var<T>&);                                      \
  template Var<T> Relu<T>(const Var<T>&);                                      \
  template Var<T> Elementwise<T>(ElementwiseKind, std::span<const Var<T>>, T); \
  template Var<T> MatMul<T>(const Var<T>&, const Var<T>&);                     \
  template Var<T> Linear<T>(const Var<T>&, const Var<T>&, const Var<T>&);      \
  template Var<T> Conv1d<T>(const Var<T>&, const Var<T>&, const Var<T>&,       \
                            std::size_t, std::size_t);                         \
  template Var<T> MaxPool1d<T>(const Var<T>&, std::size_t, std::size_t);       \
  template Var<T> BatchNorm1d<T>(const Var<T>&, const Var<T>&, const Var<T>&,  \
                                 Tensor<T>&, Tensor<T>&, bool, T, T);          \
  template Var<T> Dropout<T>(const Var<T>&, double, bool, std::mt19937_64&);   \
  template Var<T> ToTimeMajor<T>(const Var<T>&);                               \
  template Var<T> RowBlock<T>(const Var<T>&, std::size_t, std::size_t);        \
  template Var<T> ConcatRows<T>(std::span<const Var<T>>);                      \
  template Var<T> Reshape<T>(const Var<T>&, Shape);                            \
  template Var<T> Sum<T>(const Var<T>&);                                       \
  template Var<T> AbsSum<T>(const Var<T>&);                                    \
  template Var<T> SquareSum<T>(const Var<T>&);                                 \
  template Var<T> GatherColumns<T>(const Var<T>&, std::span<const std::size_t>); \
  template Var<T> SoftmaxCrossEntropy<T>(                                      \
      const Var<T>&, std::span<const std::size_t>, std::span<const T>);        \
  template Tensor<T> Softmax<T>(const Tensor<T>&);

XFDD_INSTANTIATE_OPS(float)
XFDD_INSTANTIATE_OPS(double)

#undef XFDD_INSTANTIATE_OPS

}  // namespace xfdd::ad

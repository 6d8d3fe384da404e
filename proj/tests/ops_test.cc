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

#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "xfdd/autodiff.h"
#include "xfdd/ops.h"

namespace xfdd::ad {
namespace {

using TensorD = Tensor<double>;
using Fn = std::function<Var<double>(const Var<double>&)>;

TensorD Random(Shape shape, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, scale);
  TensorD t(std::move(shape));
  for (auto& v : t.vec()) v = d(rng);
  return t;
}

// Weighted sum so that every output element carries a distinct gradient.
Var<double> Probe(const Var<double>& y, std::uint64_t seed) {
  return Sum(Mul(y, y.tape()->Constant(Random(y.shape(), seed))));
}

TEST(Conv1d, HandCrossCorrelation) {
  Tape<double> tape;
  auto x = tape.Constant(TensorD({1, 1, 5}, std::vector<double>{1, 2, 3, 4, 5}));
  auto w = tape.Constant(TensorD({1, 1, 3}, std::vector<double>{1, 0, -1}));
  auto b = tape.Constant(TensorD({1}, 0.0));
  auto y = Conv1d(x, w, b, 1, 0);
  EXPECT_EQ(y.value().vec(), (std::vector<double>{-2, -2, -2}));
}

TEST(Conv1d, IdentityKernel) {
  Tape<double> tape;
  auto x0 = Random({2, 1, 7}, 1);
  auto y = Conv1d(tape.Constant(x0), tape.Constant(TensorD({1, 1, 1}, 1.0)),
                  tape.Constant(TensorD({1}, 0.0)), 1, 0);
  EXPECT_EQ(y.value().vec(), x0.vec());
}

TEST(Conv1d, SameLengthWithPaddingOne) {
  Tape<double> tape;
  auto y = Conv1d(tape.Constant(TensorD({2, 24, 500})),
                  tape.Constant(TensorD({32, 24, 3})),
                  tape.Constant(TensorD({32})), 1, 1);
  EXPECT_EQ(y.shape(), (Shape{2, 32, 500}));
}

TEST(Conv1d, RejectsChannelMismatch) {
  Tape<double> tape;
  EXPECT_THROW(Conv1d(tape.Constant(TensorD({1, 3, 8})),
                      tape.Constant(TensorD({4, 2, 3})),
                      tape.Constant(TensorD({4})), 1, 1),
               ShapeError);
}

TEST(MaxPool1d, CanonicalLengths) {
  Tape<double> tape;
  EXPECT_EQ(MaxPool1d(tape.Constant(TensorD({1, 2, 500})), 2, 1).shape(),
            (Shape{1, 2, 499}));
  EXPECT_EQ(MaxPool1d(tape.Constant(TensorD({1, 2, 497})), 2, 2).shape(),
            (Shape{1, 2, 248}));
}

TEST(MaxPool1d, ConstantInputAndTieRouting) {
  Tape<double> tape;
  auto x = tape.Leaf(TensorD({1, 1, 4}, 3.0));
  auto y = MaxPool1d(x, 2, 2);
  EXPECT_EQ(y.value().vec(), (std::vector<double>{3, 3}));
  auto g = tape.Backward(Sum(y)).of(x);
  EXPECT_EQ(g.vec(), (std::vector<double>{1, 0, 1, 0}));
}

TEST(MaxPool1d, RejectsKernelLongerThanInput) {
  Tape<double> tape;
  EXPECT_THROW(MaxPool1d(tape.Constant(TensorD({1, 1, 2})), 3, 1),
               InvalidArgument);
}

TEST(BatchNorm1d, HandNormalisation) {
  Tape<double> tape;
  TensorD rm({1}, 0.0), rv({1}, 1.0);
  auto x = tape.Constant(TensorD({2, 1, 1}, std::vector<double>{-1, 1}));
  auto y = BatchNorm1d(x, tape.Constant(TensorD({1}, 2.0)),
                       tape.Constant(TensorD({1}, 3.0)), rm, rv, true);
  const double s = 2.0 / std::sqrt(1.0 + 1e-5);
  EXPECT_NEAR(y.value()[0], 3 - s, 1e-12);
  EXPECT_NEAR(y.value()[1], 3 + s, 1e-12);
  EXPECT_NEAR(y.value()[0], 1.0, 1e-4);
  // Running stats: mean 0, unbiased variance 2.
  EXPECT_NEAR(rm[0], 0.0, 1e-12);
  EXPECT_NEAR(rv[0], 0.9 * 1.0 + 0.1 * 2.0, 1e-12);
}

TEST(BatchNorm1d, NormalisedInputIsFixedPoint) {
  Tape<double> tape;
  TensorD x0 = Random({8, 3, 16}, 5);
  for (std::size_t c = 0; c < 3; ++c) {
    double m = 0, v = 0;
    for (std::size_t n = 0; n < 8; ++n)
      for (std::size_t l = 0; l < 16; ++l) m += x0.at(n, c, l);
    m /= 128;
    for (std::size_t n = 0; n < 8; ++n)
      for (std::size_t l = 0; l < 16; ++l) v += std::pow(x0.at(n, c, l) - m, 2);
    const double sd = std::sqrt(v / 128);
    for (std::size_t n = 0; n < 8; ++n)
      for (std::size_t l = 0; l < 16; ++l) x0.at(n, c, l) = (x0.at(n, c, l) - m) / sd;
  }
  TensorD rm({3}, 0.0), rv({3}, 1.0);
  auto y = BatchNorm1d(tape.Constant(x0), tape.Constant(TensorD({3}, 1.0)),
                       tape.Constant(TensorD({3}, 0.0)), rm, rv, true);
  for (std::size_t i = 0; i < x0.size(); ++i) {
    EXPECT_NEAR(y.value()[i], x0[i] / std::sqrt(1.0 + 1e-5), 1e-9);
    EXPECT_LE(std::abs(y.value()[i] - x0[i]), 1e-5 * std::abs(x0[i]));
  }
}

TEST(BatchNorm1d, ZeroVarianceChannelIsFinite) {
  Tape<double> tape;
  TensorD rm({1}, 0.0), rv({1}, 1.0);
  auto y = BatchNorm1d(tape.Constant(TensorD({4, 1, 3}, 7.0)),
                       tape.Constant(TensorD({1}, 1.0)),
                       tape.Constant(TensorD({1}, 0.0)), rm, rv, true);
  for (double v : y.value().vec()) EXPECT_EQ(v, 0.0);
}

TEST(BatchNorm1d, EvalIsAffineInRunningStats) {
  Tape<double> tape;
  TensorD rm({2}, std::vector<double>{1, -1}), rv({2}, std::vector<double>{4, 9});
  auto x0 = Random({3, 2, 5}, 6);
  auto y = BatchNorm1d(tape.Constant(x0), tape.Constant(TensorD({2}, 2.0)),
                       tape.Constant(TensorD({2}, 0.5)), rm, rv, false);
  for (std::size_t n = 0; n < 3; ++n) {
    for (std::size_t c = 0; c < 2; ++c) {
      for (std::size_t l = 0; l < 5; ++l) {
        const double want =
            2.0 * (x0.at(n, c, l) - rm[c]) / std::sqrt(rv[c] + 1e-5) + 0.5;
        EXPECT_NEAR(y.value().at(n, c, l), want, 1e-12);
      }
    }
  }
}

TEST(Dropout, RateZeroAndEvalAreIdentity) {
  Tape<double> tape;
  std::mt19937_64 rng(1);
  auto x0 = Random({4, 9}, 7);
  EXPECT_EQ(Dropout(tape.Constant(x0), 0.0, true, rng).value().vec(), x0.vec());
  EXPECT_EQ(Dropout(tape.Constant(x0), 0.7, false, rng).value().vec(), x0.vec());
}

TEST(Dropout, LawOfLargeNumbers) {
  Tape<float> tape;
  std::mt19937_64 rng(2);
  auto y = Dropout(tape.Constant(Tensor<float>({1000000}, 1.0f)), 0.3, true, rng);
  std::size_t survivors = 0;
  double sum = 0;
  for (float v : y.value().vec()) {
    survivors += v != 0.0f;
    sum += v;
  }
  EXPECT_NEAR(survivors / 1e6, 0.7, 0.01);
  EXPECT_NEAR(sum / 1e6, 1.0, 0.01);
}

TEST(Dropout, RejectsRateOne) {
  Tape<double> tape;
  std::mt19937_64 rng(3);
  EXPECT_THROW(Dropout(tape.Constant(TensorD({2})), 1.0, true, rng),
               InvalidArgument);
}

TEST(Softmax, HandValues) {
  auto p = Softmax(TensorD({1, 2}, std::vector<double>{1, 0}));
  EXPECT_NEAR(p[0], 0.73106, 1e-5);
  EXPECT_NEAR(p[1], 0.26894, 1e-5);
  auto u = Softmax(TensorD({1, 7}, 3.0));
  for (double v : u.vec()) EXPECT_NEAR(v, 1.0 / 7.0, 1e-12);
  auto big = Softmax(TensorD({1, 3}, std::vector<double>{1000, 999, -5}));
  EXPECT_NEAR(big[0] + big[1] + big[2], 1.0, 1e-12);
}

TEST(SoftmaxCrossEntropy, UniformIsLogSeven) {
  Tape<double> tape;
  std::vector<std::size_t> labels{3};
  auto loss = SoftmaxCrossEntropy(tape.Constant(TensorD({1, 7}, 0.0)),
                                  std::span<const std::size_t>(labels));
  EXPECT_NEAR(loss.value().item(), std::log(7.0), 1e-12);
  EXPECT_NEAR(loss.value().item(), 1.94591, 1e-5);
}

TEST(SoftmaxCrossEntropy, RejectsLabelOutOfRange) {
  Tape<double> tape;
  std::vector<std::size_t> labels{7};
  EXPECT_THROW(SoftmaxCrossEntropy(tape.Constant(TensorD({1, 7}, 0.0)),
                                   std::span<const std::size_t>(labels)),
               InvalidArgument);
}

// Layer-level gradient checks over many seeds.
class LayerGradCheck : public ::testing::TestWithParam<int> {};

TEST_P(LayerGradCheck, EveryLayerTypeAt64Bit) {
  const std::uint64_t s = 1000 + GetParam();
  const double eps = 1e-6, tol = 1e-5;
  auto check = [&](const char* what, const Fn& f, const TensorD& x) {
    auto r = GradCheck(f, x, eps);
    EXPECT_TRUE(r.finite) << what << ": " << r.failure;
    EXPECT_LT(r.max_rel_error, tol) << what << " worst index " << r.worst_index;
  };
  const TensorD w = Random({4, 3, 3}, s + 1, 0.5), b = Random({4}, s + 2);
  check("conv1d", [&](const Var<double>& x) {
    auto& t = *x.tape();
    return Probe(Conv1d(x, t.Constant(w), t.Constant(b), 1, 1), s + 3);
  }, Random({2, 3, 9}, s));
  check("conv1d weight", [&](const Var<double>& wv) {
    auto& t = *wv.tape();
    return Probe(Conv1d(t.Constant(Random({2, 3, 9}, s)), wv, t.Constant(b), 2, 1),
                 s + 3);
  }, w);
  check("linear", [&](const Var<double>& x) {
    auto& t = *x.tape();
    return Probe(Linear(x, t.Constant(Random({5, 6}, s + 4)),
                        t.Constant(Random({5}, s + 5))), s + 6);
  }, Random({3, 6}, s + 7));
  check("relu", [&](const Var<double>& x) { return Probe(Relu(x), s + 8); },
        Random({4, 5}, s + 9));
  check("sigmoid", [&](const Var<double>& x) { return Probe(Sigmoid(x), s + 10); },
        Random({4, 5}, s + 11));
  check("tanh", [&](const Var<double>& x) { return Probe(Tanh(x), s + 12); },
        Random({4, 5}, s + 13));
  check("maxpool1d", [&](const Var<double>& x) {
    return Probe(MaxPool1d(x, 2, 1), s + 14);
  }, Random({2, 3, 8}, s + 15));
  check("batchnorm1d train", [&](const Var<double>& x) {
    auto& t = *x.tape();
    TensorD rm({3}, 0.0), rv({3}, 1.0);
    return Probe(BatchNorm1d(x, t.Constant(Random({3}, s + 16)),
                             t.Constant(Random({3}, s + 17)), rm, rv, true),
                 s + 18);
  }, Random({4, 3, 5}, s + 19));
  check("batchnorm1d gamma", [&](const Var<double>& g) {
    auto& t = *g.tape();
    TensorD rm({3}, 0.0), rv({3}, 1.0);
    return Probe(BatchNorm1d(t.Constant(Random({4, 3, 5}, s + 19)), g,
                             t.Constant(Random({3}, s + 17)), rm, rv, true),
                 s + 18);
  }, Random({3}, s + 16));
  check("cross-entropy", [&](const Var<double>& z) {
    std::vector<std::size_t> labels{0, 3, 6};
    std::vector<double> w{1.0, 0.5, 2.0};
    return SoftmaxCrossEntropy(z, std::span<const std::size_t>(labels),
                               std::span<const double>(w));
  }, Random({3, 7}, s + 20));
  check("regularisers", [&](const Var<double>& x) {
    return Add(AbsSum(x), SquareSum(x));
  }, Random({11}, s + 21));
  check("layout", [&](const Var<double>& x) {
    auto tm = ToTimeMajor(x);
    std::vector<Var<double>> parts{RowBlock(tm, 2, 4), RowBlock(tm, 0, 2)};
    return Probe(ConcatRows<double>(std::span<const Var<double>>(parts)), s + 22);
  }, Random({2, 3, 4}, s + 23));
}

INSTANTIATE_TEST_SUITE_P(Seeds, LayerGradCheck, ::testing::Range(0, 100));

TEST(Rescale, ReluShiftedHandValue) {
  // f(x) = relu(x - 1), x = 3 against x' = 0.
  Tape<double> tape;
  auto x = tape.Leaf(TensorD({2, 1}, std::vector<double>{3, 0}));
  auto shifted = Sub(x, tape.Constant(TensorD({2, 1}, 1.0)));
  auto y = Relu(shifted);
  auto g = tape.Backward(Sum(RowBlock(y, 0, 1)), BackwardRule::kRescale).of(x);
  // Multiplier 2/3 on the actual half, attribution (3 - 0) * 2/3 = 2.
  EXPECT_NEAR(g[0] * 3.0, 2.0, 1e-12);
}

TEST(Rescale, ProductSplitsDeltaExactly) {
  Tape<double> tape;
  auto u = tape.Leaf(TensorD({2, 1}, std::vector<double>{2, 0.5}));
  auto v = tape.Leaf(TensorD({2, 1}, std::vector<double>{-3, 1}));
  auto y = Mul(u, v);
  auto g = tape.Backward(Sum(RowBlock(y, 0, 1)), BackwardRule::kRescale);
  const double du = 1.5, dv = -4;
  const double total = g.of(u)[0] * du + g.of(v)[0] * dv;
  EXPECT_NEAR(total, 2 * -3 - 0.5 * 1, 1e-12);
}

}  // namespace
}  // namespace xfdd::ad

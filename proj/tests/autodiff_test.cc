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
#include <random>

#include <gtest/gtest.h>

#include "xfdd/autodiff.h"
#include "xfdd/ops.h"

namespace xfdd::ad {
namespace {

using TensorD = Tensor<double>;

TensorD Random(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  TensorD t(std::move(shape));
  for (auto& v : t.vec()) v = d(rng);
  return t;
}

TEST(Tape, IdentityDerivativeIsOne) {
  Tape<double> tape;
  auto x = tape.Leaf(TensorD::Scalar(5.0));
  auto g = tape.Backward(x);
  EXPECT_DOUBLE_EQ(g.of(x).item(), 1.0);
}

TEST(Tape, SquareMatchesCentralDifference) {
  Tape<double> tape;
  auto x = tape.Leaf(TensorD::Scalar(3.0));
  auto y = Mul(x, x);
  const double eps = 1e-5;
  const double numeric = ((3 + eps) * (3 + eps) - (3 - eps) * (3 - eps)) / (2 * eps);
  EXPECT_NEAR(tape.Backward(y).of(x).item(), numeric, 1e-8);
  EXPECT_DOUBLE_EQ(tape.Backward(y).of(x).item(), 6.0);
}

TEST(Tape, RejectsNonScalarOutput) {
  Tape<double> tape;
  auto x = tape.Leaf(TensorD({2}, 1.0));
  EXPECT_THROW(tape.Backward(x), ShapeError);
}

TEST(Tape, NodesOutsideAncestryGetZeros) {
  Tape<double> tape;
  auto x = tape.Leaf(TensorD({3}, 1.0));
  auto unused = tape.Leaf(TensorD({2, 2}, 4.0));
  auto g = tape.Backward(Sum(x));
  const auto& gu = g.of(unused);
  ASSERT_EQ(gu.shape(), (Shape{2, 2}));
  for (double v : gu.vec()) EXPECT_EQ(v, 0.0);
}

TEST(Tape, RejectsForeignParents) {
  Tape<double> a, b;
  auto x = a.Leaf(TensorD::Scalar(1.0));
  auto y = b.Leaf(TensorD::Scalar(2.0));
  EXPECT_THROW(Add(x, y), InvalidArgument);
}

TEST(Tape, ReplayIsBitIdentical) {
  Tape<double> tape;
  auto x = tape.Leaf(Random({4, 6}, 1));
  auto w = tape.Leaf(Random({3, 6}, 2));
  auto b = tape.Leaf(Random({3}, 3));
  auto y = Sum(Tanh(Linear(x, w, b)));
  auto g1 = tape.Backward(y);
  auto g2 = tape.Backward(y);
  EXPECT_EQ(g1.of(x).vec(), g2.of(x).vec());
  EXPECT_EQ(g1.of(w).vec(), g2.of(w).vec());
}

TEST(Tape, BackwardIsLinear) {
  Tape<double> tape;
  auto x = tape.Leaf(Random({5}, 4));
  auto f = Sum(Sigmoid(x));
  auto g = SquareSum(Tanh(x));
  const double a = 2.5, c = -0.75;
  auto h = Add(Scale(f, a), Scale(g, c));
  auto gf = tape.Backward(f).of(x);
  auto gg = tape.Backward(g).of(x);
  auto gh = tape.Backward(h).of(x);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_NEAR(gh[i], a * gf[i] + c * gg[i], 1e-6);
  }
}

TEST(Elementwise, HandValues) {
  Tape<double> tape;
  EXPECT_DOUBLE_EQ(Sigmoid(tape.Leaf(TensorD::Scalar(0))).value().item(), 0.5);
  EXPECT_DOUBLE_EQ(Tanh(tape.Leaf(TensorD::Scalar(0))).value().item(), 0.0);
  auto r = Relu(tape.Leaf(TensorD({2}, std::vector<double>{-1, 2}))).value();
  EXPECT_EQ(r.vec(), (std::vector<double>{0, 2}));
}

TEST(Elementwise, ReluDerivativeAtZeroIsZero) {
  Tape<double> tape;
  auto x = tape.Leaf(TensorD({3}, std::vector<double>{-1, 0, 1}));
  auto g = tape.Backward(Sum(Relu(x))).of(x);
  EXPECT_EQ(g.vec(), (std::vector<double>{0, 0, 1}));
}

TEST(Elementwise, ShapeMismatchNamesBothShapes) {
  Tape<double> tape;
  auto a = tape.Leaf(TensorD({2, 3}));
  auto b = tape.Leaf(TensorD({3, 2}));
  try {
    Add(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("[2, 3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[3, 2]"), std::string::npos) << msg;
  }
}

TEST(Elementwise, ScalarBroadcast) {
  Tape<double> tape;
  auto a = tape.Leaf(TensorD({3}, std::vector<double>{1, 2, 3}));
  auto s = tape.Leaf(TensorD::Scalar(2));
  auto y = Mul(a, s);
  EXPECT_EQ(y.value().vec(), (std::vector<double>{2, 4, 6}));
  auto g = tape.Backward(Sum(y));
  EXPECT_DOUBLE_EQ(g.of(s).item(), 6.0);
}

TEST(MatMul, IdentityAndDot) {
  Tape<double> tape;
  auto eye = tape.Leaf(TensorD({2, 2}, std::vector<double>{1, 0, 0, 1}));
  auto m = tape.Leaf(TensorD({2, 2}, std::vector<double>{1, 2, 3, 4}));
  EXPECT_EQ(MatMul(eye, m).value().vec(), m.value().vec());
  auto a = tape.Leaf(TensorD({1, 2}, std::vector<double>{1, 2}));
  auto b = tape.Leaf(TensorD({2, 1}, std::vector<double>{3, 4}));
  EXPECT_DOUBLE_EQ(MatMul(a, b).value().item(), 11.0);
}

TEST(MatMul, RejectsInnerMismatch) {
  Tape<double> tape;
  auto a = tape.Leaf(TensorD({2, 3}));
  auto b = tape.Leaf(TensorD({2, 3}));
  EXPECT_THROW(MatMul(a, b), ShapeError);
}

TEST(MatMul, GradientOfSumIsRowSumsOfB) {
  const TensorD a0 = Random({3, 4}, 11), b0 = Random({4, 2}, 12);
  Tape<double> tape;
  auto a = tape.Leaf(a0);
  auto b = tape.Constant(b0);
  auto g = tape.Backward(Sum(MatMul(a, b))).of(a);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t k = 0; k < 4; ++k) {
      EXPECT_NEAR(g.at(i, k), b0.at(k, 0) + b0.at(k, 1), 1e-12);
    }
  }
  std::function<Var<double>(const Var<double>&)> f = [&](const Var<double>& x) {
    return Sum(MatMul(x, x.tape()->Constant(b0)));
  };
  EXPECT_LT(GradCheck(f, a0, 1e-4).max_rel_error, 1e-8);
}

TEST(GradCheck, SumOfSquares) {
  std::function<Var<double>(const Var<double>&)> f = [](const Var<double>& x) {
    return SquareSum(x);
  };
  auto r = GradCheck(f, Random({7, 3}, 21), 1e-4);
  EXPECT_TRUE(r.finite);
  EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST(GradCheck, SigmoidOfLinear) {
  const TensorD w = Random({4, 6}, 22), b = Random({4}, 23);
  std::function<Var<double>(const Var<double>&)> f = [&](const Var<double>& x) {
    Tape<double>& t = *x.tape();
    return Sum(Sigmoid(Linear(x, t.Constant(w), t.Constant(b))));
  };
  EXPECT_LT(GradCheck(f, Random({3, 6}, 24), 1e-4).max_rel_error, 1e-5);
}

TEST(GradCheck, ConstantFunctionHasZeroError) {
  std::function<Var<double>(const Var<double>&)> f = [](const Var<double>& x) {
    return x.tape()->Constant(TensorD::Scalar(4.2));
  };
  auto r = GradCheck(f, Random({5}, 25), 1e-4);
  EXPECT_EQ(r.max_rel_error, 0.0);
}

TEST(GradCheck, ReportsNanWithCoordinate) {
  std::function<Var<double>(const Var<double>&)> f = [](const Var<double>& x) {
    return Sum(Mul(x, x.tape()->Constant(TensorD({2}, std::vector<double>{
                                                          1, std::nan("")}))));
  };
  auto r = GradCheck(f, TensorD({2}, 1.0), 1e-4);
  EXPECT_FALSE(r.finite);
  EXPECT_NE(r.failure.find("coordinate 0"), std::string::npos) << r.failure;
}

TEST(RelativeError, Definition) {
  EXPECT_DOUBLE_EQ(RelativeError(1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(RelativeError(1.0, 3.0), 0.5);
  EXPECT_DOUBLE_EQ(RelativeError(0.0, 0.0), 0.0);
}

}  // namespace
}  // namespace xfdd::ad

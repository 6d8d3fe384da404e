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
#include <thread>

#include <gtest/gtest.h>

#include "xfdd/error.h"
#include "xfdd/ops.h"
#include "xfdd/xai.h"

namespace xfdd::xai {
namespace {

using TensorD = Tensor<double>;

TensorD RandomWindow(std::size_t c, std::size_t l, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  TensorD x({c, l});
  for (auto& v : x.vec()) v = n(rng);
  return x;
}

// logits = W * flatten(x) + b with W [K x C*L].
Network LinearNet(TensorD w, TensorD b) {
  return [w, b](const ad::Var<double>& x) {
    auto& tape = *x.tape();
    const std::size_t batch = x.value().dim(0);
    auto flat = ad::Reshape(x, Shape{batch, x.size() / batch});
    return ad::Linear(flat, tape.Constant(w), tape.Constant(b));
  };
}

// Per-channel sums pushed through tanh with per-channel weights: additive in
// the channels, nonlinear within each.
Network AdditiveTanhNet(std::size_t channels, std::size_t len, std::vector<double> a) {
  return [channels, len, a](const ad::Var<double>& x) {
    auto& tape = *x.tape();
    const std::size_t batch = x.value().dim(0);
    auto flat = ad::Reshape(x, Shape{batch, channels * len});
    TensorD pool({channels, channels * len}, 0.0);
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t t = 0; t < len; ++t) pool.at(c, c * len + t) = 0.5;
    }
    auto per_channel = ad::Tanh(ad::Linear(flat, tape.Constant(pool), ad::Var<double>()));
    TensorD head({2, channels}, 0.0);
    for (std::size_t c = 0; c < channels; ++c) {
      head.at(0, c) = a[c];
      head.at(1, c) = -a[c];
    }
    return ad::Linear(per_channel, tape.Constant(head), ad::Var<double>());
  };
}

// conv -> relu -> maxpool -> flatten -> linear -> relu -> linear.
Network ConvNet(std::size_t channels, std::size_t len, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.6, 0.6);
  auto fill = [&](Shape s) {
    TensorD t(std::move(s));
    for (auto& v : t.vec()) v = u(rng);
    return t;
  };
  const std::size_t filters = 4, pooled = len - 1;
  TensorD cw = fill({filters, channels, 3}), cb = fill({filters});
  TensorD w1 = fill({6, filters * pooled}), b1 = fill({6});
  TensorD w2 = fill({3, 6}), b2 = fill({3});
  return [=](const ad::Var<double>& x) {
    auto& tape = *x.tape();
    const std::size_t batch = x.value().dim(0);
    auto h = ad::Conv1d(x, tape.Constant(cw), tape.Constant(cb), 1, 1);
    h = ad::MaxPool1d(ad::Relu(h), 2, 1);
    h = ad::Reshape(h, Shape{batch, filters * pooled});
    h = ad::Relu(ad::Linear(h, tape.Constant(w1), tape.Constant(b1)));
    return ad::Linear(h, tape.Constant(w2), tape.Constant(b2));
  };
}

TEST(IntegratedGradientsTest, LinearHandValues) {
  // f(x) = 2 x1 + 3 x2 on a [2 x 1] window.
  auto net = LinearNet(TensorD({1, 2}, std::vector<double>{2, 3}), TensorD({1}, 0.0));
  TensorD x({2, 1}, std::vector<double>{1, 1}), base({2, 1}, 0.0);
  for (std::size_t m : {1, 7, 50}) {
    auto a = IntegratedGradients(net, x, base, 0, m);
    EXPECT_NEAR(a.values[0], 2.0, 1e-12);
    EXPECT_NEAR(a.values[1], 3.0, 1e-12);
    EXPECT_NEAR(a.Total(), a.output - a.baseline_output, 1e-9);
  }
}

TEST(IntegratedGradientsTest, ZeroPathGivesZero) {
  std::mt19937_64 rng(1);
  auto net = ConvNet(3, 8, 2);
  auto x = RandomWindow(3, 8, rng);
  auto a = IntegratedGradients(net, x, x, 1, 10);
  for (double v : a.values.vec()) EXPECT_EQ(v, 0.0);
}

TEST(IntegratedGradientsTest, CompletenessOnNonlinearNet) {
  std::mt19937_64 rng(3);
  auto net = AdditiveTanhNet(4, 5, {1.0, -2.0, 0.5, 3.0});
  auto x = RandomWindow(4, 5, rng), base = TensorD({4, 5}, 0.0);
  auto a = IntegratedGradients(net, x, base, 0, 200);
  const double delta = a.output - a.baseline_output;
  EXPECT_LE(std::abs(a.Total() - delta), 0.01 * std::abs(delta));
}

TEST(IntegratedGradientsTest, RejectsBadArguments) {
  auto net = LinearNet(TensorD({1, 2}, 1.0), TensorD({1}, 0.0));
  TensorD x({2, 1}, 1.0), wrong({1, 2}, 0.0);
  EXPECT_THROW(IntegratedGradients(net, x, wrong, 0, 5), ShapeError);
  EXPECT_THROW(IntegratedGradients(net, x, x, 0, 0), InvalidArgument);
  EXPECT_THROW(IntegratedGradients(net, x, x, 4, 2), InvalidArgument);
}

TEST(DeepLiftTest, ShiftedReluHandValue) {
  Network net = [](const ad::Var<double>& x) {
    auto& tape = *x.tape();
    const std::size_t batch = x.value().dim(0);
    auto flat = ad::Reshape(x, Shape{batch, 1});
    return ad::Relu(ad::Sub(flat, tape.Constant(TensorD({batch, 1}, 1.0))));
  };
  auto a = DeepLift(net, TensorD({1, 1}, 3.0), TensorD({1, 1}, 0.0), 0);
  EXPECT_NEAR(a.values[0], 2.0, 1e-12);
  EXPECT_NEAR(a.output - a.baseline_output, 2.0, 1e-12);
}

TEST(DeepLiftTest, LinearEqualsIntegratedGradients) {
  std::mt19937_64 rng(4);
  auto net = LinearNet(RandomWindow(3, 12, rng), RandomWindow(3, 1, rng).Reshaped({3}));
  auto x = RandomWindow(2, 6, rng), b = RandomWindow(2, 6, rng);
  auto dl = DeepLift(net, x, b, 2), ig = IntegratedGradients(net, x, b, 2, 3);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(dl.values[i], ig.values[i], 1e-12);
}

TEST(DeepLiftTest, SummationToDeltaOnConvNets) {
  std::mt19937_64 rng(5);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    auto net = ConvNet(3, 10, 100 + trial);
    auto x = RandomWindow(3, 10, rng), b = RandomWindow(3, 10, rng, 0.5);
    for (std::size_t c = 0; c < 3; ++c) {
      auto a = DeepLift(net, x, b, c);
      worst = std::max(worst, std::abs(a.Total() - (a.output - a.baseline_output)));
    }
  }
  EXPECT_LE(worst, 1e-4);
}

TEST(DeepLiftTest, EqualInputAndBaselineGiveZero) {
  std::mt19937_64 rng(6);
  auto net = ConvNet(2, 6, 1);
  auto x = RandomWindow(2, 6, rng);
  auto a = DeepLift(net, x, x, 0);
  for (double v : a.values.vec()) EXPECT_EQ(v, 0.0);
}

TEST(GradientShapTest, LinearSingleZeroBaseline) {
  std::mt19937_64 rng(7);
  TensorD w = RandomWindow(1, 8, rng);
  auto net = LinearNet(w, TensorD({1}, 0.5));
  auto x = RandomWindow(2, 4, rng);
  const TensorD base[] = {TensorD({2, 4}, 0.0)};
  auto a = GradientShap(net, x, base, 0, 200, 0.0, 3);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_NEAR(a.values[i], x[i] * w[i], 1e-2 * std::abs(x[i] * w[i]) + 1e-12);
  }
}

TEST(GradientShapTest, DegenerateDistributionGivesZero) {
  std::mt19937_64 rng(8);
  auto net = ConvNet(2, 5, 3);
  auto x = RandomWindow(2, 5, rng);
  const TensorD base[] = {x};
  auto a = GradientShap(net, x, base, 1, 16, 0.0, 1);
  for (double v : a.values.vec()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(GradientShap(net, x, {}, 1, 16, 0.0, 1), InvalidArgument);
}

TEST(GradientShapTest, DeterministicGivenSeed) {
  std::mt19937_64 rng(9);
  auto net = ConvNet(2, 5, 3);
  auto x = RandomWindow(2, 5, rng);
  const TensorD base[] = {TensorD({2, 5}, 0.0), RandomWindow(2, 5, rng)};
  auto a = GradientShap(net, x, base, 0, 10, 0.1, 42);
  auto b = GradientShap(net, x, base, 0, 10, 0.1, 42);
  EXPECT_EQ(a.values.vec(), b.values.vec());
}

TEST(GradientShapTest, StandardErrorShrinksWithSamples) {
  std::mt19937_64 rng(10);
  auto net = AdditiveTanhNet(2, 3, {2.0, -1.5});
  TensorD x = RandomWindow(2, 3, rng, 2.0);
  const TensorD base[] = {TensorD({2, 3}, 0.0)};
  auto spread = [&](std::size_t n) {
    std::vector<double> totals;
    for (std::uint64_t rep = 0; rep < 50; ++rep) {
      totals.push_back(GradientShap(net, x, base, 0, n, 0.0, 1000 * n + rep).Total());
    }
    const double mean = std::accumulate(totals.begin(), totals.end(), 0.0) / 50.0;
    double var = 0.0;
    for (double t : totals) var += (t - mean) * (t - mean);
    return std::sqrt(var / 49.0);
  };
  const double ratio = spread(40) / spread(20);
  EXPECT_GT(ratio, 0.5);
  EXPECT_LT(ratio, 0.95);
}

TEST(DeepLiftShapTest, IdenticalBaselinesMatchSingleDeepLift) {
  std::mt19937_64 rng(11);
  auto net = ConvNet(2, 6, 4);
  auto x = RandomWindow(2, 6, rng), b = RandomWindow(2, 6, rng);
  const std::vector<TensorD> same(5, b);
  auto shap = DeepLiftShap(net, x, same, 2);
  auto single = DeepLift(net, x, b, 2);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(shap.values[i], single.values[i], 1e-15);
}

TEST(MethodAgreement, LinearLogitAllMethodsCoincide) {
  std::mt19937_64 rng(12);
  const std::size_t c = 4, l = 3;
  TensorD w = RandomWindow(2, c * l, rng);
  auto net = LinearNet(w, TensorD({2}, std::vector<double>{0.3, -0.1}));
  auto x = RandomWindow(c, l, rng);
  std::vector<TensorD> baselines;
  for (int i = 0; i < 4; ++i) baselines.push_back(RandomWindow(c, l, rng));
  TensorD mean({c, l}, 0.0);
  for (const auto& b : baselines) {
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += b[i] / 4.0;
  }
  std::vector<double> expected(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) expected[i] = (x[i] - mean[i]) * w.at(1, i);

  auto ig = Attribute(net, Method::kIg, x, baselines, 1, {200, 200, 0.0});
  auto dl = Attribute(net, Method::kDeepLift, x, baselines, 1);
  auto dls = Attribute(net, Method::kDeepLiftShap, x, baselines, 1);
  auto gs = Attribute(net, Method::kGradShap, x, baselines, 1, {50, 200, 0.0}, 5);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_NEAR(ig.values[i], expected[i], 1e-6);
    EXPECT_NEAR(dl.values[i], expected[i], 1e-6);
    EXPECT_NEAR(dls.values[i], expected[i], 1e-6);
    EXPECT_NEAR(gs.values[i], expected[i], 1e-2 * std::abs(expected[i]) + 1e-9);
  }
  // Exact Shapley per channel against the mean baseline.
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t ch = 0; ch < c; ++ch) groups.push_back({ch});
  auto phi = ShapleyExact(LogitFn(net, 1), x, mean, groups);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double s = 0.0;
    for (std::size_t t = 0; t < l; ++t) s += expected[ch * l + t];
    EXPECT_NEAR(phi[ch], s, 1e-6);
  }
}

TEST(ShapleyTest, AdditiveModelRecoversGroupDeltas) {
  std::mt19937_64 rng(13);
  const std::size_t c = 12, l = 2;
  std::vector<double> a(c);
  for (std::size_t i = 0; i < c; ++i) a[i] = 0.5 + 0.25 * static_cast<double>(i);
  auto net = AdditiveTanhNet(c, l, a);
  auto x = RandomWindow(c, l, rng), b = RandomWindow(c, l, rng);
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < c; ++i) groups.push_back({i});
  auto phi = ShapleyExact(LogitFn(net, 0), x, b, groups);
  for (std::size_t i = 0; i < c; ++i) {
    const double gx = a[i] * std::tanh(0.5 * (x.at(i, 0) + x.at(i, 1)));
    const double gb = a[i] * std::tanh(0.5 * (b.at(i, 0) + b.at(i, 1)));
    EXPECT_NEAR(phi[i], gx - gb, 1e-9);
  }
}

TEST(ShapleyTest, SingleGroupIsTotalDelta) {
  std::mt19937_64 rng(14);
  auto net = ConvNet(3, 6, 5);
  auto x = RandomWindow(3, 6, rng), b = RandomWindow(3, 6, rng);
  auto f = LogitFn(net, 0);
  auto phi = ShapleyExact(f, x, b, {{0, 1, 2}});
  EXPECT_NEAR(phi[0], f(x) - f(b), 1e-12);
}

TEST(ShapleyTest, SymmetricGroupsShareEqually) {
  auto net = AdditiveTanhNet(2, 2, {1.0, 1.0});
  TensorD x({2, 2}, 0.7), b({2, 2}, 0.0);
  auto phi = ShapleyExact(LogitFn(net, 0), x, b, {{0}, {1}});
  EXPECT_NEAR(phi[0], phi[1], 1e-15);
}

TEST(ShapleyTest, TooManyGroupsRejected) {
  auto net = AdditiveTanhNet(13, 1, std::vector<double>(13, 1.0));
  TensorD x({13, 1}, 1.0), b({13, 1}, 0.0);
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < 13; ++i) groups.push_back({i});
  EXPECT_THROW(ShapleyExact(LogitFn(net, 0), x, b, groups), InvalidArgument);
}

TEST(ShapleyTest, FourGroupToyAllMethodsWithinFivePercent) {
  std::mt19937_64 rng(15);
  const std::size_t c = 8, l = 3;
  auto net = AdditiveTanhNet(c, l, {1.0, 1.0, -2.0, -2.0, 0.5, 0.5, 3.0, 3.0});
  const std::vector<std::vector<std::size_t>> groups = {{0, 1}, {2, 3}, {4, 5}, {6, 7}};
  auto x = RandomWindow(c, l, rng, 0.8);
  const TensorD base[] = {TensorD({c, l}, 0.0)};
  auto phi = ShapleyExact(LogitFn(net, 0), x, base[0], groups);
  for (auto m : AllMethods()) {
    auto a = Attribute(net, m, x, base, 0, {200, 2000, 0.0}, 17);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      double s = 0.0;
      for (auto ch : groups[g]) {
        for (std::size_t t = 0; t < l; ++t) s += a.values.at(ch, t);
      }
      EXPECT_NEAR(s, phi[g], 0.05 * std::abs(phi[g])) << MethodName(m) << " group " << g;
    }
  }
}

prep::WindowDataset Reference(std::size_t n, std::uint64_t seed) {
  prep::WindowDataset ds;
  ds.channels = 3;
  ds.window = 4;
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 1.0f);
  for (std::size_t i = 0; i < n * 12; ++i) ds.values.push_back(g(rng));
  ds.labels.assign(n, 0);
  return ds;
}

TEST(BaselineTest, Kinds) {
  auto ref = Reference(4000, 1);
  auto zero = MakeBaselines({BaselineKind::kZero, 1}, ref, 0);
  ASSERT_EQ(zero.size(), 1u);
  EXPECT_EQ(zero[0].shape(), (Shape{3, 4}));
  for (double v : zero[0].vec()) EXPECT_EQ(v, 0.0);
  auto mean = MakeBaselines({BaselineKind::kMean, 1}, ref, 0);
  for (double v : mean[0].vec()) EXPECT_LT(std::abs(v), 0.1);
  auto med = MakeBaselines({BaselineKind::kMedian, 1}, ref, 0);
  for (double v : med[0].vec()) EXPECT_LT(std::abs(v), 0.1);
  auto r1 = MakeBaselines({BaselineKind::kRandom, 5}, ref, 9);
  auto r2 = MakeBaselines({BaselineKind::kRandom, 5}, ref, 9);
  ASSERT_EQ(r1.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(r1[i].vec(), r2[i].vec());
  EXPECT_THROW(MakeBaselines({BaselineKind::kMean, 1}, prep::WindowDataset{}, 0),
               InvalidArgument);
}

TEST(BaselineTest, MedianOfOddAndEvenSets) {
  prep::WindowDataset ds;
  ds.channels = 1;
  ds.window = 1;
  ds.values = {5, 1, 3};
  ds.labels = {0, 0, 0};
  EXPECT_EQ(MakeBaselines({BaselineKind::kMedian, 1}, ds, 0)[0][0], 3.0);
  ds.values.push_back(10);
  ds.labels.push_back(0);
  EXPECT_EQ(MakeBaselines({BaselineKind::kMedian, 1}, ds, 0)[0][0], 4.0);
}

TEST(NamesTest, ParseRoundTripAndErrors) {
  for (auto m : AllMethods()) EXPECT_EQ(ParseMethod(MethodName(m)), m);
  for (auto b : AllBaselines()) EXPECT_EQ(ParseBaseline(BaselineName(b)), b);
  try {
    ParseMethod("lime");
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("ig, deeplift, gradshap, dlshap"), std::string::npos);
  }
  EXPECT_THROW(ParseBaseline("uniform"), InvalidArgument);
}

TEST(GfiTest, SingleActiveChannelRanksFirst) {
  std::vector<TensorD> attrs(3, TensorD({5, 2}, 0.0));
  attrs[1].at(3, 1) = -4.0;
  auto gfi = Gfi(attrs);
  EXPECT_GT(gfi[3], 0.0);
  auto rank = RankDescending(gfi);
  EXPECT_EQ(rank, (std::vector<std::size_t>{3, 0, 1, 2, 4}));
}

TEST(GfiTest, HandMean) {
  std::vector<TensorD> attrs = {TensorD({1, 2}, std::vector<double>{0.1, -0.1}),
                                TensorD({1, 2}, std::vector<double>{-0.3, 0.3})};
  EXPECT_NEAR(Gfi(attrs)[0], 0.2, 1e-15);
}

TEST(GfiTest, PermutationEquivariant) {
  std::mt19937_64 rng(16);
  std::vector<TensorD> attrs, perm;
  const std::vector<std::size_t> p = {2, 0, 3, 1};
  for (int i = 0; i < 5; ++i) {
    attrs.push_back(RandomWindow(4, 3, rng));
    TensorD q({4, 3});
    for (std::size_t c = 0; c < 4; ++c) {
      for (std::size_t t = 0; t < 3; ++t) q.at(c, t) = attrs.back().at(p[c], t);
    }
    perm.push_back(q);
  }
  auto a = Gfi(attrs), b = Gfi(perm);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_DOUBLE_EQ(b[c], a[p[c]]);
}

TEST(PcfiTest, ClassesIsolated) {
  std::vector<TensorD> attrs;
  std::vector<std::uint8_t> labels;
  for (int i = 0; i < 4; ++i) {
    TensorD a({3, 2}, 0.0);
    const bool first = i % 2 == 0;
    a.at(first ? 0 : 2, 0) = 1.0;
    attrs.push_back(a);
    labels.push_back(first ? 0 : 1);
  }
  attrs.push_back(TensorD({3, 2}, 0.0));
  labels.push_back(4);
  auto r = BuildImportance(attrs, labels, {"a", "b", "c"});
  EXPECT_EQ(r.class_ranking[0][0], 0u);
  EXPECT_EQ(r.class_ranking[1][0], 2u);
  EXPECT_EQ(r.pcfi[4], (std::vector<double>{0, 0, 0}));
  EXPECT_FALSE(r.class_present[3]);
  EXPECT_TRUE(r.pcfi[3].empty());
  auto csv = PcfiCsv(r, data::ClassNames(data::Task::kFaultType));
  EXPECT_NE(csv.find("F3,0,,,\n"), std::string::npos) << csv;
  const std::span<const TensorD> two_classes(attrs.data(), 4);
  auto r2 = BuildImportance(two_classes, std::span(labels).first(4), {"a", "b", "c"});
  auto overlap = PcfiOverlap(r2, 1);
  EXPECT_TRUE(overlap.shared.empty());
  EXPECT_EQ(overlap.unique[0], (std::vector<std::size_t>{0}));
  EXPECT_EQ(overlap.unique[1], (std::vector<std::size_t>{2}));
}

TEST(PcfiTest, SingleClassRowEqualsGfi) {
  std::mt19937_64 rng(17);
  std::vector<TensorD> attrs;
  for (int i = 0; i < 6; ++i) attrs.push_back(RandomWindow(3, 4, rng));
  const std::vector<std::uint8_t> labels(6, 5);
  auto r = BuildImportance(attrs, labels, {});
  EXPECT_EQ(r.pcfi[5], r.gfi);
}

TEST(InteractionTest, AdditiveModelHasNoInteractions) {
  std::mt19937_64 rng(18);
  auto net = AdditiveTanhNet(5, 3, {1.0, -1.0, 2.0, 0.5, 1.5});
  std::vector<TensorD> xs;
  for (int i = 0; i < 4; ++i) xs.push_back(RandomWindow(5, 3, rng));
  const std::size_t target[] = {0};
  auto m = FeatureInteractions(net, target, xs, TensorD({5, 3}, 0.0), {});
  EXPECT_TRUE(m.flagged.empty());
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(m.normalized[i][i], 1.0);
    for (std::size_t j = 0; j < 5; ++j) {
      EXPECT_NEAR(m.normalized[i][j], m.normalized[j][i], 1e-9);
      if (i != j) {
        EXPECT_LE(std::abs(m.raw[i][j]), 1e-6);
      }
    }
  }
}

TEST(InteractionTest, ProductModelFollowsLiteralRule) {
  // f = x1 * x2 on a [2 x 1] window with a zero baseline: every masking
  // removes the full product, so I = -f(x).
  ScalarFn f = [](const TensorD& x) { return x[0] * x[1]; };
  const TensorD opposite[] = {TensorD({2, 1}, std::vector<double>{2.0, -3.0})};
  auto m = FeatureInteractions(f, opposite, TensorD({2, 1}, 0.0), {"x1", "x2"});
  EXPECT_NEAR(m.raw[0][1], 6.0, 1e-12);
  ASSERT_EQ(m.flagged.size(), 1u);
  EXPECT_EQ(m.flagged[0], (std::pair<std::size_t, std::size_t>{0, 1}));
  const TensorD same[] = {TensorD({2, 1}, std::vector<double>{2.0, 3.0})};
  auto n = FeatureInteractions(f, same, TensorD({2, 1}, 0.0), {"x1", "x2"});
  EXPECT_NEAR(n.raw[0][1], -6.0, 1e-12);
  EXPECT_EQ(n.normalized[0][1], -1.0);
  EXPECT_TRUE(n.flagged.empty());
}

TEST(InteractionTest, IgnoredInputsRejected) {
  ScalarFn f = [](const TensorD&) { return 1.0; };
  const TensorD xs[] = {TensorD({2, 1}, 1.0)};
  EXPECT_THROW(FeatureInteractions(f, xs, TensorD({2, 1}, 0.0), {}), InvalidArgument);
}

TEST(SelectTest, TopKAndTies) {
  ImportanceReport r;
  r.gfi = {0.1, 0.5, 0.3, 0.3, 0.0};
  r.feature_names = {"a", "b", "c", "d", "e"};
  r.ranking = RankDescending(r.gfi);
  auto all = SelectTopK(r, 5);
  EXPECT_EQ(all.channels.size(), 5u);
  auto two = SelectTopK(r, 2);
  EXPECT_EQ(two.channels, (std::vector<std::size_t>{1, 2}));
  EXPECT_TRUE(two.boundary_tie);
  EXPECT_FALSE(SelectTopK(r, 3).boundary_tie);
  EXPECT_THROW(SelectTopK(r, 0), InvalidArgument);
  EXPECT_THROW(SelectTopK(r, 6), InvalidArgument);
  auto back = ParseFeatureSelection(FeatureSelectionJson(two));
  EXPECT_EQ(back.channels, two.channels);
  EXPECT_EQ(back.names, (std::vector<std::string>{"b", "c"}));
  EXPECT_EQ(GfiCsv(r, 2), "rank,feature,score\n1,b,0.5\n2,c,0.3\n");
}

TEST(TimingTest, LayoutAndPositiveTimes) {
  std::mt19937_64 rng(19);
  auto net = ConvNet(2, 6, 7);
  std::vector<TensorD> xs = {RandomWindow(2, 6, rng), RandomWindow(2, 6, rng)};
  const std::vector<std::size_t> targets = {0, 1};
  const std::vector<TensorD> base = {TensorD({2, 6}, 0.0)};
  auto row = TimeMethods("toy", net, xs, targets, base, {{5, 5, 0.0}, 3});
  for (double s : row.seconds) EXPECT_GT(s, 0.0);
  const TimingRow rows[] = {row};
  auto csv = TimingCsv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "Model,IGs,DeepLIFT,Gradient SHAP,DeepLIFT SHAP");
}

TEST(AttributeDatasetTest, ThreadCountDoesNotChangeResults) {
  auto ds = Reference(9, 3);
  for (std::size_t i = 0; i < ds.size(); ++i) ds.labels[i] = static_cast<std::uint8_t>(i % 3);
  auto make = [] { return ConvNet(3, 4, 8); };
  const std::vector<TensorD> base = {TensorD({3, 4}, 0.0), TensorD({3, 4}, 0.5)};
  auto a = AttributeDataset(make, Method::kGradShap, ds, base, {}, 11, 1);
  auto b = AttributeDataset(make, Method::kGradShap, ds, base, {}, 11, 3);
  ASSERT_EQ(a.size(), 9u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].vec(), b[i].vec());
}

TEST(ModelTest, GruModelAttributionsAreFiniteAndZeroAtBaseline) {
  nn::ArchOptions o;
  o.input_channels = 3;
  o.window = 12;
  o.channel_divisor = 8;
  o.hidden = 8;
  o.fc_hidden = 8;
  nn::Model<double> model(nn::FtcmSpec(o), 3);
  auto net = FromModel(model);
  std::mt19937_64 rng(20);
  auto x = RandomWindow(3, 12, rng);
  TensorD zero({3, 12}, 0.0);
  auto dl = DeepLift(net, x, zero, 4);
  EXPECT_TRUE(dl.values.AllFinite());
  auto same = DeepLift(net, x, x, 4);
  for (double v : same.values.vec()) EXPECT_EQ(v, 0.0);
  auto ig = IntegratedGradients(net, x, zero, 4, 200);
  const double delta = ig.output - ig.baseline_output;
  EXPECT_LE(std::abs(ig.Total() - delta), 0.01 * std::abs(delta) + 1e-9);
}

}  // namespace
}  // namespace xfdd::xai

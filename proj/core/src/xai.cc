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

#include "xfdd/xai.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "xfdd/error.h"
#include "xfdd/ops.h"

namespace xfdd::xai {
namespace {

using json = nlohmann::json;
using TensorD = Tensor<double>;

constexpr std::size_t kChunk = 32;

std::string Lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

void RequireWindow(const TensorD& x, const char* what) {
  if (x.rank() != 2) {
    throw ShapeError(std::string(what) + " must be a [C x L] window");
  }
}

void RequireSameShape(const TensorD& x, const TensorD& b) {
  if (x.shape() != b.shape()) {
    throw ShapeError("baseline shape " + ShapeToString(b.shape()) +
                     " does not match input shape " + ShapeToString(x.shape()));
  }
}

TensorD Stack(std::span<const TensorD* const> xs) {
  const Shape& s = xs.front()->shape();
  TensorD out({xs.size(), s[0], s[1]});
  const std::size_t n = xs.front()->size();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::copy(xs[i]->raw(), xs[i]->raw() + n, out.raw() + i * n);
  }
  return out;
}

// Calls visit(i, grad of f_target at points[i]) for every point.
template <typename F>
void ForEachGradient(const Network& net, std::span<const TensorD> points,
                     std::size_t target, F visit) {
  const std::size_t n = points.empty() ? 0 : points[0].size();
  for (std::size_t start = 0; start < points.size(); start += kChunk) {
    const std::size_t count = std::min(kChunk, points.size() - start);
    std::vector<const TensorD*> ptrs;
    for (std::size_t i = 0; i < count; ++i) ptrs.push_back(&points[start + i]);
    ad::Tape<double> tape;
    auto in = tape.Leaf(Stack(ptrs));
    auto logits = net(in);
    if (target >= logits.value().dim(1)) {
      throw InvalidArgument("target class " + std::to_string(target) +
                            " outside the model's " +
                            std::to_string(logits.value().dim(1)) + " outputs");
    }
    std::vector<std::size_t> cols(count, target);
    auto grads = tape.Backward(ad::Sum(ad::GatherColumns(logits, cols)));
    const TensorD& g = grads.of(in);
    for (std::size_t i = 0; i < count; ++i) visit(start + i, g.raw() + i * n);
  }
}

TensorD MeanOf(std::span<const TensorD> xs) {
  if (xs.empty()) throw InvalidArgument("empty baseline set");
  TensorD m(xs[0].shape(), 0.0);
  for (const auto& x : xs) {
    RequireSameShape(m, x);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += x[i];
  }
  for (auto& v : m.vec()) v /= static_cast<double>(xs.size());
  return m;
}

double Median(std::vector<double>& v) {
  const std::size_t n = v.size();
  std::nth_element(v.begin(), v.begin() + static_cast<long>(n / 2), v.end());
  const double hi = v[n / 2];
  if (n % 2 == 1) return hi;
  return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + static_cast<long>(n / 2)));
}

// Values of the windows derived from sample `index`.
using BatchFn =
    std::function<std::vector<double>(std::size_t index, std::span<const TensorD>)>;

InteractionMatrix Interactions(const BatchFn& f, std::span<const TensorD> samples,
                               const TensorD& baseline,
                               std::vector<std::string> names) {
  if (samples.empty()) throw InvalidArgument("feature interactions need samples");
  RequireWindow(baseline, "baseline");
  const std::size_t c = baseline.dim(0);
  if (names.empty()) {
    for (std::size_t i = 0; i < c; ++i) names.push_back(std::to_string(i));
  }
  if (names.size() != c) throw ShapeError("feature name count does not match channels");
  std::vector<double> single(c, 0.0);
  std::vector<std::vector<double>> pair(c, std::vector<double>(c, 0.0));
  std::vector<TensorD> batch;
  for (std::size_t si = 0; si < samples.size(); ++si) {
    const TensorD& x = samples[si];
    RequireSameShape(x, baseline);
    batch.clear();
    batch.push_back(x);
    for (std::size_t i = 0; i < c; ++i) {
      const std::size_t s[] = {i};
      batch.push_back(MaskChannels(x, baseline, s));
    }
    for (std::size_t i = 0; i < c; ++i) {
      for (std::size_t j = i + 1; j < c; ++j) {
        const std::size_t s[] = {i, j};
        batch.push_back(MaskChannels(x, baseline, s));
      }
    }
    const auto v = f(si, batch);
    std::size_t k = 1;
    for (std::size_t i = 0; i < c; ++i) single[i] += v[0] - v[k++];
    for (std::size_t i = 0; i < c; ++i) {
      for (std::size_t j = i + 1; j < c; ++j) pair[i][j] += v[0] - v[k++];
    }
  }
  const auto n = static_cast<double>(samples.size());
  for (auto& a : single) a /= n;
  double largest = 0.0;
  for (double a : single) largest = std::max(largest, std::abs(a));
  if (largest < 1e-12) {
    throw InvalidArgument("feature interactions: masking any channel leaves the "
                          "output unchanged, scores are non-informative");
  }
  InteractionMatrix m;
  m.feature_names = std::move(names);
  m.single = single;
  m.raw.assign(c, std::vector<double>(c, 0.0));
  m.normalized.assign(c, std::vector<double>(c, 0.0));
  for (std::size_t i = 0; i < c; ++i) {
    m.raw[i][i] = single[i];
    m.normalized[i][i] = 1.0;
    for (std::size_t j = i + 1; j < c; ++j) {
      const double joint = pair[i][j] / n;
      const double inter = joint - single[i] - single[j];
      m.raw[i][j] = m.raw[j][i] = inter;
      const double scale =
          std::max({std::abs(single[i]), std::abs(single[j]), 1e-12});
      m.normalized[i][j] = m.normalized[j][i] = std::clamp(inter / scale, -1.0, 1.0);
      if (joint > single[i] + single[j] + kInteractionTolerance) {
        m.flagged.emplace_back(i, j);
      }
    }
  }
  return m;
}

}  // namespace

Network FromModel(nn::Model<double>& model) {
  return [&model](const ad::Var<double>& input) {
    return model.Forward(input, nn::Mode::kEval);
  };
}

std::string MethodName(Method m) {
  switch (m) {
    case Method::kIg: return "ig";
    case Method::kDeepLift: return "deeplift";
    case Method::kGradShap: return "gradshap";
    case Method::kDeepLiftShap: return "dlshap";
  }
  return "?";
}

std::string MethodTitle(Method m) {
  switch (m) {
    case Method::kIg: return "IGs";
    case Method::kDeepLift: return "DeepLIFT";
    case Method::kGradShap: return "Gradient SHAP";
    case Method::kDeepLiftShap: return "DeepLIFT SHAP";
  }
  return "?";
}

Method ParseMethod(const std::string& name) {
  const std::string n = Lower(name);
  for (auto m : AllMethods()) {
    if (n == MethodName(m)) return m;
  }
  throw InvalidArgument("unknown attribution method '" + name +
                        "' (valid: ig, deeplift, gradshap, dlshap)");
}

std::string BaselineName(BaselineKind b) {
  switch (b) {
    case BaselineKind::kZero: return "zero";
    case BaselineKind::kMean: return "mean";
    case BaselineKind::kMedian: return "median";
    case BaselineKind::kRandom: return "random";
  }
  return "?";
}

BaselineKind ParseBaseline(const std::string& name) {
  const std::string n = Lower(name);
  for (auto b : AllBaselines()) {
    if (n == BaselineName(b)) return b;
  }
  throw InvalidArgument("unknown baseline '" + name +
                        "' (valid: zero, mean, median, random)");
}

const std::vector<Method>& AllMethods() {
  static const std::vector<Method> kAll = {Method::kIg, Method::kDeepLift,
                                           Method::kGradShap, Method::kDeepLiftShap};
  return kAll;
}

const std::vector<BaselineKind>& AllBaselines() {
  static const std::vector<BaselineKind> kAll = {
      BaselineKind::kZero, BaselineKind::kMean, BaselineKind::kMedian,
      BaselineKind::kRandom};
  return kAll;
}

std::vector<TensorD> MakeBaselines(const BaselineSpec& spec,
                                   const prep::WindowDataset& reference,
                                   std::uint64_t seed) {
  const Shape shape{reference.channels, reference.window};
  if (spec.kind == BaselineKind::kZero) return {TensorD(shape, 0.0)};
  if (reference.size() == 0) {
    throw InvalidArgument(BaselineName(spec.kind) +
                          " baseline needs a non-empty reference set");
  }
  const std::size_t n = reference.size(), d = reference.sample_size();
  switch (spec.kind) {
    case BaselineKind::kMean: {
      TensorD m(shape, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        auto s = reference.sample(i);
        for (std::size_t e = 0; e < d; ++e) m[e] += s[e];
      }
      for (auto& v : m.vec()) v /= static_cast<double>(n);
      return {m};
    }
    case BaselineKind::kMedian: {
      TensorD m(shape, 0.0);
      std::vector<double> column(n);
      for (std::size_t e = 0; e < d; ++e) {
        for (std::size_t i = 0; i < n; ++i) column[i] = reference.values[i * d + e];
        m[e] = Median(column);
      }
      return {m};
    }
    case BaselineKind::kRandom: {
      if (spec.count == 0) throw InvalidArgument("random baseline count must be >= 1");
      std::mt19937_64 rng(seed);
      std::vector<std::size_t> idx(n);
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      std::vector<TensorD> out;
      while (out.size() < spec.count) {
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t i = 0; i < n && out.size() < spec.count; ++i) {
          auto s = reference.sample(idx[i]);
          out.emplace_back(shape, std::vector<double>(s.begin(), s.end()));
        }
      }
      return out;
    }
    case BaselineKind::kZero: break;
  }
  return {TensorD(shape, 0.0)};
}

double Attribution::Total() const {
  return std::accumulate(values.vec().begin(), values.vec().end(), 0.0);
}

std::vector<double> Logits(const Network& net, std::span<const TensorD> xs,
                           std::size_t target) {
  std::vector<double> out;
  out.reserve(xs.size());
  for (std::size_t start = 0; start < xs.size(); start += kChunk) {
    const std::size_t count = std::min(kChunk, xs.size() - start);
    std::vector<const TensorD*> ptrs;
    for (std::size_t i = 0; i < count; ++i) {
      RequireWindow(xs[start + i], "input");
      ptrs.push_back(&xs[start + i]);
    }
    ad::Tape<double> tape;
    auto z = net(tape.Constant(Stack(ptrs)));
    const TensorD& v = z.value();
    if (target >= v.dim(1)) throw InvalidArgument("target class outside the model outputs");
    for (std::size_t i = 0; i < count; ++i) out.push_back(v.at(i, target));
  }
  return out;
}

double Logit(const Network& net, const TensorD& x, std::size_t target) {
  return Logits(net, {&x, 1}, target)[0];
}

Attribution IntegratedGradients(const Network& net, const TensorD& x,
                                const TensorD& baseline, std::size_t target,
                                std::size_t steps) {
  RequireWindow(x, "input");
  RequireSameShape(x, baseline);
  if (steps == 0) throw InvalidArgument("integrated gradients need steps >= 1");
  std::vector<TensorD> points(steps, TensorD(x.shape()));
  for (std::size_t i = 0; i < steps; ++i) {
    const double a = (static_cast<double>(i) + 0.5) / static_cast<double>(steps);
    for (std::size_t e = 0; e < x.size(); ++e) {
      points[i][e] = baseline[e] + a * (x[e] - baseline[e]);
    }
  }
  std::vector<double> sum(x.size(), 0.0);
  ForEachGradient(net, points, target, [&](std::size_t, const double* g) {
    for (std::size_t e = 0; e < sum.size(); ++e) sum[e] += g[e];
  });
  Attribution a;
  a.method = Method::kIg;
  a.target = target;
  a.values = TensorD(x.shape());
  for (std::size_t e = 0; e < sum.size(); ++e) {
    a.values[e] = (x[e] - baseline[e]) * sum[e] / static_cast<double>(steps);
  }
  const TensorD ends[] = {x, baseline};
  const auto f = Logits(net, ends, target);
  a.output = f[0];
  a.baseline_output = f[1];
  return a;
}

Attribution DeepLift(const Network& net, const TensorD& x, const TensorD& baseline,
                     std::size_t target) {
  RequireWindow(x, "input");
  RequireSameShape(x, baseline);
  const TensorD* pair[] = {&x, &baseline};
  ad::Tape<double> tape;
  auto in = tape.Leaf(Stack(pair));
  auto logits = net(in);
  if (target >= logits.value().dim(1)) {
    throw InvalidArgument("target class outside the model outputs");
  }
  const std::size_t cols[] = {target, target};
  auto picked = ad::Reshape(ad::GatherColumns(logits, cols), Shape{2, 1});
  auto out = ad::Sum(ad::RowBlock(picked, 0, 1));
  auto grads = tape.Backward(out, ad::BackwardRule::kRescale);
  const TensorD& g = grads.of(in);
  Attribution a;
  a.method = Method::kDeepLift;
  a.target = target;
  a.values = TensorD(x.shape());
  for (std::size_t e = 0; e < x.size(); ++e) a.values[e] = g[e] * (x[e] - baseline[e]);
  a.output = logits.value().at(0, target);
  a.baseline_output = logits.value().at(1, target);
  return a;
}

Attribution GradientShap(const Network& net, const TensorD& x,
                         std::span<const TensorD> baselines, std::size_t target,
                         std::size_t samples, double sigma, std::uint64_t seed) {
  RequireWindow(x, "input");
  if (baselines.empty()) throw InvalidArgument("gradient SHAP needs at least one baseline");
  if (samples == 0) throw InvalidArgument("gradient SHAP needs samples >= 1");
  if (sigma < 0) throw InvalidArgument("noise sigma must be non-negative");
  for (const auto& b : baselines) RequireSameShape(x, b);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<TensorD> points(samples, TensorD(x.shape()));
  std::vector<std::size_t> which(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    which[s] = s % baselines.size();
    const TensorD& b = baselines[which[s]];
    const double alpha = unit(rng);
    for (std::size_t e = 0; e < x.size(); ++e) {
      points[s][e] = b[e] + alpha * (x[e] - b[e]);
      if (sigma > 0) points[s][e] += sigma * noise(rng);
    }
  }
  Attribution a;
  a.method = Method::kGradShap;
  a.target = target;
  a.values = TensorD(x.shape(), 0.0);
  ForEachGradient(net, points, target, [&](std::size_t s, const double* g) {
    const TensorD& b = baselines[which[s]];
    for (std::size_t e = 0; e < x.size(); ++e) a.values[e] += (x[e] - b[e]) * g[e];
  });
  for (auto& v : a.values.vec()) v /= static_cast<double>(samples);
  a.output = Logit(net, x, target);
  const auto fb = Logits(net, baselines, target);
  a.baseline_output = std::accumulate(fb.begin(), fb.end(), 0.0) /
                      static_cast<double>(fb.size());
  return a;
}

Attribution DeepLiftShap(const Network& net, const TensorD& x,
                         std::span<const TensorD> baselines, std::size_t target) {
  if (baselines.empty()) throw InvalidArgument("DeepLIFT SHAP needs at least one baseline");
  Attribution a;
  a.method = Method::kDeepLiftShap;
  a.target = target;
  a.values = TensorD(x.shape(), 0.0);
  for (const auto& b : baselines) {
    Attribution one = DeepLift(net, x, b, target);
    for (std::size_t e = 0; e < x.size(); ++e) a.values[e] += one.values[e];
    a.output = one.output;
    a.baseline_output += one.baseline_output;
  }
  const auto k = static_cast<double>(baselines.size());
  for (auto& v : a.values.vec()) v /= k;
  a.baseline_output /= k;
  return a;
}

Attribution Attribute(const Network& net, Method method, const TensorD& x,
                      std::span<const TensorD> baselines, std::size_t target,
                      const MethodOptions& options, std::uint64_t seed) {
  switch (method) {
    case Method::kIg:
      return IntegratedGradients(net, x, MeanOf(baselines), target, options.ig_steps);
    case Method::kDeepLift:
      return DeepLift(net, x, MeanOf(baselines), target);
    case Method::kGradShap:
      return GradientShap(net, x, baselines, target, options.gradshap_samples,
                          options.gradshap_sigma, seed);
    case Method::kDeepLiftShap:
      return DeepLiftShap(net, x, baselines, target);
  }
  throw InvalidArgument("unknown method");
}

ScalarFn LogitFn(const Network& net, std::size_t target) {
  return [net, target](const TensorD& x) { return Logit(net, x, target); };
}

TensorD MaskChannels(const TensorD& x, const TensorD& baseline,
                     std::span<const std::size_t> channels) {
  RequireWindow(x, "input");
  RequireSameShape(x, baseline);
  TensorD out = x;
  const std::size_t len = x.dim(1);
  for (auto c : channels) {
    if (c >= x.dim(0)) throw InvalidArgument("channel " + std::to_string(c) + " out of range");
    std::copy(baseline.raw() + c * len, baseline.raw() + (c + 1) * len, out.raw() + c * len);
  }
  return out;
}

std::vector<double> ShapleyExact(const ScalarFn& f, const TensorD& x,
                                 const TensorD& baseline,
                                 const std::vector<std::vector<std::size_t>>& groups) {
  const std::size_t g = groups.size();
  if (g == 0) throw InvalidArgument("Shapley oracle needs at least one group");
  if (g > kMaxShapleyGroups) {
    throw InvalidArgument("Shapley oracle supports at most " +
                          std::to_string(kMaxShapleyGroups) + " groups, got " +
                          std::to_string(g));
  }
  RequireSameShape(x, baseline);
  const std::size_t subsets = std::size_t{1} << g;
  std::vector<double> value(subsets);
  for (std::size_t s = 0; s < subsets; ++s) {
    std::vector<std::size_t> masked;
    for (std::size_t j = 0; j < g; ++j) {
      if (!(s >> j & 1)) masked.insert(masked.end(), groups[j].begin(), groups[j].end());
    }
    value[s] = f(MaskChannels(x, baseline, masked));
  }
  std::vector<double> fact(g + 1, 1.0);
  for (std::size_t i = 1; i <= g; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);
  std::vector<double> phi(g, 0.0);
  for (std::size_t j = 0; j < g; ++j) {
    const std::size_t bit = std::size_t{1} << j;
    for (std::size_t s = 0; s < subsets; ++s) {
      if (s & bit) continue;
      const auto size = static_cast<std::size_t>(std::popcount(s));
      const double w = fact[size] * fact[g - size - 1] / fact[g];
      phi[j] += w * (value[s | bit] - value[s]);
    }
  }
  return phi;
}

std::vector<std::size_t> RankDescending(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

std::vector<double> Gfi(std::span<const TensorD> attributions) {
  if (attributions.empty()) throw InvalidArgument("GFI of an empty attribution set");
  RequireWindow(attributions[0], "attribution");
  const std::size_t c = attributions[0].dim(0), l = attributions[0].dim(1);
  std::vector<double> gfi(c, 0.0);
  for (const auto& a : attributions) {
    RequireSameShape(attributions[0], a);
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t t = 0; t < l; ++t) gfi[ch] += std::abs(a.at(ch, t));
    }
  }
  for (auto& v : gfi) v /= static_cast<double>(attributions.size() * l);
  return gfi;
}

void Pcfi(std::span<const TensorD> attributions, std::span<const std::uint8_t> labels,
          std::size_t classes, ImportanceReport& report) {
  if (attributions.size() != labels.size()) {
    throw ShapeError("attribution and label counts differ");
  }
  report.pcfi.assign(classes, {});
  report.class_present.assign(classes, false);
  report.class_ranking.assign(classes, {});
  for (std::size_t c = 0; c < classes; ++c) {
    std::vector<TensorD> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == c) members.push_back(attributions[i]);
    }
    if (members.empty()) continue;
    report.class_present[c] = true;
    report.pcfi[c] = Gfi(members);
    report.class_ranking[c] = RankDescending(report.pcfi[c]);
  }
}

ImportanceReport BuildImportance(std::span<const TensorD> attributions,
                                 std::span<const std::uint8_t> labels,
                                 std::vector<std::string> feature_names,
                                 std::size_t classes) {
  ImportanceReport r;
  r.gfi = Gfi(attributions);
  if (feature_names.empty()) {
    for (std::size_t i = 0; i < r.gfi.size(); ++i) feature_names.push_back(std::to_string(i));
  }
  if (feature_names.size() != r.gfi.size()) {
    throw ShapeError("feature name count does not match attribution channels");
  }
  r.feature_names = std::move(feature_names);
  r.ranking = RankDescending(r.gfi);
  Pcfi(attributions, labels, classes, r);
  return r;
}

FeatureOverlap PcfiOverlap(const ImportanceReport& report, std::size_t k) {
  const std::size_t classes = report.class_present.size();
  std::vector<std::vector<bool>> in_top(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    if (!report.class_present[c]) continue;
    in_top[c].assign(report.gfi.size(), false);
    const auto& rank = report.class_ranking[c];
    for (std::size_t i = 0; i < std::min(k, rank.size()); ++i) in_top[c][rank[i]] = true;
  }
  FeatureOverlap o;
  o.unique.assign(classes, {});
  for (std::size_t f = 0; f < report.gfi.size(); ++f) {
    std::size_t hits = 0, present = 0, owner = 0;
    for (std::size_t c = 0; c < classes; ++c) {
      if (!report.class_present[c]) continue;
      ++present;
      if (in_top[c][f]) {
        ++hits;
        owner = c;
      }
    }
    if (present > 0 && hits == present) o.shared.push_back(f);
    if (hits == 1 && present > 1) o.unique[owner].push_back(f);
  }
  return o;
}

std::string GfiCsv(const ImportanceReport& report, std::size_t top) {
  std::ostringstream os;
  os.precision(10);
  os << "rank,feature,score\n";
  const std::size_t n = top == 0 ? report.ranking.size()
                                 : std::min(top, report.ranking.size());
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t f = report.ranking[i];
    const std::string& name = report.feature_names[f];
    os << i + 1 << ','
       << (name.find(',') != std::string::npos ? "\"" + name + "\"" : name) << ','
       << report.gfi[f] << '\n';
  }
  return os.str();
}

std::string PcfiCsv(const ImportanceReport& report,
                    std::span<const std::string> class_names) {
  auto quote = [](const std::string& s) {
    return s.find(',') != std::string::npos ? "\"" + s + "\"" : s;
  };
  std::ostringstream os;
  os.precision(10);
  os << "class,present";
  for (const auto& n : report.feature_names) os << ',' << quote(n);
  os << '\n';
  for (std::size_t c = 0; c < report.pcfi.size(); ++c) {
    os << (c < class_names.size() ? class_names[c] : std::to_string(c)) << ','
       << (report.class_present[c] ? 1 : 0);
    for (std::size_t f = 0; f < report.feature_names.size(); ++f) {
      os << ',';
      if (report.class_present[c]) os << report.pcfi[c][f];
    }
    os << '\n';
  }
  return os.str();
}

InteractionMatrix FeatureInteractions(const ScalarFn& f,
                                      std::span<const TensorD> samples,
                                      const TensorD& baseline,
                                      std::vector<std::string> feature_names) {
  return Interactions(
      [&f](std::size_t, std::span<const TensorD> xs) {
        std::vector<double> out;
        for (const auto& x : xs) out.push_back(f(x));
        return out;
      },
      samples, baseline, std::move(feature_names));
}

InteractionMatrix FeatureInteractions(const Network& net,
                                      std::span<const std::size_t> targets,
                                      std::span<const TensorD> samples,
                                      const TensorD& baseline,
                                      std::vector<std::string> feature_names) {
  if (targets.size() != 1 && targets.size() != samples.size()) {
    throw ShapeError("expected one target, or one per sample");
  }
  return Interactions(
      [&net, targets](std::size_t i, std::span<const TensorD> xs) {
        return Logits(net, xs, targets[targets.size() == 1 ? 0 : i]);
      },
      samples, baseline, std::move(feature_names));
}

std::string InteractionCsv(const InteractionMatrix& m) {
  auto quote = [](const std::string& s) {
    return s.find(',') != std::string::npos ? "\"" + s + "\"" : s;
  };
  std::ostringstream os;
  os.precision(10);
  os << "feature";
  for (const auto& n : m.feature_names) os << ',' << quote(n);
  os << '\n';
  for (std::size_t i = 0; i < m.normalized.size(); ++i) {
    os << quote(m.feature_names[i]);
    for (double v : m.normalized[i]) os << ',' << v;
    os << '\n';
  }
  return os.str();
}

FeatureSelection SelectTopK(const ImportanceReport& report, std::size_t k) {
  const std::size_t c = report.gfi.size();
  if (k == 0 || k > c) {
    throw InvalidArgument("top-k needs 1 <= k <= " + std::to_string(c) + ", got " +
                          std::to_string(k));
  }
  FeatureSelection s;
  s.method = report.method;
  s.baseline = report.baseline;
  for (std::size_t i = 0; i < k; ++i) {
    s.channels.push_back(report.ranking[i]);
    s.names.push_back(report.feature_names[report.ranking[i]]);
  }
  s.boundary_tie = k < c && report.gfi[report.ranking[k - 1]] == report.gfi[report.ranking[k]];
  return s;
}

std::string FeatureSelectionJson(const FeatureSelection& s) {
  json j = {{"schema_version", 1},
            {"kind", "xfdd-features"},
            {"k", s.channels.size()},
            {"channels", s.channels},
            {"names", s.names},
            {"method", s.method},
            {"baseline", s.baseline},
            {"boundary_tie", s.boundary_tie}};
  return j.dump(2) + "\n";
}

FeatureSelection ParseFeatureSelection(const std::string& text) {
  try {
    json j = json::parse(text);
    FeatureSelection s;
    s.channels = j.at("channels").get<std::vector<std::size_t>>();
    s.names = j.value("names", std::vector<std::string>{});
    s.boundary_tie = j.value("boundary_tie", false);
    s.method = j.value("method", std::string());
    s.baseline = j.value("baseline", std::string());
    if (s.channels.empty()) throw InvalidArgument("feature selection lists no channels");
    return s;
  } catch (const json::exception& e) {
    throw FormatError("feature selection: " + std::string(e.what()));
  }
}

TimingRow TimeMethods(const std::string& model_name, const Network& net,
                      std::span<const TensorD> samples,
                      std::span<const std::size_t> targets,
                      std::span<const TensorD> baselines,
                      const TimingOptions& options) {
  if (samples.size() != targets.size()) throw ShapeError("one target per sample expected");
  if (baselines.empty()) throw InvalidArgument("timing needs baselines");
  std::vector<TensorD> shap;
  for (std::size_t i = 0; i < std::max<std::size_t>(1, options.dlshap_baselines); ++i) {
    shap.push_back(baselines[i % baselines.size()]);
  }
  const TensorD& ref = baselines[0];
  TimingRow row;
  row.model = model_name;
  for (std::size_t rep = 0; rep < std::max<std::size_t>(1, options.repeats); ++rep) {
    for (std::size_t m = 0; m < AllMethods().size(); ++m) {
      const auto start = std::chrono::steady_clock::now();
      for (std::size_t i = 0; i < samples.size(); ++i) {
        switch (AllMethods()[m]) {
          case Method::kIg:
            IntegratedGradients(net, samples[i], ref, targets[i], options.methods.ig_steps);
            break;
          case Method::kDeepLift:
            DeepLift(net, samples[i], ref, targets[i]);
            break;
          case Method::kGradShap:
            GradientShap(net, samples[i], baselines, targets[i],
                         options.methods.gradshap_samples, options.methods.gradshap_sigma, i);
            break;
          case Method::kDeepLiftShap:
            DeepLiftShap(net, samples[i], shap, targets[i]);
            break;
        }
      }
      const double s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      row.seconds[m] = rep == 0 ? s : std::min(row.seconds[m], s);
    }
  }
  return row;
}

std::string TimingCsv(std::span<const TimingRow> rows) {
  std::ostringstream os;
  os.precision(6);
  os << "Model";
  for (auto m : AllMethods()) os << ',' << MethodTitle(m);
  os << '\n';
  for (const auto& r : rows) {
    os << r.model;
    for (double s : r.seconds) os << ',' << std::fixed << s;
    os.unsetf(std::ios::fixed);
    os << '\n';
  }
  return os.str();
}

std::vector<TensorD> AttributeDataset(const std::function<Network()>& make_net,
                                      Method method, const prep::WindowDataset& ds,
                                      std::span<const TensorD> baselines,
                                      const MethodOptions& options, std::uint64_t seed,
                                      std::size_t threads) {
  std::vector<TensorD> out(ds.size());
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, ds.size()));
  auto work = [&](std::size_t worker) {
    Network net = make_net();
    for (std::size_t i = worker; i < ds.size(); i += threads) {
      auto s = ds.sample(i);
      TensorD x({ds.channels, ds.window}, std::vector<double>(s.begin(), s.end()));
      out[i] = Attribute(net, method, x, baselines, ds.labels[i], options, seed + i).values;
    }
  };
  if (threads == 1) {
    work(0);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        work(w);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace xfdd::xai

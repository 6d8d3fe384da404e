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

// Attribution methods over differentiable classifiers and their aggregation
// into per-feature importance scores.
//
// Every method explains the pre-softmax logit of a target class for a single
// window x of shape [C x L] against one or more reference windows.

#ifndef XFDD_XAI_H_
#define XFDD_XAI_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "xfdd/autodiff.h"
#include "xfdd/model.h"
#include "xfdd/preprocess.h"
#include "xfdd/tensor.h"

namespace xfdd::xai {

// Maps a batch [B x C x L] to logits [B x K] on the input's tape.
using Network = std::function<ad::Var<double>(const ad::Var<double>&)>;

// Eval-mode forward of `model`, which must outlive the returned callable.
Network FromModel(nn::Model<double>& model);

enum class Method { kIg, kDeepLift, kGradShap, kDeepLiftShap };
enum class BaselineKind { kZero, kMean, kMedian, kRandom };

std::string MethodName(Method m);          // "ig", "deeplift", "gradshap", "dlshap"
std::string MethodTitle(Method m);         // "IGs", "DeepLIFT", ...
Method ParseMethod(const std::string& name);
std::string BaselineName(BaselineKind b);  // "zero", "mean", "median", "random"
BaselineKind ParseBaseline(const std::string& name);
const std::vector<Method>& AllMethods();
const std::vector<BaselineKind>& AllBaselines();

struct BaselineSpec {
  BaselineKind kind = BaselineKind::kZero;
  std::size_t count = 10;  // windows drawn by kRandom
};

// zero: one all-zero window. mean / median: one window of per-channel,
// per-timestep statistics over `reference`. random: `count` windows drawn
// uniformly from `reference` (without replacement while possible).
std::vector<Tensor<double>> MakeBaselines(const BaselineSpec& spec,
                                          const prep::WindowDataset& reference,
                                          std::uint64_t seed);

struct Attribution {
  Tensor<double> values;  // [C x L]
  Method method = Method::kIg;
  std::size_t target = 0;
  double output = 0.0;           // f_c(x)
  double baseline_output = 0.0;  // f_c(x') (mean over baselines)

  double Total() const;
};

// Target-class logit of a single window.
double Logit(const Network& net, const Tensor<double>& x, std::size_t target);
// Target-class logits of many windows, evaluated in chunks.
std::vector<double> Logits(const Network& net, std::span<const Tensor<double>> xs,
                           std::size_t target);

// Midpoint Riemann approximation with `steps` gradient evaluations.
Attribution IntegratedGradients(const Network& net, const Tensor<double>& x,
                                const Tensor<double>& baseline, std::size_t target,
                                std::size_t steps = 50);

// Rescale-rule contributions from one paired forward pass over [x; x'].
Attribution DeepLift(const Network& net, const Tensor<double>& x,
                     const Tensor<double>& baseline, std::size_t target);

// Expected gradients: mean over n draws of (x - b) * grad f(b + a (x - b) + e)
// with b cycling through `baselines`, a ~ U(0, 1), e ~ N(0, sigma^2).
Attribution GradientShap(const Network& net, const Tensor<double>& x,
                         std::span<const Tensor<double>> baselines,
                         std::size_t target, std::size_t samples = 20,
                         double sigma = 0.0, std::uint64_t seed = 0);

// Mean of DeepLift over the baselines.
Attribution DeepLiftShap(const Network& net, const Tensor<double>& x,
                         std::span<const Tensor<double>> baselines,
                         std::size_t target);

struct MethodOptions {
  std::size_t ig_steps = 50;
  std::size_t gradshap_samples = 20;
  double gradshap_sigma = 0.0;
};

// Dispatches on `method`. Single-reference methods use the mean of
// `baselines` as x'.
Attribution Attribute(const Network& net, Method method, const Tensor<double>& x,
                      std::span<const Tensor<double>> baselines, std::size_t target,
                      const MethodOptions& options = {}, std::uint64_t seed = 0);

// Scalar function of one window, used by the masking-based tools.
using ScalarFn = std::function<double(const Tensor<double>&)>;
ScalarFn LogitFn(const Network& net, std::size_t target);

// x with the channels in `channels` replaced by the baseline's rows.
Tensor<double> MaskChannels(const Tensor<double>& x, const Tensor<double>& baseline,
                            std::span<const std::size_t> channels);

inline constexpr std::size_t kMaxShapleyGroups = 12;

// Exact Shapley values of channel groups by subset enumeration, where a
// group absent from the coalition takes the baseline's values.
std::vector<double> ShapleyExact(const ScalarFn& f, const Tensor<double>& x,
                                 const Tensor<double>& baseline,
                                 const std::vector<std::vector<std::size_t>>& groups);

struct ImportanceReport {
  std::string method, baseline;
  std::vector<std::string> feature_names;
  std::vector<double> gfi;           // [C]
  std::vector<std::size_t> ranking;  // channel indices, most important first
  std::vector<std::vector<double>> pcfi;                 // [classes x C]
  std::vector<bool> class_present;                       // [classes]
  std::vector<std::vector<std::size_t>> class_ranking;   // empty when absent
};

// Descending order, ties broken by the lower index.
std::vector<std::size_t> RankDescending(std::span<const double> scores);

// Mean |attribution| over samples and timesteps, per channel.
std::vector<double> Gfi(std::span<const Tensor<double>> attributions);

// Per-class GFI. Rows of classes without samples are flagged absent.
void Pcfi(std::span<const Tensor<double>> attributions,
          std::span<const std::uint8_t> labels, std::size_t classes,
          ImportanceReport& report);

ImportanceReport BuildImportance(std::span<const Tensor<double>> attributions,
                                 std::span<const std::uint8_t> labels,
                                 std::vector<std::string> feature_names,
                                 std::size_t classes = 7);

// Channels in the top-k of every present class, and those unique to one.
struct FeatureOverlap {
  std::vector<std::size_t> shared;
  std::vector<std::vector<std::size_t>> unique;  // per class
};
FeatureOverlap PcfiOverlap(const ImportanceReport& report, std::size_t k);

// rank,feature,score
std::string GfiCsv(const ImportanceReport& report, std::size_t top = 0);
// class,present,<feature...>
std::string PcfiCsv(const ImportanceReport& report,
                    std::span<const std::string> class_names);

struct InteractionMatrix {
  std::vector<std::string> feature_names;
  std::vector<double> single;                   // A({i})
  std::vector<std::vector<double>> raw;         // I(i, j), diagonal A({i})
  std::vector<std::vector<double>> normalized;  // in [-1, 1], diagonal 1
  std::vector<std::pair<std::size_t, std::size_t>> flagged;  // i < j
};

inline constexpr double kInteractionTolerance = 1e-9;

// A(S) = mean_x [f(x) - f(x with S masked)], I(i, j) = A({i, j}) - A({i}) -
// A({j}). A pair is flagged when A({i, j}) > A({i}) + A({j}) + tolerance.
InteractionMatrix FeatureInteractions(const ScalarFn& f,
                                      std::span<const Tensor<double>> samples,
                                      const Tensor<double>& baseline,
                                      std::vector<std::string> feature_names);

// Same through `net` in batches. `targets` holds one class per sample, or a
// single class shared by all.
InteractionMatrix FeatureInteractions(const Network& net,
                                      std::span<const std::size_t> targets,
                                      std::span<const Tensor<double>> samples,
                                      const Tensor<double>& baseline,
                                      std::vector<std::string> feature_names);

std::string InteractionCsv(const InteractionMatrix& m);

struct FeatureSelection {
  std::vector<std::size_t> channels;  // GFI rank order
  std::vector<std::string> names;
  std::string method, baseline;  // provenance of the ranking
  bool boundary_tie = false;  // k-th and (k+1)-th scores are equal
};

// Top-k channels by GFI, 1 <= k <= C.
FeatureSelection SelectTopK(const ImportanceReport& report, std::size_t k);
std::string FeatureSelectionJson(const FeatureSelection& s);
FeatureSelection ParseFeatureSelection(const std::string& json_text);

// Wall time of each method over the same samples.
struct TimingRow {
  std::string model;
  double seconds[4] = {0, 0, 0, 0};  // indexed like AllMethods()
};

struct TimingOptions {
  MethodOptions methods;
  std::size_t dlshap_baselines = 10;
  // Each method is timed this many times (interleaved); the minimum is kept.
  std::size_t repeats = 1;
};

TimingRow TimeMethods(const std::string& model_name, const Network& net,
                      std::span<const Tensor<double>> samples,
                      std::span<const std::size_t> targets,
                      std::span<const Tensor<double>> baselines,
                      const TimingOptions& options = {});

// Model,IGs,DeepLIFT,Gradient SHAP,DeepLIFT SHAP
std::string TimingCsv(std::span<const TimingRow> rows);

// Attributions for every sample of `ds` (in order), each against its label
// or the given target. Samples are split across `threads` workers; sample i
// uses seed + i so the result does not depend on the thread count.
std::vector<Tensor<double>> AttributeDataset(
    const std::function<Network()>& make_net, Method method,
    const prep::WindowDataset& ds, std::span<const Tensor<double>> baselines,
    const MethodOptions& options, std::uint64_t seed, std::size_t threads = 1);

}  // namespace xfdd::xai

#endif  // XFDD_XAI_H_

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

// Optimisation loop, metrics and the hyperparameter grid search.

#ifndef XFDD_TRAIN_H_
#define XFDD_TRAIN_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xfdd/autodiff.h"
#include "xfdd/model.h"
#include "xfdd/preprocess.h"

namespace xfdd::train {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 1024;
  std::size_t max_epochs = 256;
  double l1 = 1e-4;
  double l2 = 1e-4;
  std::size_t patience = 8;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  double min_lr = 0.0;
  prep::Resampling resampling = prep::Resampling::kNone;
  std::uint64_t seed = 0;
  // Stop once this much wall time has elapsed (0 = unlimited).
  double time_limit_s = 0.0;

  // Throws InvalidArgument naming the first bad field.
  void Validate() const;
};

// Mean weighted cross-entropy of the batch plus l1 * sum|p| + l2 * sum p^2
// over `params`. `class_weights` is indexed by label (empty = unit weights).
template <typename T>
ad::Var<T> Loss(const ad::Var<T>& logits, std::span<const std::size_t> labels,
                std::span<const double> class_weights,
                std::span<const ad::Var<T>> params, double l1, double l2);

struct AdamState {
  std::vector<std::vector<double>> m, v;
  std::size_t t = 0;
};

// One bias-corrected Adam step over matched parameter/gradient lists.
// Throws NumericalError if a gradient is not finite.
void AdamStep(std::span<Tensor<float>* const> params,
              std::span<const Tensor<float>* const> grads, AdamState& state,
              double lr, double beta1 = 0.9, double beta2 = 0.999,
              double eps = 1e-8);

// eta_min + (eta_max - eta_min) (1 + cos(pi t / T)) / 2, 0 <= t <= T.
double CosineLr(double t, double period, double eta_max, double eta_min = 0.0);

class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}
  // Returns true when `loss` improves on the best seen so far.
  bool Update(std::size_t epoch, double loss);
  bool ShouldStop() const { return stale_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_; }

 private:
  std::size_t patience_;
  std::size_t stale_ = 0;
  std::size_t best_epoch_ = 0;
  double best_ = 0.0;
  bool seen_ = false;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double lr = 0.0;
  double train_loss = 0.0, train_acc = 0.0;
  double val_loss = 0.0, val_acc = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
  bool hit_time_limit = false;
  double train_seconds = 0.0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Mini-batch training with per-epoch cosine annealing and early stopping on
// validation loss. On return `model` holds the best-validation parameters.
TrainResult Train(nn::Model<float>& model, const prep::WindowDataset& train,
                  const prep::WindowDataset& val, const TrainConfig& config,
                  std::span<const double> class_weights = {},
                  const EpochCallback& on_epoch = {});

// Mean unweighted cross-entropy and accuracy in eval mode.
struct LossAcc {
  double loss = 0.0, accuracy = 0.0;
};
LossAcc EvaluateLoss(nn::Model<float>& model, const prep::WindowDataset& ds,
                     std::size_t batch_size = 1024);

struct ClassMetrics {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  std::size_t support = 0;
  double roc_auc = 0.0, pr_auc = 0.0;
};

struct CurvePoint {
  double x = 0.0, y = 0.0;
};

struct MetricsReport {
  std::vector<std::string> class_names;
  std::vector<std::vector<std::size_t>> confusion;  // rows true, cols predicted
  double accuracy = 0.0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;  // macro
  std::vector<ClassMetrics> per_class;
  // One-vs-rest curves per class: ROC (fpr, tpr) and PR (recall, precision).
  std::vector<std::vector<CurvePoint>> roc, pr;
  double train_time_s = 0.0, test_time_s = 0.0;
  std::vector<EpochRecord> history;

  std::size_t total() const;
  std::vector<std::vector<double>> RowNormalized() const;
};

// Accuracy and macro precision/recall/F1 from a confusion matrix. Classes
// without predicted positives get precision 0, without support recall 0.
MetricsReport MetricsFromConfusion(std::vector<std::vector<std::size_t>> confusion);

// Trapezoidal one-vs-rest curves from scores and binary targets.
std::vector<CurvePoint> RocCurve(std::span<const double> scores,
                                 std::span<const std::uint8_t> positive);
std::vector<CurvePoint> PrCurve(std::span<const double> scores,
                                std::span<const std::uint8_t> positive);
double TrapezoidArea(std::span<const CurvePoint> curve);

// Argmax predictions, confusion matrix, macro metrics and ROC/PR curves.
MetricsReport Evaluate(nn::Model<float>& model, const prep::WindowDataset& test,
                       std::size_t batch_size = 1024);

// Deterministic JSON (no timings) and the confusion matrix as CSV.
std::string ReportJson(const MetricsReport& report);
std::string ConfusionCsv(const MetricsReport& report);
// One JSON object per line per epoch.
std::string HistoryJsonl(std::span<const EpochRecord> history);

// Hyperparameter grid. Axis values are iterated in the listed order.
struct GridSpace {
  std::vector<std::size_t> conv_layers = {1, 2, 3, 4, 5, 6, 7};
  std::vector<std::size_t> gru_layers = {1, 2, 3, 4};
  std::vector<std::size_t> hidden = {32, 64, 256, 512};
  std::vector<std::size_t> fc_layers = {1, 2, 3, 4, 5, 6, 7};
  std::vector<prep::Resampling> resampling = {
      prep::Resampling::kNone, prep::Resampling::kUndersample,
      prep::Resampling::kSmote};
  std::vector<std::size_t> window = {10, 50, 100, 500, 1000};
  std::vector<std::size_t> step = {10, 50, 100, 500, 1000};

  std::size_t size() const;
};

struct GridConfig {
  std::size_t conv_layers = 1, gru_layers = 1, hidden = 32, fc_layers = 1;
  prep::Resampling resampling = prep::Resampling::kNone;
  std::size_t window = 50, step = 50;

  auto operator<=>(const GridConfig&) const = default;
  std::string ToString() const;
};

// The i-th configuration in lexicographic axis order.
GridConfig GridAt(const GridSpace& space, std::size_t index);

struct GridResult {
  GridConfig config;
  double val_accuracy = 0.0;
  std::size_t params = 0;
  std::optional<MetricsReport> metrics;
  std::string error;  // non-empty when the configuration could not run
};

using GridEvaluator = std::function<GridResult(const GridConfig&)>;

// Evaluates min(budget, |space|) configurations: all of them when the budget
// covers the space, otherwise a seeded uniform subset without replacement.
// Ranked by validation accuracy, then fewer parameters, then config order.
std::vector<GridResult> GridSearch(const GridSpace& space, std::size_t budget,
                                   std::uint64_t seed,
                                   const GridEvaluator& evaluate);

// Sorts in place with the ranking rule above.
void RankResults(std::vector<GridResult>& results);

struct GridTrainOptions {
  TrainConfig train;
  nn::ArchOptions arch;  // input_channels / classes / divisor / fc / dropout
  prep::PrepConfig prep;
};

// Evaluator that prepares `data`, builds a hybrid model and trains it.
GridEvaluator MakeTrainingEvaluator(const data::Dataset& data,
                                    const GridTrainOptions& options);

}  // namespace xfdd::train

#endif  // XFDD_TRAIN_H_

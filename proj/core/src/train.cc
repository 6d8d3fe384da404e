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

#include "xfdd/train.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "xfdd/error.h"
#include "xfdd/ops.h"

namespace xfdd::train {
namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

std::vector<std::size_t> Labels(const prep::WindowDataset& ds,
                                std::span<const std::size_t> idx) {
  std::vector<std::size_t> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = ds.labels[idx[i]];
  return out;
}

std::size_t ArgMax(const float* row, std::size_t k) {
  return static_cast<std::size_t>(std::max_element(row, row + k) - row);
}

// Trainable tensors of `model` in binding order.
std::vector<Tensor<float>*> TrainableTensors(nn::Model<float>& model) {
  std::vector<Tensor<float>*> out;
  for (std::size_t i = 0; i < model.tensors().size(); ++i) {
    if (model.tensor_info()[i].trainable) out.push_back(&model.tensors()[i]);
  }
  return out;
}

// Groups tied scores; calls visit(tp, fp) after each distinct threshold.
template <typename F>
void SweepThresholds(std::span<const double> scores,
                     std::span<const std::uint8_t> positive, F visit) {
  if (scores.size() != positive.size()) {
    throw ShapeError("score and target counts differ");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (positive[order[i]] ? tp : fp) += 1;
    if (i + 1 == order.size() || scores[order[i + 1]] != scores[order[i]]) {
      visit(tp, fp);
    }
  }
}

json CurveJson(const std::vector<CurvePoint>& c) {
  json out = json::array();
  for (const auto& p : c) out.push_back({p.x, p.y});
  return out;
}

}  // namespace

void TrainConfig::Validate() const {
  auto fail = [](const std::string& what) {
    throw InvalidArgument("train config: " + what);
  };
  if (!(learning_rate > 0)) fail("learning_rate must be positive");
  if (batch_size == 0) fail("batch_size must be positive");
  if (max_epochs == 0) fail("max_epochs must be positive");
  if (l1 < 0 || l2 < 0) fail("regularisation weights must be non-negative");
  if (patience == 0) fail("patience must be positive");
  if (patience > max_epochs) fail("patience exceeds max_epochs");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) {
    fail("Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0)) fail("adam_eps must be positive");
  if (min_lr < 0 || min_lr > learning_rate) fail("min_lr must lie in [0, learning_rate]");
  if (time_limit_s < 0) fail("time_limit_s must be non-negative");
}

template <typename T>
ad::Var<T> Loss(const ad::Var<T>& logits, std::span<const std::size_t> labels,
                std::span<const double> class_weights,
                std::span<const ad::Var<T>> params, double l1, double l2) {
  std::vector<T> weights;
  if (!class_weights.empty()) {
    weights.reserve(labels.size());
    for (auto l : labels) {
      if (l >= class_weights.size()) {
        throw InvalidArgument("label " + std::to_string(l) + " has no class weight");
      }
      weights.push_back(static_cast<T>(class_weights[l]));
    }
  }
  ad::Var<T> loss = ad::SoftmaxCrossEntropy<T>(logits, labels, weights);
  for (const auto& p : params) {
    if (l1 > 0) loss = ad::Add(loss, ad::Scale(ad::AbsSum(p), static_cast<T>(l1)));
    if (l2 > 0) loss = ad::Add(loss, ad::Scale(ad::SquareSum(p), static_cast<T>(l2)));
  }
  return loss;
}

template ad::Var<float> Loss<float>(const ad::Var<float>&, std::span<const std::size_t>,
                                    std::span<const double>,
                                    std::span<const ad::Var<float>>, double, double);
template ad::Var<double> Loss<double>(const ad::Var<double>&,
                                      std::span<const std::size_t>,
                                      std::span<const double>,
                                      std::span<const ad::Var<double>>, double, double);

void AdamStep(std::span<Tensor<float>* const> params,
              std::span<const Tensor<float>* const> grads, AdamState& state,
              double lr, double beta1, double beta2, double eps) {
  if (params.size() != grads.size()) {
    throw ShapeError("Adam: " + std::to_string(params.size()) + " parameters, " +
                     std::to_string(grads.size()) + " gradients");
  }
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.emplace_back(p->size(), 0.0);
      state.v.emplace_back(p->size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("Adam state does not match");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i]->size() != params[i]->size() || state.m[i].size() != params[i]->size()) {
      throw ShapeError("Adam: gradient " + std::to_string(i) + " has the wrong size");
    }
    for (std::size_t j = 0; j < grads[i]->size(); ++j) {
      if (!std::isfinite((*grads[i])[j])) {
        throw NumericalError("non-finite gradient in parameter " + std::to_string(i) +
                             " at element " + std::to_string(j));
      }
    }
  }
  ++state.t;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.m[i];
    auto& v = state.v[i];
    float* p = params[i]->raw();
    const float* g = grads[i]->raw();
    for (std::size_t j = 0; j < m.size(); ++j) {
      m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
      v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
      const double mh = m[j] / c1, vh = v[j] / c2;
      p[j] = static_cast<float>(p[j] - lr * mh / (std::sqrt(vh) + eps));
    }
  }
}

double CosineLr(double t, double period, double eta_max, double eta_min) {
  if (!(period > 0)) throw InvalidArgument("cosine period must be positive");
  if (t < 0 || t > period) {
    throw InvalidArgument("cosine step " + std::to_string(t) + " outside [0, " +
                          std::to_string(period) + "]");
  }
  constexpr double kPi = 3.14159265358979323846;
  return eta_min + 0.5 * (eta_max - eta_min) * (1.0 + std::cos(kPi * t / period));
}

bool EarlyStopping::Update(std::size_t epoch, double loss) {
  if (!seen_ || loss < best_) {
    seen_ = true;
    best_ = loss;
    best_epoch_ = epoch;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

LossAcc EvaluateLoss(nn::Model<float>& model, const prep::WindowDataset& ds,
                     std::size_t batch_size) {
  if (ds.size() == 0) throw InvalidArgument("evaluation on an empty dataset");
  const std::size_t k = model.spec().classes;
  double loss = 0.0;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < ds.size(); start += batch_size) {
    idx.resize(std::min(batch_size, ds.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    Tensor<float> logits = model.Predict(ds.Batch<float>(idx));
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const float* row = logits.raw() + b * k;
      const std::size_t label = ds.labels[idx[b]];
      const float zmax = *std::max_element(row, row + k);
      double s = 0.0;
      for (std::size_t j = 0; j < k; ++j) s += std::exp(double(row[j]) - zmax);
      loss += zmax + std::log(s) - row[label];
      correct += ArgMax(row, k) == label;
    }
  }
  const auto n = static_cast<double>(ds.size());
  return {loss / n, static_cast<double>(correct) / n};
}

TrainResult Train(nn::Model<float>& model, const prep::WindowDataset& train,
                  const prep::WindowDataset& val, const TrainConfig& config,
                  std::span<const double> class_weights,
                  const EpochCallback& on_epoch) {
  config.Validate();
  if (train.size() == 0) throw InvalidArgument("empty training set");
  if (val.size() == 0) throw InvalidArgument("empty validation set");
  if (config.batch_size > train.size()) {
    throw InvalidArgument("batch size " + std::to_string(config.batch_size) +
                          " exceeds the " + std::to_string(train.size()) +
                          " training samples");
  }
  if (train.channels != model.spec().input_channels ||
      train.window != model.spec().window) {
    throw ShapeError("dataset windows are " + std::to_string(train.channels) + "x" +
                     std::to_string(train.window) + ", model expects " +
                     std::to_string(model.spec().input_channels) + "x" +
                     std::to_string(model.spec().window));
  }
  const auto start = Clock::now();
  const std::size_t k = model.spec().classes;
  std::mt19937_64 rng(config.seed);
  std::vector<Tensor<float>*> targets = TrainableTensors(model);
  AdamState adam;
  EarlyStopping stopper(config.patience);
  std::vector<Tensor<float>> best = model.tensors();
  TrainResult result;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto epoch_start = Clock::now();
    const double lr = CosineLr(static_cast<double>(epoch - 1),
                               static_cast<double>(config.max_epochs),
                               config.learning_rate, config.min_lr);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0, batch_index = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += config.batch_size, ++batch_index) {
      std::span<const std::size_t> idx(order.data() + b0,
                                       std::min(config.batch_size, order.size() - b0));
      const auto labels = Labels(train, idx);
      ad::Tape<float> tape;
      auto input = tape.Constant(train.Batch<float>(idx));
      std::vector<ad::Var<float>> params;
      auto logits = model.Forward(input, nn::Mode::kTrain, &rng, &params);
      if (params.size() != targets.size()) {
        throw Error("model bound " + std::to_string(params.size()) +
                    " trainable tensors, expected " + std::to_string(targets.size()));
      }
      auto loss = Loss<float>(logits, labels, class_weights, params, config.l1,
                              config.l2);
      const double lv = loss.value().item();
      if (!std::isfinite(lv)) {
        throw NumericalError("loss diverged at epoch " + std::to_string(epoch) +
                             ", batch " + std::to_string(batch_index));
      }
      auto grads = tape.Backward(loss);
      std::vector<const Tensor<float>*> g;
      g.reserve(params.size());
      for (const auto& p : params) g.push_back(&grads.of(p));
      try {
        AdamStep(targets, g, adam, lr, config.beta1, config.beta2, config.adam_eps);
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " at epoch " +
                             std::to_string(epoch) + ", batch " +
                             std::to_string(batch_index));
      }
      loss_sum += lv * static_cast<double>(idx.size());
      const auto& z = logits.value();
      for (std::size_t b = 0; b < idx.size(); ++b) {
        correct += ArgMax(z.raw() + b * k, k) == labels[b];
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / static_cast<double>(train.size());
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(train.size());
    const LossAcc v = EvaluateLoss(model, val, std::max<std::size_t>(config.batch_size, 256));
    rec.val_loss = v.loss;
    rec.val_acc = v.accuracy;
    rec.seconds = Seconds(epoch_start);
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (stopper.Update(epoch, v.loss)) best = model.tensors();
    if (stopper.ShouldStop()) {
      result.stopped_early = true;
      break;
    }
    if (config.time_limit_s > 0 && Seconds(start) >= config.time_limit_s) {
      result.hit_time_limit = true;
      break;
    }
  }
  model.tensors() = std::move(best);
  result.best_epoch = stopper.best_epoch();
  result.train_seconds = Seconds(start);
  return result;
}

std::size_t MetricsReport::total() const {
  std::size_t n = 0;
  for (const auto& row : confusion) n = std::accumulate(row.begin(), row.end(), n);
  return n;
}

std::vector<std::vector<double>> MetricsReport::RowNormalized() const {
  std::vector<std::vector<double>> out;
  for (const auto& row : confusion) {
    const double s = static_cast<double>(std::accumulate(row.begin(), row.end(), std::size_t{0}));
    std::vector<double> r(row.size(), 0.0);
    if (s > 0) {
      for (std::size_t j = 0; j < row.size(); ++j) r[j] = static_cast<double>(row[j]) / s;
    }
    out.push_back(std::move(r));
  }
  return out;
}

MetricsReport MetricsFromConfusion(std::vector<std::vector<std::size_t>> confusion) {
  const std::size_t k = confusion.size();
  if (k == 0) throw InvalidArgument("empty confusion matrix");
  for (const auto& row : confusion) {
    if (row.size() != k) throw ShapeError("confusion matrix is not square");
  }
  MetricsReport r;
  r.confusion = std::move(confusion);
  const std::size_t n = r.total();
  if (n == 0) throw InvalidArgument("confusion matrix holds no samples");
  std::size_t trace = 0;
  r.per_class.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    trace += r.confusion[c][c];
    std::size_t predicted = 0, actual = 0;
    for (std::size_t j = 0; j < k; ++j) {
      predicted += r.confusion[j][c];
      actual += r.confusion[c][j];
    }
    auto& m = r.per_class[c];
    const double tp = static_cast<double>(r.confusion[c][c]);
    m.support = actual;
    m.precision = predicted ? tp / static_cast<double>(predicted) : 0.0;
    m.recall = actual ? tp / static_cast<double>(actual) : 0.0;
    m.f1 = m.precision + m.recall > 0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    r.precision += m.precision;
    r.recall += m.recall;
    r.f1 += m.f1;
  }
  r.accuracy = static_cast<double>(trace) / static_cast<double>(n);
  r.precision /= static_cast<double>(k);
  r.recall /= static_cast<double>(k);
  r.f1 /= static_cast<double>(k);
  return r;
}

std::vector<CurvePoint> RocCurve(std::span<const double> scores,
                                 std::span<const std::uint8_t> positive) {
  const auto pos = static_cast<std::size_t>(std::count_if(
      positive.begin(), positive.end(), [](std::uint8_t p) { return p != 0; }));
  const std::size_t neg = positive.size() - pos;
  if (pos == 0 || neg == 0) return {};
  std::vector<CurvePoint> out{{0.0, 0.0}};
  SweepThresholds(scores, positive, [&](std::size_t tp, std::size_t fp) {
    out.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                   static_cast<double>(tp) / static_cast<double>(pos)});
  });
  return out;
}

std::vector<CurvePoint> PrCurve(std::span<const double> scores,
                                std::span<const std::uint8_t> positive) {
  const auto pos = static_cast<std::size_t>(std::count_if(
      positive.begin(), positive.end(), [](std::uint8_t p) { return p != 0; }));
  if (pos == 0) return {};
  std::vector<CurvePoint> out{{0.0, 1.0}};
  SweepThresholds(scores, positive, [&](std::size_t tp, std::size_t fp) {
    out.push_back({static_cast<double>(tp) / static_cast<double>(pos),
                   static_cast<double>(tp) / static_cast<double>(tp + fp)});
  });
  return out;
}

double TrapezoidArea(std::span<const CurvePoint> curve) {
  double a = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    a += (curve[i].x - curve[i - 1].x) * (curve[i].y + curve[i - 1].y) / 2.0;
  }
  return a;
}

MetricsReport Evaluate(nn::Model<float>& model, const prep::WindowDataset& test,
                       std::size_t batch_size) {
  if (test.size() == 0) throw InvalidArgument("evaluation on an empty test set");
  if (batch_size == 0) throw InvalidArgument("batch size must be positive");
  const auto start = Clock::now();
  const std::size_t k = model.spec().classes;
  std::vector<std::vector<std::size_t>> cm(k, std::vector<std::size_t>(k, 0));
  std::vector<double> probs(test.size() * k);
  std::vector<std::size_t> idx;
  for (std::size_t s = 0; s < test.size(); s += batch_size) {
    idx.resize(std::min(batch_size, test.size() - s));
    std::iota(idx.begin(), idx.end(), s);
    Tensor<float> logits = model.Predict(test.Batch<float>(idx));
    Tensor<float> p = ad::Softmax(logits);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const std::size_t label = test.labels[idx[b]];
      if (label >= k) throw InvalidArgument("test label outside the model's classes");
      ++cm[label][ArgMax(logits.raw() + b * k, k)];
      for (std::size_t j = 0; j < k; ++j) probs[(s + b) * k + j] = p.at(b, j);
    }
  }
  const double test_time = Seconds(start);
  MetricsReport r = MetricsFromConfusion(std::move(cm));
  r.test_time_s = test_time;
  if (k == data::kNumClasses) r.class_names = data::ClassNames(test.task);
  std::vector<double> scores(test.size());
  std::vector<std::uint8_t> positive(test.size());
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < test.size(); ++i) {
      scores[i] = probs[i * k + c];
      positive[i] = test.labels[i] == c;
    }
    r.roc.push_back(RocCurve(scores, positive));
    r.pr.push_back(PrCurve(scores, positive));
    r.per_class[c].roc_auc = TrapezoidArea(r.roc.back());
    r.per_class[c].pr_auc = TrapezoidArea(r.pr.back());
  }
  return r;
}

std::string ReportJson(const MetricsReport& r) {
  json per = json::array();
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& m = r.per_class[c];
    per.push_back({{"class", c < r.class_names.size() ? r.class_names[c] : std::to_string(c)},
                   {"precision", m.precision},
                   {"recall", m.recall},
                   {"f1", m.f1},
                   {"support", m.support},
                   {"roc_auc", m.roc_auc},
                   {"pr_auc", m.pr_auc}});
  }
  json curves = json::array();
  for (std::size_t c = 0; c < r.roc.size(); ++c) {
    curves.push_back({{"roc", CurveJson(r.roc[c])},
                      {"pr", c < r.pr.size() ? CurveJson(r.pr[c]) : json::array()}});
  }
  json hist = json::array();
  for (const auto& e : r.history) {
    hist.push_back({{"epoch", e.epoch}, {"lr", e.lr}, {"train_loss", e.train_loss},
                    {"train_acc", e.train_acc}, {"val_loss", e.val_loss},
                    {"val_acc", e.val_acc}});
  }
  json out = {{"classes", r.class_names},
              {"samples", r.total()},
              {"accuracy", r.accuracy},
              {"precision", r.precision},
              {"recall", r.recall},
              {"f1", r.f1},
              {"confusion", r.confusion},
              {"confusion_row_normalized", r.RowNormalized()},
              {"per_class", per},
              {"curves", curves},
              {"history", hist}};
  return out.dump(2) + "\n";
}

std::string ConfusionCsv(const MetricsReport& r) {
  std::ostringstream os;
  auto name = [&](std::size_t c) {
    return c < r.class_names.size() ? r.class_names[c] : std::to_string(c);
  };
  os << "true\\predicted";
  for (std::size_t c = 0; c < r.confusion.size(); ++c) os << ',' << name(c);
  os << '\n';
  for (std::size_t i = 0; i < r.confusion.size(); ++i) {
    os << name(i);
    for (auto v : r.confusion[i]) os << ',' << v;
    os << '\n';
  }
  return os.str();
}

std::string HistoryJsonl(std::span<const EpochRecord> history) {
  std::string out;
  for (const auto& e : history) {
    json j = {{"epoch", e.epoch}, {"lr", e.lr}, {"train_loss", e.train_loss},
              {"train_acc", e.train_acc}, {"val_loss", e.val_loss},
              {"val_acc", e.val_acc}};
    out += j.dump() + "\n";
  }
  return out;
}

std::size_t GridSpace::size() const {
  return conv_layers.size() * gru_layers.size() * hidden.size() * fc_layers.size() *
         resampling.size() * window.size() * step.size();
}

std::string GridConfig::ToString() const {
  std::ostringstream os;
  os << "conv=" << conv_layers << " gru=" << gru_layers << " hidden=" << hidden
     << " fc=" << fc_layers << " resampling=" << prep::ResamplingName(resampling)
     << " window=" << window << " step=" << step;
  return os.str();
}

GridConfig GridAt(const GridSpace& space, std::size_t index) {
  if (index >= space.size()) throw InvalidArgument("grid index out of range");
  auto take = [&index](std::size_t radix) {
    const std::size_t d = index % radix;
    index /= radix;
    return d;
  };
  GridConfig c;
  c.step = space.step[take(space.step.size())];
  c.window = space.window[take(space.window.size())];
  c.resampling = space.resampling[take(space.resampling.size())];
  c.fc_layers = space.fc_layers[take(space.fc_layers.size())];
  c.hidden = space.hidden[take(space.hidden.size())];
  c.gru_layers = space.gru_layers[take(space.gru_layers.size())];
  c.conv_layers = space.conv_layers[take(space.conv_layers.size())];
  return c;
}

void RankResults(std::vector<GridResult>& results) {
  std::stable_sort(results.begin(), results.end(),
                   [](const GridResult& a, const GridResult& b) {
                     const bool fa = !a.error.empty(), fb = !b.error.empty();
                     return std::make_tuple(fa, -a.val_accuracy, a.params, a.config) <
                            std::make_tuple(fb, -b.val_accuracy, b.params, b.config);
                   });
}

std::vector<GridResult> GridSearch(const GridSpace& space, std::size_t budget,
                                   std::uint64_t seed, const GridEvaluator& evaluate) {
  if (budget == 0) throw InvalidArgument("grid search budget must be positive");
  const std::size_t n = space.size();
  if (n == 0) throw InvalidArgument("grid search space is empty");
  std::vector<std::size_t> picked;
  if (budget >= n) {
    picked.resize(n);
    std::iota(picked.begin(), picked.end(), std::size_t{0});
  } else {
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::sample(all.begin(), all.end(), std::back_inserter(picked), budget, rng);
  }
  std::vector<GridResult> results;
  results.reserve(picked.size());
  for (auto i : picked) {
    const GridConfig cfg = GridAt(space, i);
    try {
      GridResult r = evaluate(cfg);
      r.config = cfg;
      results.push_back(std::move(r));
    } catch (const std::exception& e) {
      GridResult r;
      r.config = cfg;
      r.val_accuracy = 0.0;
      r.error = e.what();
      results.push_back(std::move(r));
    }
  }
  RankResults(results);
  return results;
}

GridEvaluator MakeTrainingEvaluator(const data::Dataset& data,
                                    const GridTrainOptions& options) {
  using Key = std::tuple<std::size_t, std::size_t, prep::Resampling>;
  auto cache = std::make_shared<std::map<Key, prep::Prepared>>();
  return [&data, options, cache](const GridConfig& cfg) {
    const Key key{cfg.window, cfg.step, cfg.resampling};
    auto it = cache->find(key);
    if (it == cache->end()) {
      prep::PrepConfig pc = options.prep;
      pc.window = cfg.window;
      pc.step = cfg.step;
      pc.resampling = cfg.resampling;
      it = cache->emplace(key, prep::Prepare(data, pc)).first;
    }
    const prep::Prepared& p = it->second;
    nn::ArchOptions arch = options.arch;
    arch.window = cfg.window;
    arch.input_channels = p.train.channels;
    nn::Model<float> model(
        nn::HybridSpec(cfg.conv_layers, cfg.gru_layers, cfg.hidden, cfg.fc_layers, arch),
        options.train.seed);
    TrainConfig tc = options.train;
    tc.batch_size = std::min(tc.batch_size, p.train.size());
    tc.patience = std::min(tc.patience, tc.max_epochs);
    TrainResult tr = Train(model, p.train, p.val, tc, p.class_weights);
    GridResult r;
    r.config = cfg;
    r.params = model.Counts().total;
    MetricsReport m = Evaluate(model, p.val);
    m.train_time_s = tr.train_seconds;
    m.history = tr.history;
    r.val_accuracy = m.accuracy;
    r.metrics = std::move(m);
    return r;
  };
}

}  // namespace xfdd::train

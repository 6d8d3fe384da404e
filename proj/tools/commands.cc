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

#include "commands.h"

#include <algorithm>
#include <cstdio>
#include <memory>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "xfdd/checkpoint.h"
#include "xfdd/datagen.h"
#include "xfdd/model.h"
#include "xfdd/preprocess.h"
#include "xfdd/svg.h"
#include "xfdd/xai.h"

namespace xfdd::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::ostream& Log(const Context& ctx) { return *ctx.log; }

void EnsureOutDir(const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) {
    throw IoError("cannot create output directory " + out.string() + ": " +
                  (ec ? ec.message() : "not a directory"));
  }
}

void Require(const fs::path& path, const std::string& hint) {
  if (!fs::exists(path)) {
    throw MissingPrerequisite("missing " + path.string() + " (" + hint + ")");
  }
}

std::string Fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

struct Splits {
  prep::WindowDataset train, val, test;
  std::vector<double> class_weights;
};

prep::WindowDataset LoadSplit(const fs::path& data, const char* name) {
  Require(data / name / "manifest.json", "run `xfdd preprocess` first");
  return prep::LoadWindows(data / name);
}

std::vector<double> LoadClassWeights(const fs::path& data) {
  const fs::path p = data / "prep.json";
  if (!fs::exists(p)) return {};
  try {
    return json::parse(ReadText(p)).value("class_weights", std::vector<double>{});
  } catch (const json::exception& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
}

// Channel subset recorded by `xfdd explain --select-top`.
xai::FeatureSelection LoadFeatures(const fs::path& path) {
  Require(path, "run `xfdd explain --select-top K` first");
  return xai::ParseFeatureSelection(ReadText(path));
}

void ApplyFeatures(prep::WindowDataset& ds, const std::vector<std::size_t>& channels,
                   const std::vector<std::string>& names) {
  if (channels.empty()) return;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (channels[i] >= ds.channels || ds.channel_names[channels[i]] != names[i]) {
      throw InvalidArgument("feature '" + names[i] + "' does not match the dataset channels");
    }
  }
  ds = prep::SelectChannels(ds, channels);
}

nn::ModelSpec SpecFor(const PipelineConfig& c, std::size_t channels, std::size_t window) {
  nn::ArchOptions arch = c.arch;
  arch.input_channels = channels;
  arch.window = window;
  arch.classes = data::kNumClasses;
  if (c.model == "ftcm") return nn::FtcmSpec(arch);
  if (c.model == "flm") return nn::FlmSpec(arch);
  if (c.model == "rnn" || c.model == "lstm" || c.model == "gru") {
    return nn::BaselineSpec(nn::ParseCellKind(c.model), c.baseline_hidden,
                            c.baseline_layers, channels, window);
  }
  throw UsageError("unknown model '" + c.model + "' (expected ftcm, flm, rnn, lstm or gru)");
}

void CheckInput(const nn::ModelSpec& spec, const prep::WindowDataset& ds) {
  if (spec.input_channels != ds.channels || spec.window != ds.window) {
    throw InvalidArgument("model expects " + std::to_string(spec.input_channels) + "x" +
                          std::to_string(spec.window) + " windows, data has " +
                          std::to_string(ds.channels) + "x" + std::to_string(ds.window));
  }
}

std::string SummaryCsv(const std::string& title, const train::MetricsReport& r) {
  return "Model,Accuracy,Precision,Recall,F1-Score,Train Time (s),Test Time (s)\n" + title +
         "," + Fixed(100 * r.accuracy, 2) + "," + Fixed(100 * r.precision, 2) + "," +
         Fixed(100 * r.recall, 2) + "," + Fixed(100 * r.f1, 2) + "," +
         Fixed(r.train_time_s, 3) + "," + Fixed(r.test_time_s, 3) + "\n";
}

std::string Title(const std::string& kind, std::size_t channels, bool reduced) {
  std::string t = ModelTitle(kind);
  if (reduced) t += " (" + std::to_string(channels) + " features)";
  return t;
}

double Median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Up to n samples taken round-robin over the classes, in dataset order.
prep::WindowDataset BalancedSubset(const prep::WindowDataset& ds, std::size_t n) {
  std::vector<std::vector<std::size_t>> by_class(data::kNumClasses);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);
  std::vector<std::size_t> picked;
  for (std::size_t round = 0; picked.size() < std::min(n, ds.size()); ++round) {
    for (const auto& members : by_class) {
      if (round < members.size() && picked.size() < n) picked.push_back(members[round]);
    }
  }
  std::sort(picked.begin(), picked.end());
  return ds.Subset(picked);
}

std::vector<Tensor<double>> Samples(const prep::WindowDataset& ds) {
  const Tensor<double> all = ds.All<double>();
  std::vector<Tensor<double>> out;
  out.reserve(ds.size());
  const std::size_t stride = ds.sample_size();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    Tensor<double> t({ds.channels, ds.window});
    std::copy(all.raw() + i * stride, all.raw() + (i + 1) * stride, t.raw());
    out.push_back(std::move(t));
  }
  return out;
}

struct TrainedModel {
  json meta;
  std::vector<std::size_t> channels;
  std::vector<std::string> names;
};

TrainedModel LoadModelMeta(const fs::path& model_dir) {
  Require(model_dir / "model.ckpt", "run `xfdd train` first");
  Require(model_dir / "model.json", "run `xfdd train` first");
  TrainedModel m;
  try {
    m.meta = json::parse(ReadText(model_dir / "model.json"));
    m.channels = m.meta.at("feature_channels").get<std::vector<std::size_t>>();
    m.names = m.meta.at("feature_names").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw FormatError((model_dir / "model.json").string() + ": " + e.what());
  }
  return m;
}

std::vector<std::string> ListFiles(const fs::path& dir) {
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename() != "provenance.json") {
      files.push_back(e.path().filename().string());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

std::string ModelTitle(const std::string& kind) {
  std::string t = kind;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::toupper(c); });
  return t;
}

void CmdDatagen(const Context& ctx, const fs::path& out) {
  const PipelineConfig& c = ctx.config;
  EnsureOutDir(out);
  for (const auto& e : fs::directory_iterator(out)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("rec_", 0) == 0 && e.path().extension() == ".csv") fs::remove(e.path());
  }
  const data::Dataset ds = data::GenerateDataset(c.task, c.budget, c.datagen, c.seed);
  data::SaveDataset(ds, out);
  const auto counts = data::ClassWindowCounts(ds);
  const auto& names = data::ClassNames(c.task);
  Log(ctx) << "datagen: " << ds.recordings.size() << " recordings, windows per class";
  for (std::size_t k = 0; k < counts.size(); ++k) Log(ctx) << " " << names[k] << "=" << counts[k];
  Log(ctx) << "\n";
  WriteProvenance(out, ctx.command, c, ctx.runtime, {}, ListFiles(out));
}

void CmdPreprocess(const Context& ctx, const fs::path& data, const fs::path& out) {
  const PipelineConfig& c = ctx.config;
  Require(data / "manifest.json", "run `xfdd datagen` first");
  const data::Dataset ds = data::LoadDataset(data);
  const prep::Prepared p = prep::Prepare(ds, c.prep);
  EnsureOutDir(out);
  prep::SaveWindows(p.train, out / "train");
  prep::SaveWindows(p.val, out / "val");
  prep::SaveWindows(p.test, out / "test");
  json meta = {{"resampling", prep::ResamplingName(c.prep.resampling)},
               {"window", c.prep.window},
               {"step", c.prep.step},
               {"class_weights", p.class_weights},
               {"mean", p.stats.mean},
               {"std", p.stats.stddev},
               {"train_counts", p.train.ClassCounts()},
               {"val_counts", p.val.ClassCounts()},
               {"test_counts", p.test.ClassCounts()}};
  WriteText(out / "prep.json", meta.dump(2) + "\n");
  Log(ctx) << "preprocess: train " << p.train.size() << ", val " << p.val.size()
           << ", test " << p.test.size() << " windows of " << p.train.channels << "x"
           << p.train.window << "\n";
  WriteProvenance(out, ctx.command, c, ctx.runtime, {data},
                  {"prep.json", "train/", "val/", "test/"});
}

void CmdTrain(const Context& ctx, const fs::path& data, const fs::path& out,
              const std::optional<fs::path>& features) {
  const PipelineConfig& c = ctx.config;
  Splits s{LoadSplit(data, "train"), LoadSplit(data, "val"), LoadSplit(data, "test"),
           LoadClassWeights(data)};
  std::vector<std::size_t> channels;
  std::vector<std::string> names;
  if (features) {
    const auto sel = LoadFeatures(*features);
    channels = sel.channels;
    names = sel.names;
    ApplyFeatures(s.train, channels, names);
    ApplyFeatures(s.val, channels, names);
    ApplyFeatures(s.test, channels, names);
  }
  const nn::ModelSpec spec = SpecFor(c, s.train.channels, s.train.window);
  nn::Model<float> model(spec, c.seed);
  EnsureOutDir(out);
  Log(ctx) << "train: " << ModelTitle(c.model) << " with " << model.Counts().total
           << " parameters on " << s.train.size() << " windows\n";

  const train::TrainResult result =
      train::Train(model, s.train, s.val, c.train, s.class_weights,
                   [&](const train::EpochRecord& r) {
                     Log(ctx) << "epoch " << r.epoch << " lr " << r.lr << " loss "
                              << r.train_loss << " acc " << r.train_acc << " val_loss "
                              << r.val_loss << " val_acc " << r.val_acc << "\n";
                   });
  train::MetricsReport report = train::Evaluate(model, s.test, c.train.batch_size);
  report.train_time_s = result.train_seconds;
  report.history = result.history;

  nn::SaveCheckpoint(model, out / "model.ckpt");
  const std::string title = Title(c.model, s.train.channels, features.has_value());
  json meta = {{"kind", c.model},
               {"title", title},
               {"parameters", model.Counts().total},
               {"input_channels", s.train.channels},
               {"window", s.train.window},
               {"feature_channels", channels},
               {"feature_names", names},
               {"epochs_run", result.history.size()},
               {"best_epoch", result.best_epoch},
               {"stopped_early", result.stopped_early}};
  WriteText(out / "model.json", meta.dump(2) + "\n");
  WriteText(out / "history.jsonl", train::HistoryJsonl(result.history));
  WriteText(out / "report.json", train::ReportJson(report));
  WriteText(out / "confusion.csv", train::ConfusionCsv(report));
  WriteText(out / "summary.csv", SummaryCsv(title, report));

  std::vector<double> epoch_seconds;
  svg::Series tl{"train", {}, {}}, vl{"validation", {}, {}};
  svg::Series ta{"train", {}, {}}, va{"validation", {}, {}};
  for (const auto& r : result.history) {
    epoch_seconds.push_back(r.seconds);
    const double e = static_cast<double>(r.epoch);
    tl.x.push_back(e), tl.y.push_back(r.train_loss);
    vl.x.push_back(e), vl.y.push_back(r.val_loss);
    ta.x.push_back(e), ta.y.push_back(r.train_acc);
    va.x.push_back(e), va.y.push_back(r.val_acc);
  }
  json timing = {{"train_seconds", result.train_seconds},
                 {"test_seconds", report.test_time_s},
                 {"epoch_seconds", epoch_seconds},
                 {"median_epoch_seconds", Median(epoch_seconds)},
                 {"hit_time_limit", result.hit_time_limit}};
  WriteText(out / "timing.json", timing.dump(2) + "\n");
  const svg::Series loss[] = {tl, vl};
  const svg::Series acc[] = {ta, va};
  WriteText(out / "loss.svg", svg::LineChart(title + " loss", "epoch", "loss", loss));
  WriteText(out / "accuracy.svg",
            svg::LineChart(title + " accuracy", "epoch", "accuracy", acc));

  Log(ctx) << "test: accuracy " << Fixed(100 * report.accuracy, 2) << "% precision "
           << Fixed(100 * report.precision, 2) << "% recall " << Fixed(100 * report.recall, 2)
           << "% f1 " << Fixed(100 * report.f1, 2) << "%\n";
  std::vector<fs::path> inputs = {data};
  if (features) inputs.push_back(features->parent_path());
  WriteProvenance(out, ctx.command, c, ctx.runtime, inputs, ListFiles(out));
}

void CmdEvaluate(const Context& ctx, const fs::path& data, const fs::path& model_dir,
                 const fs::path& out) {
  const PipelineConfig& c = ctx.config;
  const TrainedModel tm = LoadModelMeta(model_dir);
  prep::WindowDataset test = LoadSplit(data, "test");
  ApplyFeatures(test, tm.channels, tm.names);
  nn::Model<float> model = nn::LoadCheckpoint(model_dir / "model.ckpt");
  CheckInput(model.spec(), test);
  const train::MetricsReport report = train::Evaluate(model, test, c.train.batch_size);
  EnsureOutDir(out);
  WriteText(out / "report.json", train::ReportJson(report));
  WriteText(out / "confusion.csv", train::ConfusionCsv(report));
  WriteText(out / "summary.csv", SummaryCsv(tm.meta.value("title", "model"), report));
  Log(ctx) << "evaluate: accuracy " << Fixed(100 * report.accuracy, 2) << "% on "
           << test.size() << " windows\n";
  WriteProvenance(out, ctx.command, c, ctx.runtime, {data, model_dir}, ListFiles(out));
}

void CmdExplain(const Context& ctx, const fs::path& data, const fs::path& model_dir,
                const fs::path& out) {
  const PipelineConfig& c = ctx.config;
  const XaiSettings& x = c.xai;
  if (x.methods.empty() || x.baselines.empty()) {
    throw UsageError("explain needs at least one method and one baseline");
  }
  const TrainedModel tm = LoadModelMeta(model_dir);
  prep::WindowDataset reference = LoadSplit(data, "train");
  prep::WindowDataset test = LoadSplit(data, "test");
  ApplyFeatures(reference, tm.channels, tm.names);
  ApplyFeatures(test, tm.channels, tm.names);
  const nn::Model<float> model = nn::LoadCheckpoint(model_dir / "model.ckpt");
  CheckInput(model.spec(), test);
  auto shared = std::make_shared<const nn::Model<double>>(model.Cast<double>());
  // Each worker gets its own copy of the weights.
  const auto make_net = [shared]() -> xai::Network {
    auto m = std::make_shared<nn::Model<double>>(*shared);
    xai::Network net = xai::FromModel(*m);
    return [m, net](const ad::Var<double>& v) { return net(v); };
  };
  const xai::Network net = make_net();
  const prep::WindowDataset subset = BalancedSubset(test, x.samples);
  const auto& classes = data::ClassNames(c.task);
  EnsureOutDir(out);
  Log(ctx) << "explain: " << subset.size() << " test windows, " << x.methods.size()
           << " methods x " << x.baselines.size() << " baselines\n";

  std::optional<xai::ImportanceReport> first;
  for (const xai::Method method : x.methods) {
    for (const xai::BaselineKind kind : x.baselines) {
      const auto baselines = xai::MakeBaselines({kind, x.random_baselines}, reference, c.seed);
      const auto attrs = xai::AttributeDataset(make_net, method, subset, baselines, x.options,
                                               c.seed, ctx.runtime.threads);
      xai::ImportanceReport r = xai::BuildImportance(attrs, subset.labels, subset.channel_names);
      r.method = xai::MethodName(method);
      r.baseline = xai::BaselineName(kind);
      const std::string tag = r.method + "_" + r.baseline;
      WriteText(out / ("gfi_" + tag + ".csv"), xai::GfiCsv(r));
      WriteText(out / ("pcfi_" + tag + ".csv"), xai::PcfiCsv(r, classes));
      Log(ctx) << "  " << tag << ": top feature " << r.feature_names[r.ranking[0]] << "\n";
      if (!first) first = std::move(r);
    }
  }

  // Interactions against the first baseline kind (averaged when it has many).
  const auto inter_baselines =
      xai::MakeBaselines({x.baselines.front(), x.random_baselines}, reference, c.seed);
  Tensor<double> inter_base = inter_baselines.front();
  for (std::size_t b = 1; b < inter_baselines.size(); ++b) {
    for (std::size_t i = 0; i < inter_base.size(); ++i) {
      inter_base.data()[i] += inter_baselines[b].data()[i];
    }
  }
  for (std::size_t i = 0; i < inter_base.size(); ++i) {
    inter_base.data()[i] /= static_cast<double>(inter_baselines.size());
  }
  const prep::WindowDataset inter_set = BalancedSubset(subset, x.interaction_samples);
  const auto inter_samples = Samples(inter_set);
  const std::vector<std::size_t> inter_targets(inter_set.labels.begin(), inter_set.labels.end());
  const xai::InteractionMatrix im = xai::FeatureInteractions(
      net, inter_targets, inter_samples, inter_base, inter_set.channel_names);
  WriteText(out / "interactions.csv", xai::InteractionCsv(im));
  WriteText(out / "interactions.svg",
            svg::Heatmap(tm.meta.value("title", "model") + " feature interactions",
                         im.feature_names, im.normalized));

  const prep::WindowDataset timing_set = BalancedSubset(subset, x.timing_samples);
  const auto timing_samples = Samples(timing_set);
  const std::vector<std::size_t> timing_targets(timing_set.labels.begin(),
                                                timing_set.labels.end());
  const auto timing_baselines = xai::MakeBaselines(
      {xai::BaselineKind::kRandom, x.random_baselines}, reference, c.seed);
  xai::TimingOptions topts;
  topts.methods = x.options;
  topts.dlshap_baselines = x.random_baselines;
  topts.repeats = x.timing_repeats;
  const xai::TimingRow row =
      xai::TimeMethods(tm.meta.value("title", "model"), net, timing_samples, timing_targets,
                       timing_baselines, topts);
  WriteText(out / "timing.csv", xai::TimingCsv(std::span(&row, 1)));

  if (x.select_top > 0) {
    xai::FeatureSelection sel = xai::SelectTopK(*first, x.select_top);
    // Indices refer to the channels of the data the model was trained on.
    if (!tm.channels.empty()) {
      for (auto& ch : sel.channels) ch = tm.channels[ch];
    }
    sel.method = first->method;
    sel.baseline = first->baseline;
    WriteText(out / ("top" + std::to_string(x.select_top) + ".json"),
              xai::FeatureSelectionJson(sel));
    if (sel.boundary_tie) {
      Log(ctx) << "warning: features " << x.select_top << " and " << x.select_top + 1
               << " have equal importance\n";
    }
  }
  WriteProvenance(out, ctx.command, c, ctx.runtime, {data, model_dir}, ListFiles(out));
}

void CmdGridsearch(const Context& ctx, const train::GridSpace& space, std::size_t trials,
                   const fs::path& data, const fs::path& out) {
  const PipelineConfig& c = ctx.config;
  Require(data / "manifest.json", "run `xfdd datagen` first");
  const data::Dataset ds = data::LoadDataset(data);
  train::GridTrainOptions options{c.train, c.arch, c.prep};
  const train::GridEvaluator inner = train::MakeTrainingEvaluator(ds, options);
  std::size_t done = 0;
  const std::size_t planned = std::min(trials, space.size());
  const train::GridEvaluator logged = [&](const train::GridConfig& g) {
    train::GridResult r = inner(g);
    Log(ctx) << "[" << ++done << "/" << planned << "] " << g.ToString() << " val_acc "
             << Fixed(r.val_accuracy, 4) << "\n";
    return r;
  };
  EnsureOutDir(out);
  const auto results = train::GridSearch(space, trials, c.seed, logged);

  std::string csv =
      "rank,conv_layers,gru_layers,hidden,fc_layers,resampling,window,step,val_accuracy,"
      "params,error\n";
  json all = json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    const auto& g = r.config;
    std::string err = r.error;
    std::replace(err.begin(), err.end(), '"', '\'');
    csv += std::to_string(i + 1) + "," + std::to_string(g.conv_layers) + "," +
           std::to_string(g.gru_layers) + "," + std::to_string(g.hidden) + "," +
           std::to_string(g.fc_layers) + "," + prep::ResamplingName(g.resampling) + "," +
           std::to_string(g.window) + "," + std::to_string(g.step) + "," +
           Fixed(r.val_accuracy, 6) + "," + std::to_string(r.params) + ",\"" + err + "\"\n";
    json entry = {{"rank", i + 1},
                  {"config", g.ToString()},
                  {"val_accuracy", r.val_accuracy},
                  {"params", r.params},
                  {"error", r.error}};
    if (r.metrics) entry["metrics"] = json::parse(train::ReportJson(*r.metrics));
    all.push_back(entry);
  }
  WriteText(out / "ranking.csv", csv);
  WriteText(out / "results.json", all.dump(2) + "\n");
  if (!results.empty()) {
    Log(ctx) << "best: " << results.front().config.ToString() << "\n";
  }
  WriteProvenance(out, ctx.command, c, ctx.runtime, {data}, ListFiles(out));
}

}  // namespace xfdd::cli

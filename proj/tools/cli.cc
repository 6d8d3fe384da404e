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

#include "cli.h"

#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.h"
#include "config.h"

namespace xfdd::cli {
namespace {

namespace fs = std::filesystem;

std::vector<std::string> SplitList(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  if (out.empty()) throw UsageError("empty list '" + text + "'");
  return out;
}

std::vector<std::size_t> SizeList(const std::string& text, const char* flag) {
  std::vector<std::size_t> out;
  for (const auto& item : SplitList(text)) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != item.size() || item[0] == '-') {
      throw UsageError(std::string(flag) + ": '" + item + "' is not a non-negative integer");
    }
    out.push_back(v);
  }
  return out;
}

std::vector<xai::Method> MethodList(const std::string& text) {
  if (text == "all") return xai::AllMethods();
  std::vector<xai::Method> out;
  for (const auto& m : SplitList(text)) out.push_back(xai::ParseMethod(m));
  return out;
}

std::vector<xai::BaselineKind> BaselineList(const std::string& text) {
  if (text == "all") return xai::AllBaselines();
  std::vector<xai::BaselineKind> out;
  for (const auto& b : SplitList(text)) out.push_back(xai::ParseBaseline(b));
  return out;
}

// Flag values collected by CLI11; unset options leave the config untouched.
struct Flags {
  std::string config, out, data, model_dir, features;
  std::string task, model, resampling, methods, baselines;
  std::uint64_t seed = 0;
  std::size_t budget = 0, window = 0, step = 0, epochs = 0, batch = 0, patience = 0;
  std::size_t samples = 0, select_top = 0, ig_steps = 0, gradshap_samples = 0;
  std::size_t random_baselines = 0, trials = 8;
  double imbalance = 1.0, lr = 0.0, time_limit = 0.0;
  std::string conv_axis, gru_axis, hidden_axis, fc_axis, resampling_axis, window_axis,
      step_axis;
};

struct Sub {
  CLI::App* app = nullptr;
  std::vector<std::pair<CLI::Option*, std::function<void(PipelineConfig&)>>> overrides;

  template <typename T, typename Apply>
  void Add(const std::string& name, T& target, const std::string& help, Apply apply) {
    overrides.emplace_back(app->add_option(name, target, help), apply);
  }
};

}  // namespace

int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fault detection and diagnosis pipeline with attribution reports", "xfdd"};
  app.require_subcommand(1, 1);
  Flags f;

  const auto make = [&](const char* name, const char* help) {
    Sub s;
    s.app = app.add_subcommand(name, help);
    s.app->add_option("--config", f.config, "JSON pipeline configuration")
        ->check(CLI::ExistingFile);
    s.Add("--seed", f.seed, "root seed", [&](PipelineConfig& c) { c.seed = f.seed; });
    return s;
  };

  Sub datagen = make("datagen", "generate synthetic labelled recordings");
  datagen.app->add_option("--out", f.out, "output directory")->required();
  datagen.Add("--task", f.task, "fault-type or fault-location",
              [&](PipelineConfig& c) { c.task = data::ParseTask(f.task); });
  datagen.Add("--budget", f.budget, "windows per class",
              [&](PipelineConfig& c) { c.budget = f.budget; });
  datagen.Add("--imbalance", f.imbalance, "ratio between the last and first class counts",
              [&](PipelineConfig& c) { c.datagen.imbalance = f.imbalance; });

  Sub preprocess = make("preprocess", "window, split, standardise and resample");
  preprocess.app->add_option("--data", f.data, "datagen output directory")->required();
  preprocess.app->add_option("--out", f.out, "output directory")->required();
  preprocess.Add("--window", f.window, "window length W",
                 [&](PipelineConfig& c) { c.prep.window = f.window; });
  preprocess.Add("--step", f.step, "window step S",
                 [&](PipelineConfig& c) { c.prep.step = f.step; });
  preprocess.Add("--resampling", f.resampling, "none, undersample, smote or class_weights",
                 [&](PipelineConfig& c) {
                   c.prep.resampling = prep::ParseResampling(f.resampling);
                 });

  Sub trn = make("train", "train a classifier and evaluate it on the test split");
  trn.app->add_option("--data", f.data, "preprocess output directory")->required();
  trn.app->add_option("--out", f.out, "output directory")->required();
  trn.app->add_option("--features", f.features, "feature file from explain --select-top");
  trn.Add("--model", f.model, "ftcm, flm, rnn, lstm or gru",
          [&](PipelineConfig& c) { c.model = f.model; });
  trn.Add("--epochs", f.epochs, "maximum epochs",
          [&](PipelineConfig& c) { c.train.max_epochs = f.epochs; });
  trn.Add("--batch", f.batch, "batch size",
          [&](PipelineConfig& c) { c.train.batch_size = f.batch; });
  trn.Add("--lr", f.lr, "initial learning rate",
          [&](PipelineConfig& c) { c.train.learning_rate = f.lr; });
  trn.Add("--patience", f.patience, "early-stopping patience in epochs",
          [&](PipelineConfig& c) { c.train.patience = f.patience; });
  trn.Add("--time-limit", f.time_limit, "wall-clock limit in seconds",
          [&](PipelineConfig& c) { c.train.time_limit_s = f.time_limit; });

  Sub evaluate = make("evaluate", "evaluate a trained model on the test split");
  evaluate.app->add_option("--data", f.data, "preprocess output directory")->required();
  evaluate.app->add_option("--model-dir", f.model_dir, "train output directory")->required();
  evaluate.app->add_option("--out", f.out, "output directory")->required();

  Sub explain = make("explain", "attribution reports, interactions and timings");
  explain.app->add_option("--data", f.data, "preprocess output directory")->required();
  explain.app->add_option("--model-dir", f.model_dir, "train output directory")->required();
  explain.app->add_option("--out", f.out, "output directory")->required();
  explain.Add("--methods", f.methods, "comma list of ig, deeplift, gradshap, dlshap or all",
              [&](PipelineConfig& c) { c.xai.methods = MethodList(f.methods); });
  explain.Add("--baselines", f.baselines, "comma list of zero, mean, median, random or all",
              [&](PipelineConfig& c) { c.xai.baselines = BaselineList(f.baselines); });
  explain.Add("--samples", f.samples, "test windows to explain",
              [&](PipelineConfig& c) { c.xai.samples = f.samples; });
  explain.Add("--select-top", f.select_top, "write the top-k GFI features",
              [&](PipelineConfig& c) { c.xai.select_top = f.select_top; });
  explain.Add("--ig-steps", f.ig_steps, "integrated gradients steps m",
              [&](PipelineConfig& c) { c.xai.options.ig_steps = f.ig_steps; });
  explain.Add("--gradshap-samples", f.gradshap_samples, "gradient SHAP samples n",
              [&](PipelineConfig& c) { c.xai.options.gradshap_samples = f.gradshap_samples; });
  explain.Add("--random-baselines", f.random_baselines, "random baselines k",
              [&](PipelineConfig& c) { c.xai.random_baselines = f.random_baselines; });

  Sub grid = make("gridsearch", "rank hybrid architectures on validation accuracy");
  grid.app->add_option("--data", f.data, "datagen output directory")->required();
  grid.app->add_option("--out", f.out, "output directory")->required();
  grid.app->add_option("--trials", f.trials, "configurations to evaluate")
      ->check(CLI::PositiveNumber);
  grid.app->add_option("--conv-layers", f.conv_axis, "comma list");
  grid.app->add_option("--gru-layers", f.gru_axis, "comma list");
  grid.app->add_option("--hidden", f.hidden_axis, "comma list");
  grid.app->add_option("--fc-layers", f.fc_axis, "comma list");
  grid.app->add_option("--resampling", f.resampling_axis, "comma list");
  grid.app->add_option("--window", f.window_axis, "comma list");
  grid.app->add_option("--step", f.step_axis, "comma list");
  grid.Add("--epochs", f.epochs, "maximum epochs per configuration",
           [&](PipelineConfig& c) { c.train.max_epochs = f.epochs; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  Sub* active = nullptr;
  for (Sub* s : {&datagen, &preprocess, &trn, &evaluate, &explain, &grid}) {
    if (s->app->parsed()) active = s;
  }
  const std::string name = active->app->get_name();

  Context ctx;
  ctx.log = &out;
  ctx.runtime = RuntimeFromEnv();
  ctx.command = "xfdd";
  for (int i = 1; i < argc; ++i) ctx.command += std::string(" ") + argv[i];

  try {
    train::GridSpace space;
    try {
      if (!f.config.empty()) ctx.config = LoadConfig(f.config);
      for (auto& [opt, apply] : active->overrides) {
        if (opt->count() > 0) apply(ctx.config);
      }
      Finalize(ctx.config);
      ctx.config.train.Validate();
      if (name == "gridsearch") {
        if (!f.conv_axis.empty()) space.conv_layers = SizeList(f.conv_axis, "--conv-layers");
        if (!f.gru_axis.empty()) space.gru_layers = SizeList(f.gru_axis, "--gru-layers");
        if (!f.hidden_axis.empty()) space.hidden = SizeList(f.hidden_axis, "--hidden");
        if (!f.fc_axis.empty()) space.fc_layers = SizeList(f.fc_axis, "--fc-layers");
        if (!f.window_axis.empty()) space.window = SizeList(f.window_axis, "--window");
        if (!f.step_axis.empty()) space.step = SizeList(f.step_axis, "--step");
        if (!f.resampling_axis.empty()) {
          space.resampling.clear();
          for (const auto& r : SplitList(f.resampling_axis)) {
            space.resampling.push_back(prep::ParseResampling(r));
          }
        }
      }
    } catch (const InvalidArgument& e) {
      throw UsageError(e.what());
    }

    if (name == "datagen") {
      CmdDatagen(ctx, f.out);
    } else if (name == "preprocess") {
      CmdPreprocess(ctx, f.data, f.out);
    } else if (name == "train") {
      std::optional<fs::path> features;
      if (!f.features.empty()) features = f.features;
      CmdTrain(ctx, f.data, f.out, features);
    } else if (name == "evaluate") {
      CmdEvaluate(ctx, f.data, f.model_dir, f.out);
    } else if (name == "explain") {
      CmdExplain(ctx, f.data, f.model_dir, f.out);
    } else {
      CmdGridsearch(ctx, space, f.trials, f.data, f.out);
    }
    return kExitOk;
  } catch (const UsageError& e) {
    err << "xfdd " << name << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const MissingPrerequisite& e) {
    err << "xfdd " << name << ": " << e.what() << "\n";
    return kExitMissing;
  } catch (const NumericalError& e) {
    err << "xfdd " << name << ": numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const IoError& e) {
    err << "xfdd " << name << ": " << e.what() << "\n";
    return kExitIo;
  } catch (const FormatError& e) {
    err << "xfdd " << name << ": " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "xfdd " << name << ": " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "xfdd " << name << ": " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace xfdd::cli

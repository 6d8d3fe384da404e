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

// Pipeline configuration shared by every subcommand, its JSON form and the
// provenance records written next to each command's outputs.

#ifndef XFDD_TOOLS_CONFIG_H_
#define XFDD_TOOLS_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xfdd/datagen.h"
#include "xfdd/model_spec.h"
#include "xfdd/preprocess.h"
#include "xfdd/train.h"
#include "xfdd/xai.h"

namespace xfdd::cli {

inline constexpr int kConfigSchemaVersion = 1;

struct XaiSettings {
  std::vector<xai::Method> methods = xai::AllMethods();
  std::vector<xai::BaselineKind> baselines = {xai::BaselineKind::kZero};
  xai::MethodOptions options;
  std::size_t random_baselines = 10;  // also the DeepLIFT SHAP k
  std::size_t samples = 100;          // test windows explained
  std::size_t select_top = 0;         // 0 = no feature file
  std::size_t interaction_samples = 20;
  std::size_t timing_samples = 10;
  std::size_t timing_repeats = 3;
};

struct PipelineConfig {
  data::Task task = data::Task::kFaultType;
  std::uint64_t seed = 0;
  std::size_t budget = 1000;  // windows per class
  data::DatagenConfig datagen;
  prep::PrepConfig prep;
  std::string model = "ftcm";  // ftcm | flm | rnn | lstm | gru
  nn::ArchOptions arch;
  std::size_t baseline_hidden = 64;
  std::size_t baseline_layers = 2;
  train::TrainConfig train;
  XaiSettings xai;

  PipelineConfig();
};

// Propagates the root seed and preprocessing window into the sub-configs.
void Finalize(PipelineConfig& config);

nlohmann::json ToJson(const PipelineConfig& config);
// Missing keys keep their defaults; unknown keys are rejected by name.
PipelineConfig FromJson(const nlohmann::json& j);
PipelineConfig LoadConfig(const std::filesystem::path& path);

// 16 hex digits of FNV-1a over the canonical JSON text.
std::string ConfigHash(const PipelineConfig& config);

struct Runtime {
  std::size_t threads = 1;
  bool deterministic = false;
};
// XFDD_THREADS caps the worker count; XFDD_DETERMINISTIC=1 forces one.
Runtime RuntimeFromEnv();

// Writes provenance.json into `dir`: command, config and its hash, seed,
// the listed output files and the provenance of each input directory.
void WriteProvenance(const std::filesystem::path& dir, const std::string& command,
                     const PipelineConfig& config, const Runtime& runtime,
                     const std::vector<std::filesystem::path>& inputs,
                     const std::vector<std::string>& files);

void WriteText(const std::filesystem::path& path, const std::string& text);
std::string ReadText(const std::filesystem::path& path);

}  // namespace xfdd::cli

#endif  // XFDD_TOOLS_CONFIG_H_

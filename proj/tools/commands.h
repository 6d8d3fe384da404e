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

// The pipeline stages behind each subcommand. Every command writes its
// outputs plus provenance.json into one directory.

#ifndef XFDD_TOOLS_COMMANDS_H_
#define XFDD_TOOLS_COMMANDS_H_

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include "config.h"
#include "xfdd/error.h"
#include "xfdd/train.h"

namespace xfdd::cli {

// Bad flag values; mapped to exit code 64.
class UsageError : public Error {
 public:
  using Error::Error;
};

// An input directory from an earlier stage is missing; exit code 3.
class MissingPrerequisite : public Error {
 public:
  using Error::Error;
};

struct Context {
  PipelineConfig config;
  Runtime runtime;
  std::string command;  // the invocation recorded in provenance
  std::ostream* log = nullptr;
};

// Raw recordings: rec_*.csv + manifest.json.
void CmdDatagen(const Context& ctx, const std::filesystem::path& out);

// train/, val/, test/ window directories and prep.json.
void CmdPreprocess(const Context& ctx, const std::filesystem::path& data,
                   const std::filesystem::path& out);

// model.ckpt, model.json, history.jsonl, report.json, confusion.csv,
// summary.csv, timing.json, loss.svg, accuracy.svg.
void CmdTrain(const Context& ctx, const std::filesystem::path& data,
              const std::filesystem::path& out,
              const std::optional<std::filesystem::path>& features);

// report.json, confusion.csv, summary.csv for a trained model.
void CmdEvaluate(const Context& ctx, const std::filesystem::path& data,
                 const std::filesystem::path& model_dir,
                 const std::filesystem::path& out);

// gfi_/pcfi_<method>_<baseline>.csv per variant, interactions.csv/.svg,
// timing.csv and, when requested, top<k>.json.
void CmdExplain(const Context& ctx, const std::filesystem::path& data,
                const std::filesystem::path& model_dir,
                const std::filesystem::path& out);

// ranking.csv and results.json over a raw dataset.
void CmdGridsearch(const Context& ctx, const train::GridSpace& space,
                   std::size_t trials, const std::filesystem::path& data,
                   const std::filesystem::path& out);

// "FTCM", "GRU", ... for report tables.
std::string ModelTitle(const std::string& kind);

}  // namespace xfdd::cli

#endif  // XFDD_TOOLS_COMMANDS_H_

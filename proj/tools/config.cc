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

#include "config.h"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "xfdd/error.h"

namespace xfdd::cli {
namespace {

using json = nlohmann::json;

void RejectUnknown(const json& j, const std::set<std::string>& known,
                   const std::string& where) {
  if (!j.is_object()) throw InvalidArgument("config: '" + where + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) {
      throw InvalidArgument("config: unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void Get(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

PipelineConfig::PipelineConfig() {
  // Desk-scale defaults: short windows and a narrowed hybrid.
  prep.window = 50;
  prep.step = 50;
  arch.window = 50;
  arch.channel_divisor = 4;
  arch.hidden = 64;
  train.batch_size = 128;
}

void Finalize(PipelineConfig& c) {
  c.train.seed = c.seed;
  c.train.resampling = c.prep.resampling;
  c.prep.seed = c.seed;
  c.arch.window = c.prep.window;
  if (c.train.max_epochs > 0) c.train.patience = std::min(c.train.patience, c.train.max_epochs);
}

json ToJson(const PipelineConfig& c) {
  std::vector<std::string> methods, baselines;
  for (auto m : c.xai.methods) methods.push_back(xai::MethodName(m));
  for (auto b : c.xai.baselines) baselines.push_back(xai::BaselineName(b));
  const auto& d = c.datagen;
  return {
      {"schema_version", kConfigSchemaVersion},
      {"task", data::TaskName(c.task)},
      {"seed", c.seed},
      {"datagen",
       {{"budget_per_class", c.budget},
        {"window", d.window},
        {"step", d.step},
        {"rate_hz", d.rate_hz},
        {"max_windows_per_recording", d.max_windows_per_recording},
        {"imbalance", d.imbalance},
        {"type_channel", d.type_channel},
        {"noise_snr_db", d.noise_snr_db},
        {"gain", d.gain},
        {"offset", d.offset},
        {"location_kind", data::FaultKindName(d.location_kind)},
        {"location_channels", d.location_channels},
        {"location_magnitude", d.location_magnitude}}},
      {"preprocess",
       {{"window", c.prep.window},
        {"step", c.prep.step},
        {"resampling", prep::ResamplingName(c.prep.resampling)},
        {"train_frac", c.prep.train_frac},
        {"val_frac", c.prep.val_frac},
        {"test_frac", c.prep.test_frac},
        {"smote_k", c.prep.smote_k},
        {"denoise", c.prep.denoise},
        {"denoise_width", c.prep.denoise_width}}},
      {"model",
       {{"kind", c.model},
        {"channel_divisor", c.arch.channel_divisor},
        {"hidden", c.arch.hidden},
        {"recurrent_layers", c.arch.recurrent_layers},
        {"fc_hidden", c.arch.fc_hidden},
        {"dropout", c.arch.dropout},
        {"baseline_hidden", c.baseline_hidden},
        {"baseline_layers", c.baseline_layers}}},
      {"train",
       {{"learning_rate", c.train.learning_rate},
        {"batch_size", c.train.batch_size},
        {"max_epochs", c.train.max_epochs},
        {"l1", c.train.l1},
        {"l2", c.train.l2},
        {"patience", c.train.patience},
        {"min_lr", c.train.min_lr},
        {"time_limit_s", c.train.time_limit_s}}},
      {"xai",
       {{"methods", methods},
        {"baselines", baselines},
        {"ig_steps", c.xai.options.ig_steps},
        {"gradshap_samples", c.xai.options.gradshap_samples},
        {"gradshap_sigma", c.xai.options.gradshap_sigma},
        {"random_baselines", c.xai.random_baselines},
        {"samples", c.xai.samples},
        {"select_top", c.xai.select_top},
        {"interaction_samples", c.xai.interaction_samples},
        {"timing_samples", c.xai.timing_samples},
        {"timing_repeats", c.xai.timing_repeats}}}};
}

PipelineConfig FromJson(const json& j) {
  PipelineConfig c;
  try {
    RejectUnknown(j, {"schema_version", "task", "seed", "datagen", "preprocess", "model",
                      "train", "xai"},
                  "the top level");
    if (j.contains("schema_version") &&
        j.at("schema_version").get<int>() != kConfigSchemaVersion) {
      throw InvalidArgument("config: schema_version " +
                            j.at("schema_version").dump() + " is not supported (expected " +
                            std::to_string(kConfigSchemaVersion) + ")");
    }
    if (j.contains("task")) c.task = data::ParseTask(j.at("task").get<std::string>());
    Get(j, "seed", c.seed);
    if (j.contains("datagen")) {
      const json& d = j.at("datagen");
      RejectUnknown(d, {"budget_per_class", "window", "step", "rate_hz",
                        "max_windows_per_recording", "imbalance", "type_channel",
                        "noise_snr_db", "gain", "offset", "location_kind",
                        "location_channels", "location_magnitude"},
                    "datagen");
      Get(d, "budget_per_class", c.budget);
      Get(d, "window", c.datagen.window);
      Get(d, "step", c.datagen.step);
      Get(d, "rate_hz", c.datagen.rate_hz);
      Get(d, "max_windows_per_recording", c.datagen.max_windows_per_recording);
      Get(d, "imbalance", c.datagen.imbalance);
      Get(d, "type_channel", c.datagen.type_channel);
      Get(d, "noise_snr_db", c.datagen.noise_snr_db);
      Get(d, "gain", c.datagen.gain);
      Get(d, "offset", c.datagen.offset);
      if (d.contains("location_kind")) {
        c.datagen.location_kind = data::ParseFaultKind(d.at("location_kind").get<std::string>());
      }
      Get(d, "location_channels", c.datagen.location_channels);
      Get(d, "location_magnitude", c.datagen.location_magnitude);
    }
    if (j.contains("preprocess")) {
      const json& p = j.at("preprocess");
      RejectUnknown(p, {"window", "step", "resampling", "train_frac", "val_frac",
                        "test_frac", "smote_k", "denoise", "denoise_width"},
                    "preprocess");
      Get(p, "window", c.prep.window);
      Get(p, "step", c.prep.step);
      if (p.contains("resampling")) {
        c.prep.resampling = prep::ParseResampling(p.at("resampling").get<std::string>());
      }
      Get(p, "train_frac", c.prep.train_frac);
      Get(p, "val_frac", c.prep.val_frac);
      Get(p, "test_frac", c.prep.test_frac);
      Get(p, "smote_k", c.prep.smote_k);
      Get(p, "denoise", c.prep.denoise);
      Get(p, "denoise_width", c.prep.denoise_width);
    }
    if (j.contains("model")) {
      const json& m = j.at("model");
      RejectUnknown(m, {"kind", "channel_divisor", "hidden", "recurrent_layers",
                        "fc_hidden", "dropout", "baseline_hidden", "baseline_layers"},
                    "model");
      Get(m, "kind", c.model);
      Get(m, "channel_divisor", c.arch.channel_divisor);
      Get(m, "hidden", c.arch.hidden);
      Get(m, "recurrent_layers", c.arch.recurrent_layers);
      Get(m, "fc_hidden", c.arch.fc_hidden);
      Get(m, "dropout", c.arch.dropout);
      Get(m, "baseline_hidden", c.baseline_hidden);
      Get(m, "baseline_layers", c.baseline_layers);
    }
    if (j.contains("train")) {
      const json& t = j.at("train");
      RejectUnknown(t, {"learning_rate", "batch_size", "max_epochs", "l1", "l2",
                        "patience", "min_lr", "time_limit_s"},
                    "train");
      Get(t, "learning_rate", c.train.learning_rate);
      Get(t, "batch_size", c.train.batch_size);
      Get(t, "max_epochs", c.train.max_epochs);
      Get(t, "l1", c.train.l1);
      Get(t, "l2", c.train.l2);
      Get(t, "patience", c.train.patience);
      Get(t, "min_lr", c.train.min_lr);
      Get(t, "time_limit_s", c.train.time_limit_s);
    }
    if (j.contains("xai")) {
      const json& x = j.at("xai");
      RejectUnknown(x, {"methods", "baselines", "ig_steps", "gradshap_samples",
                        "gradshap_sigma", "random_baselines", "samples", "select_top",
                        "interaction_samples", "timing_samples", "timing_repeats"},
                    "xai");
      if (x.contains("methods")) {
        c.xai.methods.clear();
        for (const auto& m : x.at("methods")) c.xai.methods.push_back(xai::ParseMethod(m));
      }
      if (x.contains("baselines")) {
        c.xai.baselines.clear();
        for (const auto& b : x.at("baselines")) {
          c.xai.baselines.push_back(xai::ParseBaseline(b));
        }
      }
      Get(x, "ig_steps", c.xai.options.ig_steps);
      Get(x, "gradshap_samples", c.xai.options.gradshap_samples);
      Get(x, "gradshap_sigma", c.xai.options.gradshap_sigma);
      Get(x, "random_baselines", c.xai.random_baselines);
      Get(x, "samples", c.xai.samples);
      Get(x, "select_top", c.xai.select_top);
      Get(x, "interaction_samples", c.xai.interaction_samples);
      Get(x, "timing_samples", c.xai.timing_samples);
      Get(x, "timing_repeats", c.xai.timing_repeats);
    }
  } catch (const json::exception& e) {
    throw InvalidArgument("config: " + std::string(e.what()));
  }
  Finalize(c);
  return c;
}

PipelineConfig LoadConfig(const std::filesystem::path& path) {
  const std::string text = ReadText(path);
  try {
    return FromJson(json::parse(text));
  } catch (const json::parse_error& e) {
    throw InvalidArgument("config " + path.string() + ": " + e.what());
  }
}

std::string ConfigHash(const PipelineConfig& config) {
  const std::string text = ToJson(config).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Runtime RuntimeFromEnv() {
  Runtime r;
  r.threads = std::max(1u, std::thread::hardware_concurrency());
  if (const char* t = std::getenv("XFDD_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(t, &end, 10);
    if (end != t && *end == '\0' && v > 0) r.threads = std::min<std::size_t>(r.threads, v);
  }
  if (const char* d = std::getenv("XFDD_DETERMINISTIC"); d && std::string(d) == "1") {
    r.deterministic = true;
    r.threads = 1;
  }
  return r;
}

void WriteProvenance(const std::filesystem::path& dir, const std::string& command,
                     const PipelineConfig& config, const Runtime& runtime,
                     const std::vector<std::filesystem::path>& inputs,
                     const std::vector<std::string>& files) {
  json upstream = json::array();
  for (const auto& in : inputs) {
    json entry = {{"path", in.string()}};
    const auto prov = in / "provenance.json";
    if (std::filesystem::exists(prov)) {
      try {
        json p = json::parse(ReadText(prov));
        entry["command"] = p.value("command", "");
        entry["config_hash"] = p.value("config_hash", "");
      } catch (const json::exception&) {
        entry["config_hash"] = "unreadable";
      }
    }
    upstream.push_back(entry);
  }
  json out = {{"schema_version", kConfigSchemaVersion},
              {"command", command},
              {"config_hash", ConfigHash(config)},
              {"seed", config.seed},
              {"threads", runtime.threads},
              {"deterministic", runtime.deterministic},
              {"inputs", upstream},
              {"files", files},
              {"config", ToJson(config)}};
  WriteText(dir / "provenance.json", out.dump(2) + "\n");
}

void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string ReadText(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace xfdd::cli

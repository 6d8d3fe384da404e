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

// Model checkpoints: a line-oriented text manifest terminated by "end\n",
// followed by every tensor as little-endian float32 in manifest order.
//
//   xfdd-checkpoint 1
//   name ftcm
//   precision f32
//   seed 42
//   input_channels 24
//   window 500
//   classes 7
//   layers 21
//   conv1d out=32 kernel=3 stride=1 padding=1
//   ...
//   tensors 58
//   conv1d-1.weight 32x24x3
//   ...
//   payload_bytes 10731664
//   end

#ifndef XFDD_CHECKPOINT_H_
#define XFDD_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "xfdd/model.h"

namespace xfdd::nn {

inline constexpr int kCheckpointVersion = 1;

// Text manifest of `model`, including the trailing "end" line.
std::string CheckpointManifest(const Model<float>& model);

std::vector<std::uint8_t> Serialize(const Model<float>& model);

// Rebuilds the model described by the manifest. Throws FormatError on a
// version or layout mismatch (with a line diff against the manifest the
// parsed spec implies) and on truncation (naming the missing byte count).
Model<float> Deserialize(std::span<const std::uint8_t> bytes);

// Loads weights into an existing model whose manifest must match the file's
// apart from the seed line.
void DeserializeInto(std::span<const std::uint8_t> bytes, Model<float>& model);

void SaveCheckpoint(const Model<float>& model, const std::filesystem::path& path);
Model<float> LoadCheckpoint(const std::filesystem::path& path);

// Line diff used in load errors: "-" lines expected, "+" lines found.
std::string ManifestDiff(const std::string& expected, const std::string& found);

}  // namespace xfdd::nn

#endif  // XFDD_CHECKPOINT_H_

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

// Windowing, standardisation, class rebalancing and stratified splitting.

#ifndef XFDD_PREPROCESS_H_
#define XFDD_PREPROCESS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "xfdd/datagen.h"
#include "xfdd/tensor.h"

namespace xfdd::prep {

// Fixed-length multichannel windows with labels in [0, 7).
struct WindowDataset {
  data::Task task = data::Task::kFaultType;
  std::size_t channels = 0;
  std::size_t window = 0;
  std::size_t step = 0;
  std::vector<std::string> channel_names;
  std::vector<float> values;           // [N x channels x window]
  std::vector<std::uint8_t> labels;    // [N]
  std::vector<double> mean, stddev;    // standardisation stats, empty if raw
  std::uint64_t seed = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t sample_size() const { return channels * window; }
  std::span<const float> sample(std::size_t i) const {
    return {values.data() + i * sample_size(), sample_size()};
  }
  // Per-class counts over `classes` labels.
  std::vector<std::size_t> ClassCounts(std::size_t classes = 7) const;
  // Copies the selected samples into a [B x channels x window] tensor.
  template <typename T>
  Tensor<T> Batch(std::span<const std::size_t> indices) const;
  template <typename T>
  Tensor<T> All() const;
  // Same metadata, selected samples in the given order.
  WindowDataset Subset(std::span<const std::size_t> indices) const;
  void Append(const WindowDataset& other, std::size_t index);
};

// series [C x N] -> [count x C x W], window i covering [i*S, i*S + W).
Tensor<float> Window(const std::vector<std::vector<double>>& series,
                     std::size_t window, std::size_t step);

// Cuts every recording separately (windows never span two recordings).
WindowDataset WindowRecordings(const data::Dataset& ds, std::size_t window,
                               std::size_t step);

// Moving-average denoiser with odd `width`, edges use the available samples.
std::vector<double> MovingAverage(const std::vector<double>& x, std::size_t width);
void Denoise(data::Dataset& ds, std::size_t width = 5);

struct StandardizeStats {
  std::vector<double> mean, stddev;
};
inline constexpr double kStdGuard = 1e-12;

// Per-channel population mean and std over every train value.
StandardizeStats FitStandardizer(const WindowDataset& train);
// z-scores in place; channels with std < kStdGuard map to zero.
void ApplyStandardizer(WindowDataset& ds, const StandardizeStats& stats);
StandardizeStats StandardizeFitApply(WindowDataset& train,
                                     std::span<WindowDataset* const> others = {});

// Target per-class counts of each rebalancing method.
std::vector<std::size_t> RusTargets(std::span<const std::size_t> counts);
std::vector<std::size_t> SmoteTargets(std::span<const std::size_t> counts);

// Undersamples every present class to the minimum class count, then shuffles.
WindowDataset Rus(const WindowDataset& ds, std::uint64_t seed);

struct SmoteSample {
  std::size_t base = 0;      // index into the input dataset
  std::size_t neighbor = 0;  // same-class neighbour of `base`
  double lambda = 0.0;       // synthetic = base + lambda * (neighbor - base)
};

// Oversamples every present class to the maximum count. Synthetic samples
// are appended after the originals; `provenance`, when given, receives one
// entry per synthetic in order.
WindowDataset Smote(const WindowDataset& ds, std::size_t k_neighbors,
                    std::uint64_t seed,
                    std::vector<SmoteSample>* provenance = nullptr);

// w_c = N / (K * n_c).
std::vector<double> ClassWeights(std::span<const std::size_t> counts);

struct SplitResult {
  WindowDataset train, val, test;
};
// Stratified: each class gets floor(f * n_c) validation and test samples, the
// remainder goes to train.
SplitResult Split(const WindowDataset& ds, double train_frac, double val_frac,
                  double test_frac, std::uint64_t seed);

enum class Resampling { kNone, kUndersample, kSmote, kClassWeights };
Resampling ParseResampling(const std::string& name);
std::string ResamplingName(Resampling r);

struct PrepConfig {
  std::size_t window = 50;
  std::size_t step = 50;
  Resampling resampling = Resampling::kNone;
  double train_frac = 0.70, val_frac = 0.15, test_frac = 0.15;
  std::size_t smote_k = 5;
  bool denoise = false;
  std::size_t denoise_width = 5;
  std::uint64_t seed = 0;
};

struct Prepared {
  WindowDataset train, val, test;
  StandardizeStats stats;
  std::vector<double> class_weights;  // only for kClassWeights
};

// window -> split -> standardise (train statistics) -> resample train only.
Prepared Prepare(const data::Dataset& ds, const PrepConfig& config);

// Keeps `channels` in the given order.
WindowDataset SelectChannels(const WindowDataset& ds,
                             std::span<const std::size_t> channels);

// manifest.json + windows.f32 (little-endian) + labels.u8.
void SaveWindows(const WindowDataset& ds, const std::filesystem::path& dir);
WindowDataset LoadWindows(const std::filesystem::path& dir);

}  // namespace xfdd::prep

#endif  // XFDD_PREPROCESS_H_

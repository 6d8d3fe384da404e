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

// Synthetic driving telemetry with injectable sensor faults.
//
// The plant is a small invented longitudinal vehicle and engine model: a
// piecewise target-speed profile, first-order speed tracking, and algebraic
// or low-pass couplings from engine power to the air path, fuel path and
// turbocharger. It only needs to produce physically coupled, class-separable
// channels under the 24 feature names of the reference dataset.

#ifndef XFDD_DATAGEN_H_
#define XFDD_DATAGEN_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace xfdd::data {

inline constexpr std::size_t kNumChannels = 24;
inline constexpr std::size_t kNumClasses = 7;

// Feature names in dataset column order.
const std::vector<std::string>& ChannelNames();
// Index of `name` in ChannelNames(); throws InvalidArgument if unknown.
std::size_t ChannelIndex(const std::string& name);

enum class Task { kFaultType, kFaultLocation };

// {H, F1, F2, F3, F1F2, F1F3, F2F3} or {H, L1, L2, L3, L1L2, L1L3, L2L3}.
const std::vector<std::string>& ClassNames(Task task);
std::string TaskName(Task task);  // "fault_type" / "fault_location"
Task ParseTask(const std::string& name);  // accepts '_' or '-'

enum class Scenario { kHighway, kLaneChange, kCity };
Scenario ParseScenario(const std::string& name);
std::string ScenarioName(Scenario s);

struct Recording {
  std::string scenario;
  double rate_hz = 10.0;
  std::uint64_t seed = 0;
  std::vector<std::string> names;             // ChannelNames()
  std::vector<std::vector<double>> channels;  // [channel][sample]

  std::size_t length() const { return channels.empty() ? 0 : channels[0].size(); }
  double duration() const { return static_cast<double>(length()) / rate_hz; }
  const std::vector<double>& channel(const std::string& name) const;
};

// Deterministic in (scenario, duration, rate, seed). Produces
// floor(duration * rate) samples per channel.
Recording SimulateDrive(Scenario scenario, double duration_s, double rate_hz,
                        std::uint64_t seed);

enum class FaultKind { kNoise, kGain, kOffset };
std::string FaultKindName(FaultKind kind);
FaultKind ParseFaultKind(const std::string& name);

struct FaultSpec {
  FaultKind kind = FaultKind::kNoise;
  std::vector<std::string> channels;
  // Noise: target SNR in dB. Gain: multiplier. Offset: additive, channel units.
  double magnitude = 0.0;
  // Active on samples k with t_start <= k / rate < t_end (seconds).
  double t_start = 0.0;
  double t_end = 0.0;
};

// Applies one fault. Samples outside the interval and untargeted channels are
// copied bit for bit. Noise is zero-mean Gaussian rescaled so that the
// in-interval SNR, 10 log10(sum x^2 / sum n^2), equals the target.
Recording InjectFault(const Recording& rec, const FaultSpec& fault,
                      std::uint64_t seed);

// Measured in-interval SNR of `faulty` relative to `clean` on one channel.
double MeasuredSnrDb(const Recording& clean, const Recording& faulty,
                     const std::string& channel, double t_start, double t_end);

struct DatagenConfig {
  std::size_t window = 50;
  std::size_t step = 50;
  double rate_hz = 10.0;
  // Largest window count cut from one recording before starting a new one.
  std::size_t max_windows_per_recording = 100;
  // Class c receives round(budget * (1 + (imbalance - 1) * c / 6)) windows.
  double imbalance = 1.0;

  std::string type_channel = "omega_TC[rpm]";
  double noise_snr_db = 20.0;
  double gain = 1.3;
  double offset = 60000.0;

  FaultKind location_kind = FaultKind::kNoise;
  std::vector<std::string> location_channels = {
      "Pos_Throttle[%]", "a_x_Vehicle_Ref[m/s²]", "omega_TC[rpm]"};
  // Magnitude for the location task in the unit of `location_kind`.
  double location_magnitude = 20.0;
};

struct LabeledRecording {
  Recording recording;
  std::size_t label = 0;
  std::vector<FaultSpec> faults;
};

struct Dataset {
  Task task = Task::kFaultType;
  std::uint64_t seed = 0;
  std::size_t budget = 0;
  DatagenConfig config;
  std::vector<LabeledRecording> recordings;
};

// The faults that define class `label` of `task` over [0, duration).
std::vector<FaultSpec> ClassFaults(Task task, std::size_t label,
                                   const DatagenConfig& config, double duration);

// Number of windows floor((n - W) / S) + 1, or 0 when n < W.
std::size_t WindowCount(std::size_t n, std::size_t window, std::size_t step);

// Emits recordings for all 7 classes whose window counts add up to the
// per-class targets. Recording i uses seed root + i and cycles through the
// three scenarios.
Dataset GenerateDataset(Task task, std::size_t budget, const DatagenConfig& config,
                        std::uint64_t seed);

// Per-class window counts of `ds` under its own W and S.
std::vector<std::size_t> ClassWindowCounts(const Dataset& ds);

// One CSV per recording: header of the 24 names plus "label", values with 10
// significant digits, LF endings. Names containing a comma are quoted.
void SaveCsv(const Recording& rec, const std::string& label,
             const std::filesystem::path& path);
// Returns the recording and the label text of its first row. Rejects any
// header that differs from the expected names, naming the column.
std::pair<Recording, std::string> LoadCsv(const std::filesystem::path& path,
                                          double rate_hz = 10.0);

// Writes rec_NNNNN.csv files plus manifest.json (task, seeds, class counts,
// fault parameters).
void SaveDataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset LoadDataset(const std::filesystem::path& dir);

}  // namespace xfdd::data

#endif  // XFDD_DATAGEN_H_

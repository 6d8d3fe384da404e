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

#include "xfdd/datagen.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "xfdd/error.h"

namespace xfdd::data {
namespace {

using json = nlohmann::json;

const std::vector<std::string> kChannels = {
    "a_x_Vehicle_Ref[m/s²]",
    "v_Vehicle[km/h]",
    "v_Vehicle_Ref[km/h]",
    "FuelTank[0,1]",
    "P_Engine[kW]",
    "Pos_Throttle[%]",
    "T_Out_Comp[°C]",
    "T_Out_InterCooler[°C]",
    "T_Rail[°C]",
    "Trq_MeanInd_Engine_Mod[Nm]",
    "lambda",
    "lambda_bCat[]",
    "mdot_Out_EGR[kg/h]",
    "mdot_Out_EGR_Air[kg/h]",
    "mdot_Out_Throttle[kg/h]",
    "mdot_Turb[kg/h]",
    "omega_TC[rpm]",
    "p_InMan[Pa]",
    "p_In_Throttle[Pa]",
    "p_Out_Throttle[Pa]",
    "q_Mean_Inj[mg/cycle]",
    "q_Mean_Inj_Alt[mm³/cycle]",
    "q_PresCtrlValve[mm³/s]",
    "q_RailLeak[mm³/s]",
};

enum Ch : std::size_t {
  kAccRef, kSpeed, kSpeedRef, kFuelTank, kPower, kThrottle, kTComp, kTCooler,
  kTRail, kTorque, kLambda, kLambdaCat, kEgr, kEgrAir, kMdotThrottle, kMdotTurb,
  kTurbo, kPInMan, kPInThrottle, kPOutThrottle, kInj, kInjAlt, kPresCtrl, kLeak,
};

const std::vector<std::string> kTypeClasses = {"H",    "F1",   "F2",  "F3",
                                               "F1F2", "F1F3", "F2F3"};
const std::vector<std::string> kLocationClasses = {"H",    "L1",   "L2",  "L3",
                                                   "L1L2", "L1L3", "L2L3"};

// Members of each concurrent class, as indices 1..3 of the single faults.
const std::vector<std::vector<int>> kClassMembers = {{}, {1}, {2}, {3},
                                                     {1, 2}, {1, 3}, {2, 3}};

std::string Lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  std::replace(s.begin(), s.end(), '-', '_');
  return s;
}

// First-order low-pass step with time constant tau.
double Lag(double prev, double target, double dt, double tau) {
  return prev + (target - prev) * (1.0 - std::exp(-dt / tau));
}

struct Profile {
  double lo, hi;          // target speed range, km/h
  double seg_lo, seg_hi;  // segment duration range, s
  bool stops = false;     // alternate with standstill segments
  bool maneuvers = false;
};

Profile ProfileFor(Scenario s) {
  switch (s) {
    case Scenario::kHighway: return {90, 130, 20, 60, false, false};
    case Scenario::kLaneChange: return {70, 110, 15, 40, false, true};
    case Scenario::kCity: return {20, 50, 10, 30, true, false};
  }
  return {};
}

}  // namespace

const std::vector<std::string>& ChannelNames() { return kChannels; }

std::size_t ChannelIndex(const std::string& name) {
  auto it = std::find(kChannels.begin(), kChannels.end(), name);
  if (it == kChannels.end()) throw InvalidArgument("unknown channel '" + name + "'");
  return static_cast<std::size_t>(it - kChannels.begin());
}

const std::vector<std::string>& ClassNames(Task task) {
  return task == Task::kFaultType ? kTypeClasses : kLocationClasses;
}

std::string TaskName(Task task) {
  return task == Task::kFaultType ? "fault_type" : "fault_location";
}

Task ParseTask(const std::string& name) {
  const std::string n = Lower(name);
  if (n == "fault_type") return Task::kFaultType;
  if (n == "fault_location") return Task::kFaultLocation;
  throw InvalidArgument("unknown task '" + name +
                        "' (expected fault_type or fault_location)");
}

Scenario ParseScenario(const std::string& name) {
  const std::string n = Lower(name);
  if (n == "highway") return Scenario::kHighway;
  if (n == "lane_change") return Scenario::kLaneChange;
  if (n == "city") return Scenario::kCity;
  throw InvalidArgument("unknown scenario '" + name +
                        "' (expected highway, lane_change or city)");
}

std::string ScenarioName(Scenario s) {
  switch (s) {
    case Scenario::kHighway: return "highway";
    case Scenario::kLaneChange: return "lane_change";
    case Scenario::kCity: return "city";
  }
  return "?";
}

const std::vector<double>& Recording::channel(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw InvalidArgument("recording lacks channel '" + name + "'");
  return channels[static_cast<std::size_t>(it - names.begin())];
}

Recording SimulateDrive(Scenario scenario, double duration_s, double rate_hz,
                        std::uint64_t seed) {
  if (!(duration_s >= 0.0)) throw InvalidArgument("duration must be >= 0");
  if (!(rate_hz > 0.0)) throw InvalidArgument("sample rate must be > 0");
  Recording rec;
  rec.scenario = ScenarioName(scenario);
  rec.rate_hz = rate_hz;
  rec.seed = seed;
  rec.names = kChannels;
  const auto n = static_cast<std::size_t>(std::floor(duration_s * rate_hz + 1e-9));
  rec.channels.assign(kNumChannels, std::vector<double>(n));
  if (n == 0) return rec;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  auto uniform = [&](double a, double b) {
    return std::uniform_real_distribution<double>(a, b)(rng);
  };
  const Profile prof = ProfileFor(scenario);
  const double dt = 1.0 / rate_hz;

  // Piecewise target speed with smooth transitions.
  std::vector<double> target(n);
  {
    double level = uniform(prof.lo, prof.hi);
    double seg_end = uniform(prof.seg_lo, prof.seg_hi);
    bool stopped = false;
    double smooth = level;
    for (std::size_t k = 0; k < n; ++k) {
      const double t = static_cast<double>(k) * dt;
      if (t >= seg_end) {
        if (prof.stops) stopped = !stopped;
        level = stopped ? 0.0 : uniform(prof.lo, prof.hi);
        seg_end = t + (stopped ? uniform(5, 15) : uniform(prof.seg_lo, prof.seg_hi));
      }
      smooth = Lag(smooth, level, dt, 4.0);
      target[k] = smooth;
    }
  }

  auto& ch = rec.channels;
  double v = target[0] + gauss(rng) * 2.0;
  v = std::max(v, 0.0);
  double next_maneuver = uniform(5, 15), maneuver_start = -1e9;
  const double fuel0 = uniform(0.4, 0.95);
  double fuel_used_kg = 0.0;
  double turbo = 0.0, p_man = 0.0, t_comp = 0.0, t_rail = 0.0, lam_cat = 1.0;
  double acc_slow = 0.0;

  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * dt;
    // Driver: proportional speed tracking plus jitter.
    double acc = std::clamp(0.5 * (target[k] - v) / 3.6, -3.0, 2.0) +
                 0.02 * gauss(rng);
    if (prof.maneuvers) {
      if (t >= next_maneuver) {
        maneuver_start = t;
        next_maneuver = t + uniform(5, 15);
      }
      const double phase = (t - maneuver_start) / 3.0;
      if (phase >= 0.0 && phase < 1.0) acc += 0.8 * std::sin(2 * std::numbers::pi * phase);
    }
    // The realised acceleration never drives the speed negative.
    if (v + 3.6 * acc * dt < 0.0) acc = -v / (3.6 * dt);

    const double vm = v / 3.6;
    const double force = 1500.0 * acc + 0.5 * 1.2 * 0.65 * vm * vm +
                         (vm > 0.05 ? 1500.0 * 9.81 * 0.012 : 0.0);
    const double power = std::max(force * vm / 1000.0 / 0.9, 0.0) + 3.0;
    const double rpm = 850.0 + 28.0 * v;
    const double throttle =
        std::clamp(5.0 + 95.0 * power / 90.0 + 0.3 * gauss(rng), 0.0, 100.0);
    const double torque = power * 1000.0 / (rpm * 2.0 * std::numbers::pi / 60.0) + 15.0;
    const double inj = 2.0 + 0.12 * torque;
    const double inj_alt = inj / 0.832;
    const double turbo_target = std::clamp(40000.0 + 1000.0 * power, 40000.0, 150000.0);
    turbo = k == 0 ? turbo_target : Lag(turbo, turbo_target, dt, 0.5);
    const double p_in = 101325.0 + 1.5 * (turbo - 40000.0);
    const double p_out = p_in * (0.25 + 0.75 * throttle / 100.0);
    p_man = k == 0 ? p_out : Lag(p_man, p_out, dt, 0.3);
    const double mdot_thr = 0.0009 * rpm * p_man / 1000.0;
    const double fuel_kgh = inj * rpm * 1.2e-4;
    const double egr_air = 0.12 * mdot_thr * (1.0 - throttle / 100.0);
    const double comp_target = 25.0 + 40.0 * (p_in / 101325.0 - 1.0);
    t_comp = k == 0 ? comp_target : Lag(t_comp, comp_target, dt, 3.0);
    const double rail_target = 35.0 + 0.15 * power;
    t_rail = k == 0 ? rail_target : Lag(t_rail, rail_target, dt, 20.0);
    acc_slow = Lag(acc_slow, acc, dt, 1.5);
    const double lam = 1.0 - 0.04 * std::tanh(2.0 * (acc - acc_slow)) + 0.003 * gauss(rng);
    lam_cat = k == 0 ? lam : Lag(lam_cat, lam, dt, 2.0);
    const double pres_ctrl = 200.0 + 0.5 * inj_alt * rpm / 30.0;
    fuel_used_kg += fuel_kgh * dt / 3600.0;

    ch[kAccRef][k] = acc;
    ch[kSpeed][k] = v;
    ch[kSpeedRef][k] = target[k];
    ch[kFuelTank][k] = std::max(fuel0 - fuel_used_kg / 45.0, 0.0);
    ch[kPower][k] = power + 0.2 * gauss(rng);
    ch[kThrottle][k] = throttle;
    ch[kTComp][k] = t_comp + 0.1 * gauss(rng);
    ch[kTCooler][k] = 25.0 + 0.35 * (t_comp - 25.0) + 0.05 * gauss(rng);
    ch[kTRail][k] = t_rail + 0.05 * gauss(rng);
    ch[kTorque][k] = torque + 0.5 * gauss(rng);
    ch[kLambda][k] = lam;
    ch[kLambdaCat][k] = lam_cat;
    ch[kEgr][k] = egr_air + 0.1 * fuel_kgh + 0.05 * gauss(rng);
    ch[kEgrAir][k] = egr_air;
    ch[kMdotThrottle][k] = mdot_thr + 0.2 * gauss(rng);
    ch[kMdotTurb][k] = mdot_thr + fuel_kgh + 0.2 * gauss(rng);
    ch[kTurbo][k] = turbo + 150.0 * gauss(rng);
    ch[kPInMan][k] = p_man + 100.0 * gauss(rng);
    ch[kPInThrottle][k] = p_in + 100.0 * gauss(rng);
    ch[kPOutThrottle][k] = p_out + 100.0 * gauss(rng);
    ch[kInj][k] = inj + 0.05 * gauss(rng);
    ch[kInjAlt][k] = inj_alt + 0.05 * gauss(rng);
    ch[kPresCtrl][k] = pres_ctrl + 2.0 * gauss(rng);
    ch[kLeak][k] = 10.0 + 0.08 * t_rail + 0.002 * pres_ctrl + 0.02 * gauss(rng);

    v += 3.6 * acc * dt;
  }
  return rec;
}

std::string FaultKindName(FaultKind kind) {
  switch (kind) {
    case FaultKind::kNoise: return "noise";
    case FaultKind::kGain: return "gain";
    case FaultKind::kOffset: return "offset";
  }
  return "?";
}

FaultKind ParseFaultKind(const std::string& name) {
  const std::string n = Lower(name);
  if (n == "noise") return FaultKind::kNoise;
  if (n == "gain") return FaultKind::kGain;
  if (n == "offset") return FaultKind::kOffset;
  throw InvalidArgument("unknown fault kind '" + name + "'");
}

namespace {

std::pair<std::size_t, std::size_t> SampleRange(const Recording& rec,
                                                const FaultSpec& f) {
  const double dur = rec.duration();
  if (f.t_start < 0.0 || f.t_end < f.t_start || f.t_end > dur + 1e-9) {
    std::ostringstream msg;
    msg << "fault interval [" << f.t_start << ", " << f.t_end
        << ") lies outside the recording [0, " << dur << ")";
    throw InvalidArgument(msg.str());
  }
  auto first = static_cast<std::size_t>(std::ceil(f.t_start * rec.rate_hz - 1e-9));
  auto last = static_cast<std::size_t>(std::ceil(f.t_end * rec.rate_hz - 1e-9));
  return {std::min(first, rec.length()), std::min(last, rec.length())};
}

}  // namespace

Recording InjectFault(const Recording& rec, const FaultSpec& fault,
                      std::uint64_t seed) {
  std::vector<std::size_t> targets;
  for (const auto& name : fault.channels) {
    auto it = std::find(rec.names.begin(), rec.names.end(), name);
    if (it == rec.names.end()) {
      throw InvalidArgument("fault targets unknown channel '" + name + "'");
    }
    targets.push_back(static_cast<std::size_t>(it - rec.names.begin()));
  }
  const auto [begin, end] = SampleRange(rec, fault);
  Recording out = rec;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  for (std::size_t c : targets) {
    auto& x = out.channels[c];
    switch (fault.kind) {
      case FaultKind::kGain:
        for (std::size_t k = begin; k < end; ++k) x[k] *= fault.magnitude;
        break;
      case FaultKind::kOffset:
        for (std::size_t k = begin; k < end; ++k) x[k] += fault.magnitude;
        break;
      case FaultKind::kNoise: {
        if (end == begin) break;
        std::vector<double> noise(end - begin);
        double noise_power = 0.0, signal_power = 0.0;
        for (std::size_t k = begin; k < end; ++k) {
          const double e = gauss(rng);
          noise[k - begin] = e;
          noise_power += e * e;
          signal_power += x[k] * x[k];
        }
        if (signal_power == 0.0 || noise_power == 0.0) break;
        const double want = signal_power / std::pow(10.0, fault.magnitude / 10.0);
        const double scale = std::sqrt(want / noise_power);
        for (std::size_t k = begin; k < end; ++k) x[k] += scale * noise[k - begin];
        break;
      }
    }
  }
  return out;
}

double MeasuredSnrDb(const Recording& clean, const Recording& faulty,
                     const std::string& channel, double t_start, double t_end) {
  FaultSpec probe;
  probe.t_start = t_start;
  probe.t_end = t_end;
  const auto [begin, end] = SampleRange(clean, probe);
  const auto& x = clean.channel(channel);
  const auto& y = faulty.channel(channel);
  double s = 0.0, e = 0.0;
  for (std::size_t k = begin; k < end; ++k) {
    s += x[k] * x[k];
    e += (y[k] - x[k]) * (y[k] - x[k]);
  }
  return 10.0 * std::log10(s / e);
}

std::vector<FaultSpec> ClassFaults(Task task, std::size_t label,
                                   const DatagenConfig& config, double duration) {
  if (label >= kNumClasses) throw InvalidArgument("class label out of range");
  std::vector<FaultSpec> faults;
  for (int member : kClassMembers[label]) {
    FaultSpec f;
    f.t_start = 0.0;
    f.t_end = duration;
    if (task == Task::kFaultType) {
      f.channels = {config.type_channel};
      switch (member) {
        case 1: f.kind = FaultKind::kNoise; f.magnitude = config.noise_snr_db; break;
        case 2: f.kind = FaultKind::kGain; f.magnitude = config.gain; break;
        case 3: f.kind = FaultKind::kOffset; f.magnitude = config.offset; break;
      }
    } else {
      f.kind = config.location_kind;
      f.magnitude = config.location_magnitude;
      f.channels = {config.location_channels.at(static_cast<std::size_t>(member - 1))};
    }
    faults.push_back(std::move(f));
  }
  return faults;
}

std::size_t WindowCount(std::size_t n, std::size_t window, std::size_t step) {
  if (step == 0 || window == 0) throw InvalidArgument("window and step must be positive");
  return n < window ? 0 : (n - window) / step + 1;
}

Dataset GenerateDataset(Task task, std::size_t budget, const DatagenConfig& config,
                        std::uint64_t seed) {
  if (budget == 0) throw InvalidArgument("per-class window budget must be > 0");
  if (config.window == 0 || config.step == 0 || config.max_windows_per_recording == 0) {
    throw InvalidArgument("window, step and windows per recording must be positive");
  }
  if (!(config.imbalance > 0.0)) throw InvalidArgument("imbalance must be > 0");
  Dataset ds;
  ds.task = task;
  ds.seed = seed;
  ds.budget = budget;
  ds.config = config;
  std::uint64_t index = 0;
  const Scenario scenarios[] = {Scenario::kHighway, Scenario::kLaneChange,
                                Scenario::kCity};
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const double scale = 1.0 + (config.imbalance - 1.0) * static_cast<double>(c) /
                                   static_cast<double>(kNumClasses - 1);
    auto remaining = static_cast<std::size_t>(
        std::llround(static_cast<double>(budget) * scale));
    remaining = std::max<std::size_t>(remaining, 1);
    while (remaining > 0) {
      const std::size_t windows = std::min(remaining, config.max_windows_per_recording);
      const std::size_t samples = config.window + (windows - 1) * config.step;
      const double duration = static_cast<double>(samples) / config.rate_hz;
      const std::uint64_t rec_seed = seed + index;
      LabeledRecording lr;
      lr.label = c;
      lr.recording = SimulateDrive(scenarios[index % 3], duration, config.rate_hz,
                                   rec_seed);
      lr.faults = ClassFaults(task, c, config, lr.recording.duration());
      for (std::size_t f = 0; f < lr.faults.size(); ++f) {
        // Distinct stream per fault, derived from the recording seed.
        lr.recording = InjectFault(lr.recording, lr.faults[f],
                                   rec_seed * 0x9E3779B97F4A7C15ULL + f + 1);
      }
      ds.recordings.push_back(std::move(lr));
      remaining -= windows;
      ++index;
    }
  }
  return ds;
}

std::vector<std::size_t> ClassWindowCounts(const Dataset& ds) {
  std::vector<std::size_t> counts(kNumClasses, 0);
  for (const auto& r : ds.recordings) {
    counts.at(r.label) +=
        WindowCount(r.recording.length(), ds.config.window, ds.config.step);
  }
  return counts;
}

namespace {

std::string CsvField(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

}  // namespace

void SaveCsv(const Recording& rec, const std::string& label,
             const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& name : rec.names) out << CsvField(name) << ',';
  out << "label\n";
  char buf[32];
  for (std::size_t k = 0; k < rec.length(); ++k) {
    for (const auto& channel : rec.channels) {
      std::snprintf(buf, sizeof buf, "%.10g", channel[k]);
      out << buf << ',';
    }
    out << CsvField(label) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::pair<Recording, std::string> LoadCsv(const std::filesystem::path& path,
                                          double rate_hz) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");
  const auto header = SplitCsvLine(line);
  if (header.size() != kNumChannels + 1) {
    throw FormatError(path.string() + ": expected " +
                      std::to_string(kNumChannels + 1) + " columns, found " +
                      std::to_string(header.size()));
  }
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    if (header[c] != kChannels[c]) {
      throw FormatError(path.string() + ": unknown column '" + header[c] +
                        "' at position " + std::to_string(c + 1) + " (expected '" +
                        kChannels[c] + "')");
    }
  }
  if (header.back() != "label") {
    throw FormatError(path.string() + ": unknown column '" + header.back() +
                      "' (expected 'label')");
  }
  Recording rec;
  rec.rate_hz = rate_hz;
  rec.names = kChannels;
  rec.channels.assign(kNumChannels, {});
  std::string label;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto fields = SplitCsvLine(line);
    if (fields.size() != kNumChannels + 1) {
      throw FormatError(path.string() + ": row " + std::to_string(row) + " has " +
                        std::to_string(fields.size()) + " fields");
    }
    for (std::size_t c = 0; c < kNumChannels; ++c) {
      char* end = nullptr;
      const double v = std::strtod(fields[c].c_str(), &end);
      if (end == fields[c].c_str() || *end != '\0') {
        throw FormatError(path.string() + ": row " + std::to_string(row) +
                          " column '" + kChannels[c] + "' is not a number");
      }
      rec.channels[c].push_back(v);
    }
    if (label.empty()) label = fields.back();
  }
  return {std::move(rec), label};
}

namespace {

json FaultJson(const FaultSpec& f) {
  return {{"kind", FaultKindName(f.kind)},
          {"channels", f.channels},
          {"magnitude", f.magnitude},
          {"t_start", f.t_start},
          {"t_end", f.t_end}};
}

FaultSpec FaultFromJson(const json& j) {
  FaultSpec f;
  f.kind = ParseFaultKind(j.at("kind").get<std::string>());
  f.channels = j.at("channels").get<std::vector<std::string>>();
  f.magnitude = j.at("magnitude").get<double>();
  f.t_start = j.at("t_start").get<double>();
  f.t_end = j.at("t_end").get<double>();
  return f;
}

json ConfigJson(const DatagenConfig& c) {
  return {{"window", c.window},
          {"step", c.step},
          {"rate_hz", c.rate_hz},
          {"max_windows_per_recording", c.max_windows_per_recording},
          {"imbalance", c.imbalance},
          {"type_channel", c.type_channel},
          {"noise_snr_db", c.noise_snr_db},
          {"gain", c.gain},
          {"offset", c.offset},
          {"location_kind", FaultKindName(c.location_kind)},
          {"location_channels", c.location_channels},
          {"location_magnitude", c.location_magnitude}};
}

DatagenConfig ConfigFromJson(const json& j) {
  DatagenConfig c;
  c.window = j.at("window").get<std::size_t>();
  c.step = j.at("step").get<std::size_t>();
  c.rate_hz = j.at("rate_hz").get<double>();
  c.max_windows_per_recording = j.at("max_windows_per_recording").get<std::size_t>();
  c.imbalance = j.at("imbalance").get<double>();
  c.type_channel = j.at("type_channel").get<std::string>();
  c.noise_snr_db = j.at("noise_snr_db").get<double>();
  c.gain = j.at("gain").get<double>();
  c.offset = j.at("offset").get<double>();
  c.location_kind = ParseFaultKind(j.at("location_kind").get<std::string>());
  c.location_channels = j.at("location_channels").get<std::vector<std::string>>();
  c.location_magnitude = j.at("location_magnitude").get<double>();
  return c;
}

std::string RecordingFile(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "rec_%05zu.csv", i);
  return buf;
}

}  // namespace

void SaveDataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const auto& classes = ClassNames(ds.task);
  json recs = json::array();
  for (std::size_t i = 0; i < ds.recordings.size(); ++i) {
    const auto& r = ds.recordings[i];
    SaveCsv(r.recording, classes[r.label], dir / RecordingFile(i));
    json faults = json::array();
    for (const auto& f : r.faults) faults.push_back(FaultJson(f));
    recs.push_back({{"file", RecordingFile(i)},
                    {"label", classes[r.label]},
                    {"scenario", r.recording.scenario},
                    {"seed", r.recording.seed},
                    {"samples", r.recording.length()},
                    {"faults", faults}});
  }
  const auto counts = ClassWindowCounts(ds);
  json class_counts = json::object();
  for (std::size_t c = 0; c < kNumClasses; ++c) class_counts[classes[c]] = counts[c];
  json manifest = {{"schema_version", 1},
                   {"kind", "xfdd-dataset"},
                   {"task", TaskName(ds.task)},
                   {"root_seed", ds.seed},
                   {"seed_rule", "recording i uses root_seed + i"},
                   {"budget_per_class", ds.budget},
                   {"config", ConfigJson(ds.config)},
                   {"class_window_counts", class_counts},
                   {"recordings", recs}};
  std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

Dataset LoadDataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json", std::ios::binary);
  if (!in) throw IoError("cannot open " + (dir / "manifest.json").string());
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("dataset manifest: " + std::string(e.what()));
  }
  Dataset ds;
  try {
    ds.task = ParseTask(m.at("task").get<std::string>());
    ds.seed = m.at("root_seed").get<std::uint64_t>();
    ds.budget = m.at("budget_per_class").get<std::size_t>();
    ds.config = ConfigFromJson(m.at("config"));
    const auto& classes = ClassNames(ds.task);
    for (const auto& r : m.at("recordings")) {
      auto [rec, label] = LoadCsv(dir / r.at("file").get<std::string>(),
                                  ds.config.rate_hz);
      auto it = std::find(classes.begin(), classes.end(), label);
      if (it == classes.end()) {
        throw FormatError("unknown class label '" + label + "' in " +
                          r.at("file").get<std::string>());
      }
      rec.scenario = r.at("scenario").get<std::string>();
      rec.seed = r.at("seed").get<std::uint64_t>();
      LabeledRecording lr;
      lr.recording = std::move(rec);
      lr.label = static_cast<std::size_t>(it - classes.begin());
      for (const auto& f : r.at("faults")) lr.faults.push_back(FaultFromJson(f));
      ds.recordings.push_back(std::move(lr));
    }
  } catch (const json::exception& e) {
    throw FormatError("dataset manifest: " + std::string(e.what()));
  }
  return ds;
}

}  // namespace xfdd::data

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

#include "xfdd/preprocess.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "xfdd/error.h"

namespace xfdd::prep {
namespace {

using json = nlohmann::json;

std::string Lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  std::replace(s.begin(), s.end(), '-', '_');
  return s;
}

WindowDataset EmptyLike(const WindowDataset& ds) {
  WindowDataset out;
  out.task = ds.task;
  out.channels = ds.channels;
  out.window = ds.window;
  out.step = ds.step;
  out.channel_names = ds.channel_names;
  out.mean = ds.mean;
  out.stddev = ds.stddev;
  out.seed = ds.seed;
  return out;
}

std::vector<std::vector<std::size_t>> IndicesByClass(const WindowDataset& ds,
                                                     std::size_t classes) {
  std::vector<std::vector<std::size_t>> by(classes);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.labels[i] >= classes) {
      throw InvalidArgument("label " + std::to_string(ds.labels[i]) +
                            " outside [0, " + std::to_string(classes) + ")");
    }
    by[ds.labels[i]].push_back(i);
  }
  return by;
}

std::string ClassLabel(const WindowDataset& ds, std::size_t c) {
  const auto& names = data::ClassNames(ds.task);
  return c < names.size() ? names[c] + " (" + std::to_string(c) + ")"
                          : std::to_string(c);
}

}  // namespace

std::vector<std::size_t> WindowDataset::ClassCounts(std::size_t classes) const {
  std::vector<std::size_t> counts(classes, 0);
  for (auto l : labels) {
    if (l >= classes) throw InvalidArgument("label outside class range");
    ++counts[l];
  }
  return counts;
}

template <typename T>
Tensor<T> WindowDataset::Batch(std::span<const std::size_t> indices) const {
  Tensor<T> out({indices.size(), channels, window});
  const std::size_t n = sample_size();
  for (std::size_t b = 0; b < indices.size(); ++b) {
    if (indices[b] >= size()) throw InvalidArgument("sample index out of range");
    const float* src = values.data() + indices[b] * n;
    std::copy(src, src + n, out.raw() + b * n);
  }
  return out;
}

template <typename T>
Tensor<T> WindowDataset::All() const {
  std::vector<std::size_t> idx(size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return Batch<T>(idx);
}

template Tensor<float> WindowDataset::Batch<float>(std::span<const std::size_t>) const;
template Tensor<double> WindowDataset::Batch<double>(std::span<const std::size_t>) const;
template Tensor<float> WindowDataset::All<float>() const;
template Tensor<double> WindowDataset::All<double>() const;

WindowDataset WindowDataset::Subset(std::span<const std::size_t> indices) const {
  WindowDataset out = EmptyLike(*this);
  out.values.reserve(indices.size() * sample_size());
  out.labels.reserve(indices.size());
  for (auto i : indices) out.Append(*this, i);
  return out;
}

void WindowDataset::Append(const WindowDataset& other, std::size_t index) {
  auto s = other.sample(index);
  values.insert(values.end(), s.begin(), s.end());
  labels.push_back(other.labels[index]);
}

Tensor<float> Window(const std::vector<std::vector<double>>& series,
                     std::size_t window, std::size_t step) {
  if (window == 0 || step == 0) throw InvalidArgument("window and step must be >= 1");
  const std::size_t c = series.size();
  const std::size_t n = c == 0 ? 0 : series[0].size();
  for (const auto& s : series) {
    if (s.size() != n) throw ShapeError("channels of unequal length");
  }
  if (n < window) {
    throw InvalidArgument("series length " + std::to_string(n) +
                          " is shorter than the window " + std::to_string(window));
  }
  const std::size_t count = (n - window) / step + 1;
  Tensor<float> out({count, c, window});
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      float* dst = out.raw() + (i * c + ch) * window;
      const double* src = series[ch].data() + i * step;
      for (std::size_t t = 0; t < window; ++t) dst[t] = static_cast<float>(src[t]);
    }
  }
  return out;
}

WindowDataset WindowRecordings(const data::Dataset& ds, std::size_t window,
                               std::size_t step) {
  WindowDataset out;
  out.task = ds.task;
  out.channels = data::kNumChannels;
  out.window = window;
  out.step = step;
  out.channel_names = data::ChannelNames();
  out.seed = ds.seed;
  for (const auto& r : ds.recordings) {
    if (r.recording.length() < window) continue;
    Tensor<float> w = Window(r.recording.channels, window, step);
    out.values.insert(out.values.end(), w.vec().begin(), w.vec().end());
    out.labels.insert(out.labels.end(), w.dim(0), static_cast<std::uint8_t>(r.label));
  }
  return out;
}

std::vector<double> MovingAverage(const std::vector<double>& x, std::size_t width) {
  if (width == 0 || width % 2 == 0) {
    throw InvalidArgument("moving-average width must be odd and positive");
  }
  const std::size_t half = width / 2;
  std::vector<double> out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const std::size_t lo = k >= half ? k - half : 0;
    const std::size_t hi = std::min(x.size(), k + half + 1);
    double s = 0.0;
    for (std::size_t j = lo; j < hi; ++j) s += x[j];
    out[k] = s / static_cast<double>(hi - lo);
  }
  return out;
}

void Denoise(data::Dataset& ds, std::size_t width) {
  for (auto& r : ds.recordings) {
    for (auto& c : r.recording.channels) c = MovingAverage(c, width);
  }
}

StandardizeStats FitStandardizer(const WindowDataset& train) {
  if (train.size() == 0) throw InvalidArgument("cannot standardise: empty train set");
  const std::size_t c = train.channels, w = train.window;
  StandardizeStats st{std::vector<double>(c, 0.0), std::vector<double>(c, 0.0)};
  const double count = static_cast<double>(train.size() * w);
  for (std::size_t i = 0; i < train.size(); ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const float* p = train.values.data() + (i * c + ch) * w;
      for (std::size_t t = 0; t < w; ++t) st.mean[ch] += p[t];
    }
  }
  for (auto& m : st.mean) m /= count;
  for (std::size_t i = 0; i < train.size(); ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const float* p = train.values.data() + (i * c + ch) * w;
      for (std::size_t t = 0; t < w; ++t) {
        const double d = p[t] - st.mean[ch];
        st.stddev[ch] += d * d;
      }
    }
  }
  for (auto& s : st.stddev) s = std::sqrt(s / count);
  return st;
}

void ApplyStandardizer(WindowDataset& ds, const StandardizeStats& stats) {
  if (stats.mean.size() != ds.channels || stats.stddev.size() != ds.channels) {
    throw ShapeError("standardiser has " + std::to_string(stats.mean.size()) +
                     " channels, dataset has " + std::to_string(ds.channels));
  }
  const std::size_t c = ds.channels, w = ds.window;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      float* p = ds.values.data() + (i * c + ch) * w;
      const double sd = stats.stddev[ch];
      for (std::size_t t = 0; t < w; ++t) {
        p[t] = sd < kStdGuard ? 0.0f
                              : static_cast<float>((p[t] - stats.mean[ch]) / sd);
      }
    }
  }
  ds.mean = stats.mean;
  ds.stddev = stats.stddev;
}

StandardizeStats StandardizeFitApply(WindowDataset& train,
                                     std::span<WindowDataset* const> others) {
  StandardizeStats st = FitStandardizer(train);
  ApplyStandardizer(train, st);
  for (auto* o : others) ApplyStandardizer(*o, st);
  return st;
}

std::vector<std::size_t> RusTargets(std::span<const std::size_t> counts) {
  std::size_t lo = SIZE_MAX, present = 0;
  for (auto n : counts) {
    if (n > 0) {
      lo = std::min(lo, n);
      ++present;
    }
  }
  if (present < 2) throw InvalidArgument("undersampling needs at least two classes");
  std::vector<std::size_t> out(counts.size());
  for (std::size_t c = 0; c < counts.size(); ++c) out[c] = counts[c] > 0 ? lo : 0;
  return out;
}

std::vector<std::size_t> SmoteTargets(std::span<const std::size_t> counts) {
  std::size_t hi = 0;
  for (auto n : counts) hi = std::max(hi, n);
  if (hi == 0) throw InvalidArgument("oversampling an empty dataset");
  std::vector<std::size_t> out(counts.size());
  for (std::size_t c = 0; c < counts.size(); ++c) out[c] = counts[c] > 0 ? hi : 0;
  return out;
}

WindowDataset Rus(const WindowDataset& ds, std::uint64_t seed) {
  auto by = IndicesByClass(ds, 7);
  std::vector<std::size_t> counts(7);
  for (std::size_t c = 0; c < 7; ++c) counts[c] = by[c].size();
  const auto targets = RusTargets(counts);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < 7; ++c) {
    std::shuffle(by[c].begin(), by[c].end(), rng);
    keep.insert(keep.end(), by[c].begin(), by[c].begin() + static_cast<long>(targets[c]));
  }
  std::shuffle(keep.begin(), keep.end(), rng);
  return ds.Subset(keep);
}

WindowDataset Smote(const WindowDataset& ds, std::size_t k_neighbors,
                    std::uint64_t seed, std::vector<SmoteSample>* provenance) {
  if (k_neighbors == 0) throw InvalidArgument("SMOTE needs k_neighbors >= 1");
  auto by = IndicesByClass(ds, 7);
  std::vector<std::size_t> counts(7);
  for (std::size_t c = 0; c < 7; ++c) counts[c] = by[c].size();
  const auto targets = SmoteTargets(counts);
  for (std::size_t c = 0; c < 7; ++c) {
    if (counts[c] > 0 && counts[c] < targets[c] && counts[c] <= k_neighbors) {
      throw InvalidArgument("SMOTE: class " + ClassLabel(ds, c) + " has " +
                            std::to_string(counts[c]) + " samples, needs more than " +
                            std::to_string(k_neighbors) + " neighbours");
    }
  }
  WindowDataset out = ds;
  if (provenance) provenance->clear();
  std::mt19937_64 rng(seed);
  const std::size_t d = ds.sample_size();
  std::vector<float> synth(d);
  for (std::size_t c = 0; c < 7; ++c) {
    if (counts[c] == 0 || counts[c] >= targets[c]) continue;
    const auto& members = by[c];
    std::vector<std::vector<std::size_t>> knn(members.size());
    std::uniform_int_distribution<std::size_t> pick_base(0, members.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_nn(0, k_neighbors - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t s = counts[c]; s < targets[c]; ++s) {
      const std::size_t b = pick_base(rng);
      if (knn[b].empty()) {
        auto xb = ds.sample(members[b]);
        std::vector<std::pair<double, std::size_t>> dist;
        dist.reserve(members.size() - 1);
        for (std::size_t j = 0; j < members.size(); ++j) {
          if (j == b) continue;
          auto xj = ds.sample(members[j]);
          double acc = 0.0;
          for (std::size_t e = 0; e < d; ++e) {
            const double diff = static_cast<double>(xb[e]) - xj[e];
            acc += diff * diff;
          }
          dist.emplace_back(acc, j);
        }
        std::partial_sort(dist.begin(), dist.begin() + static_cast<long>(k_neighbors),
                          dist.end());
        for (std::size_t q = 0; q < k_neighbors; ++q) knn[b].push_back(dist[q].second);
      }
      const std::size_t nn = knn[b][pick_nn(rng)];
      const double lambda = unit(rng);
      auto xb = ds.sample(members[b]);
      auto xn = ds.sample(members[nn]);
      for (std::size_t e = 0; e < d; ++e) {
        synth[e] = static_cast<float>(xb[e] + lambda * (static_cast<double>(xn[e]) - xb[e]));
      }
      out.values.insert(out.values.end(), synth.begin(), synth.end());
      out.labels.push_back(static_cast<std::uint8_t>(c));
      if (provenance) provenance->push_back({members[b], members[nn], lambda});
    }
  }
  return out;
}

std::vector<double> ClassWeights(std::span<const std::size_t> counts) {
  if (counts.empty()) throw InvalidArgument("class weights of no classes");
  std::size_t total = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) {
      throw InvalidArgument("class " + std::to_string(c) + " has zero samples");
    }
    total += counts[c];
  }
  std::vector<double> w(counts.size());
  for (std::size_t c = 0; c < counts.size(); ++c) {
    w[c] = static_cast<double>(total) /
           (static_cast<double>(counts.size()) * static_cast<double>(counts[c]));
  }
  return w;
}

SplitResult Split(const WindowDataset& ds, double train_frac, double val_frac,
                  double test_frac, std::uint64_t seed) {
  if (train_frac < 0 || val_frac < 0 || test_frac < 0 ||
      std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9) {
    throw InvalidArgument("split fractions must be non-negative and sum to 1");
  }
  auto by = IndicesByClass(ds, 7);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> tr, va, te;
  for (std::size_t c = 0; c < 7; ++c) {
    auto& idx = by[c];
    if (idx.empty()) continue;
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n = static_cast<double>(idx.size());
    const auto nv = static_cast<std::size_t>(std::floor(val_frac * n + 1e-9));
    const auto nt = static_cast<std::size_t>(std::floor(test_frac * n + 1e-9));
    const std::size_t ntr = idx.size() - nv - nt;
    if ((train_frac > 0 && ntr == 0) || (val_frac > 0 && nv == 0) ||
        (test_frac > 0 && nt == 0)) {
      throw InvalidArgument("split leaves an empty partition for class " +
                            ClassLabel(ds, c) + " with " +
                            std::to_string(idx.size()) + " samples");
    }
    va.insert(va.end(), idx.begin(), idx.begin() + static_cast<long>(nv));
    te.insert(te.end(), idx.begin() + static_cast<long>(nv),
              idx.begin() + static_cast<long>(nv + nt));
    tr.insert(tr.end(), idx.begin() + static_cast<long>(nv + nt), idx.end());
  }
  std::sort(tr.begin(), tr.end());
  std::sort(va.begin(), va.end());
  std::sort(te.begin(), te.end());
  return {ds.Subset(tr), ds.Subset(va), ds.Subset(te)};
}

Resampling ParseResampling(const std::string& name) {
  const std::string n = Lower(name);
  if (n == "none") return Resampling::kNone;
  if (n == "undersample" || n == "rus") return Resampling::kUndersample;
  if (n == "smote") return Resampling::kSmote;
  if (n == "class_weights" || n == "cw") return Resampling::kClassWeights;
  throw InvalidArgument("unknown resampling '" + name +
                        "' (expected none, undersample, smote or class_weights)");
}

std::string ResamplingName(Resampling r) {
  switch (r) {
    case Resampling::kNone: return "none";
    case Resampling::kUndersample: return "undersample";
    case Resampling::kSmote: return "smote";
    case Resampling::kClassWeights: return "class_weights";
  }
  return "?";
}

Prepared Prepare(const data::Dataset& ds, const PrepConfig& config) {
  const data::Dataset* source = &ds;
  data::Dataset smoothed;
  if (config.denoise) {
    smoothed = ds;
    Denoise(smoothed, config.denoise_width);
    source = &smoothed;
  }
  WindowDataset all = WindowRecordings(*source, config.window, config.step);
  if (all.size() == 0) throw InvalidArgument("no recording is long enough for one window");
  auto split = Split(all, config.train_frac, config.val_frac, config.test_frac,
                     config.seed);
  Prepared p;
  WindowDataset* others[] = {&split.val, &split.test};
  p.stats = StandardizeFitApply(split.train, others);
  switch (config.resampling) {
    case Resampling::kNone: break;
    case Resampling::kUndersample:
      split.train = Rus(split.train, config.seed + 1);
      break;
    case Resampling::kSmote:
      split.train = Smote(split.train, config.smote_k, config.seed + 1);
      break;
    case Resampling::kClassWeights:
      p.class_weights = ClassWeights(split.train.ClassCounts());
      break;
  }
  p.train = std::move(split.train);
  p.val = std::move(split.val);
  p.test = std::move(split.test);
  return p;
}

WindowDataset SelectChannels(const WindowDataset& ds,
                             std::span<const std::size_t> channels) {
  WindowDataset out = EmptyLike(ds);
  out.channels = channels.size();
  out.channel_names.clear();
  out.mean.clear();
  out.stddev.clear();
  for (auto c : channels) {
    if (c >= ds.channels) throw InvalidArgument("channel index out of range");
    out.channel_names.push_back(c < ds.channel_names.size() ? ds.channel_names[c]
                                                            : std::to_string(c));
    if (!ds.mean.empty()) {
      out.mean.push_back(ds.mean[c]);
      out.stddev.push_back(ds.stddev[c]);
    }
  }
  out.labels = ds.labels;
  out.values.resize(ds.size() * out.sample_size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t k = 0; k < channels.size(); ++k) {
      const float* src = ds.values.data() + (i * ds.channels + channels[k]) * ds.window;
      std::copy(src, src + ds.window,
                out.values.data() + (i * out.channels + k) * ds.window);
    }
  }
  return out;
}

void SaveWindows(const WindowDataset& ds, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const auto counts = ds.ClassCounts();
  json manifest = {{"schema_version", 1},
                   {"kind", "xfdd-windows"},
                   {"task", data::TaskName(ds.task)},
                   {"samples", ds.size()},
                   {"channels", ds.channels},
                   {"window", ds.window},
                   {"step", ds.step},
                   {"channel_names", ds.channel_names},
                   {"mean", ds.mean},
                   {"std", ds.stddev},
                   {"class_counts", counts},
                   {"seed", ds.seed},
                   {"values_file", "windows.f32"},
                   {"labels_file", "labels.u8"}};
  {
    std::ofstream out(dir / "windows.f32", std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / "windows.f32").string());
    static_assert(std::endian::native == std::endian::little,
                  "window blobs are written in host order");
    out.write(reinterpret_cast<const char*>(ds.values.data()),
              static_cast<std::streamsize>(ds.values.size() * sizeof(float)));
  }
  {
    std::ofstream out(dir / "labels.u8", std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / "labels.u8").string());
    out.write(reinterpret_cast<const char*>(ds.labels.data()),
              static_cast<std::streamsize>(ds.labels.size()));
  }
  std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

WindowDataset LoadWindows(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json", std::ios::binary);
  if (!in) throw IoError("cannot open " + (dir / "manifest.json").string());
  WindowDataset ds;
  try {
    json m = json::parse(in);
    ds.task = data::ParseTask(m.at("task").get<std::string>());
    ds.channels = m.at("channels").get<std::size_t>();
    ds.window = m.at("window").get<std::size_t>();
    ds.step = m.at("step").get<std::size_t>();
    ds.channel_names = m.at("channel_names").get<std::vector<std::string>>();
    ds.mean = m.at("mean").get<std::vector<double>>();
    ds.stddev = m.at("std").get<std::vector<double>>();
    ds.seed = m.at("seed").get<std::uint64_t>();
    const auto n = m.at("samples").get<std::size_t>();
    auto read = [&](const std::string& file, std::size_t bytes, void* dst) {
      std::ifstream f(dir / file, std::ios::binary);
      if (!f) throw IoError("cannot open " + (dir / file).string());
      f.read(static_cast<char*>(dst), static_cast<std::streamsize>(bytes));
      if (static_cast<std::size_t>(f.gcount()) != bytes) {
        throw FormatError(file + " truncated: expected " + std::to_string(bytes) +
                          " bytes, found " + std::to_string(f.gcount()));
      }
    };
    ds.values.resize(n * ds.channels * ds.window);
    ds.labels.resize(n);
    read(m.at("values_file").get<std::string>(), ds.values.size() * sizeof(float),
         ds.values.data());
    read(m.at("labels_file").get<std::string>(), n, ds.labels.data());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("window manifest: " + std::string(e.what()));
  }
  return ds;
}

}  // namespace xfdd::prep

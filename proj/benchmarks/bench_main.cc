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

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "xfdd/autodiff.h"
#include "xfdd/datagen.h"
#include "xfdd/model.h"
#include "xfdd/model_spec.h"
#include "xfdd/ops.h"
#include "xfdd/preprocess.h"
#include "xfdd/xai.h"

namespace {

using namespace xfdd;

template <typename T>
Tensor<T> Random(Shape shape, std::uint64_t seed) {
  Tensor<T> t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  for (auto& v : t.vec()) v = static_cast<T>(n(rng));
  return t;
}

nn::ArchOptions Desk() {
  nn::ArchOptions a;
  a.window = 50;
  a.channel_divisor = 4;
  a.hidden = 64;
  return a;
}

void BM_Conv1dForwardBackward(benchmark::State& state) {
  const auto channels = static_cast<std::size_t>(state.range(0));
  const auto x = Random<float>({32, channels, 50}, 1);
  const auto w = Random<float>({channels, channels, 3}, 2);
  const auto b = Random<float>({channels}, 3);
  for (auto _ : state) {
    ad::Tape<float> tape;
    auto in = tape.Leaf(x);
    auto wv = tape.Leaf(w);
    auto y = ad::Sum(ad::Conv1d(in, wv, tape.Constant(b), 1, 1));
    benchmark::DoNotOptimize(tape.Backward(y).of(wv).raw());
  }
}
BENCHMARK(BM_Conv1dForwardBackward)->Arg(8)->Arg(32)->Arg(128)->Unit(benchmark::kMicrosecond);

// One forward/backward pass of the desk hybrid over a batch.
void BM_TrainStep(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  nn::Model<float> model(nn::FtcmSpec(Desk()), 7);
  const auto x = Random<float>({batch, 24, 50}, 4);
  std::vector<std::size_t> labels(batch);
  for (std::size_t i = 0; i < batch; ++i) labels[i] = i % 7;
  std::mt19937_64 rng(5);
  for (auto _ : state) {
    ad::Tape<float> tape;
    std::vector<ad::Var<float>> params;
    auto logits = model.Forward(tape.Constant(x), nn::Mode::kTrain, &rng, &params);
    auto loss = ad::SoftmaxCrossEntropy(logits, std::span<const std::size_t>(labels));
    benchmark::DoNotOptimize(tape.Backward(loss).of(params.front()).raw());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_TrainStep)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_Attribution(benchmark::State& state) {
  const auto method = xai::AllMethods()[static_cast<std::size_t>(state.range(0))];
  nn::Model<double> model = nn::Model<float>(nn::FtcmSpec(Desk()), 7).Cast<double>();
  const auto net = xai::FromModel(model);
  const auto x = Random<double>({24, 50}, 6);
  std::vector<Tensor<double>> baselines;
  for (std::uint64_t i = 0; i < 10; ++i) baselines.push_back(Random<double>({24, 50}, 10 + i));
  for (auto _ : state) {
    benchmark::DoNotOptimize(xai::Attribute(net, method, x, baselines, 3).values.raw());
  }
  state.SetLabel(xai::MethodName(method));
}
BENCHMARK(BM_Attribution)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

void BM_Smote(benchmark::State& state) {
  prep::WindowDataset ds;
  ds.channels = 24;
  ds.window = 50;
  ds.step = 50;
  ds.channel_names.assign(24, "c");
  const std::size_t counts[] = {400, 100, 250};
  std::mt19937_64 rng(8);
  std::normal_distribution<float> n;
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < counts[c]; ++i) {
      for (std::size_t e = 0; e < ds.sample_size(); ++e) ds.values.push_back(n(rng) + c);
      ds.labels.push_back(static_cast<std::uint8_t>(c));
    }
  }
  for (auto _ : state) benchmark::DoNotOptimize(prep::Smote(ds, 5, 9).values.data());
}
BENCHMARK(BM_Smote)->Unit(benchmark::kMillisecond);

void BM_Datagen(benchmark::State& state) {
  const data::DatagenConfig config;
  for (auto _ : state) {
    const auto ds = data::GenerateDataset(data::Task::kFaultType, 100, config, 3);
    benchmark::DoNotOptimize(ds.recordings.data());
  }
}
BENCHMARK(BM_Datagen)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

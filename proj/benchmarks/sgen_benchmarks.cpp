// Copyright 2026 The sgen Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include "sgen/metrics.hpp"
#include "sgen/model.hpp"
#include "sgen/synthgen.hpp"
#include "sgen/trainer.hpp"

namespace {

using namespace sgen;

Points random_points(std::uint64_t seed, int n) {
  Rng rng(seed);
  return rng.gaussian<float>(n, 3);
}

void BM_Chamfer(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Points a = random_points(1, n), b = random_points(2, n);
  for (auto _ : state) benchmark::DoNotOptimize(chamfer(a, b));
  state.SetComplexityN(n);
}
BENCHMARK(BM_Chamfer)->Arg(256)->Arg(512)->Arg(2048)->Complexity();

void BM_EmdExact(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Points a = random_points(3, n), b = random_points(4, n);
  for (auto _ : state) benchmark::DoNotOptimize(emd_exact(a, b));
  state.SetComplexityN(n);
}
BENCHMARK(BM_EmdExact)->Arg(64)->Arg(128)->Arg(256)->Complexity();

void BM_EmdSinkhorn(benchmark::State& state) {
  const Points a = random_points(5, 512), b = random_points(6, 512);
  for (auto _ : state) benchmark::DoNotOptimize(emd_sinkhorn(a, b, 0.01, 500));
}
BENCHMARK(BM_EmdSinkhorn)->Unit(benchmark::kMillisecond);

void BM_DenoiserForward(benchmark::State& state) {
  const ModelConfig c = compact_model_config();
  GenerativeModel model = init_model(c, 1);
  const int n = static_cast<int>(state.range(0));
  const auto& s = structure_by_code("Ch_0123");
  const MatrixF labels = default_segmentation(n, s.existence).cast<float>();
  Rng rng(2);
  const MatrixF x = rng.gaussian<float>(n, 3);
  const MatrixF z = rng.gaussian<float>(c.m, c.sgn.latent_dim);
  MatrixF ex(c.m, 1);
  for (int j = 0; j < c.m; ++j) ex(j, 0) = s.existence[static_cast<size_t>(j)];
  const MatrixF temb = time_embedding(50, c.denoiser.time_dim).cast<float>().replicate(n, 1);
  const std::vector<int> group(static_cast<size_t>(n), 0);
  for (auto _ : state) {
    ad::Tape<float> tape(false);
    ad::Var tokens = context_tokens(tape, tape.constant(z), ex, MatrixF(s.adjacency.cast<float>()));
    benchmark::DoNotOptimize(
        tape.value(denoiser_forward(tape, model.params, c.denoiser, c.m, tape.constant(x), labels, tokens, temb, group)));
  }
}
BENCHMARK(BM_DenoiserForward)->Arg(512)->Arg(2048)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const ModelConfig c = compact_model_config();
  GenerativeModel model = init_model(c, 1);
  GeneratorConfig g;
  g.n = 512;
  g.count_per_code = 2;
  const Dataset d = make_dataset(g);
  std::vector<const ShapeRecord*> batch;
  for (const auto& r : d.records) batch.push_back(&r);
  Rng rng(3);
  AdamState adam;
  for (auto _ : state) {
    ad::Tape<float> tape(true);
    auto loss = total_loss(tape, model.params, c, model.schedule, batch, 1e-3, rng);
    tape.backward(loss.total);
    clip_grad_norm(model.params, 10.0);
    adam_step(model.params, adam);
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_SampleShape(benchmark::State& state) {
  GenerativeModel model = init_model(compact_model_config(), 1);
  const auto& s = structure_by_code("Ch_13");
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_shape(model, {s.existence, s.adjacency, std::nullopt, 512, 7}));
  }
}
BENCHMARK(BM_SampleShape)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();

// Copyright 2026 The M2FDP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

#include "m2fdp/analysis.hpp"
#include "m2fdp/control.hpp"
#include "m2fdp/dataset.hpp"
#include "m2fdp/engine.hpp"
#include "m2fdp/privacy.hpp"
#include "m2fdp/topology.hpp"

namespace {

using namespace m2fdp;

TierTopology Tree(int width) {
  const std::vector<int> sizes = {width, 4 * width, 16 * width};
  return BuildTopology(sizes, TrustFromRatios(sizes, {0.5, 0.5}, false), false);
}

void BM_StationarityGap(benchmark::State& state) {
  const auto topo = Tree(static_cast<int>(state.range(0)));
  const auto stats = DeriveTrustStats(topo);
  const auto alphas = ComposedAlphas(topo);
  DPConfig dp;
  dp.T = 100;
  for (auto _ : state) {
    const auto terms = AbcTerms(stats, alphas);
    benchmark::DoNotOptimize(StationarityGap(dp, 100, 10, terms, stats));
  }
}
BENCHMARK(BM_StationarityGap)->Arg(2)->Arg(8)->Arg(32);

void BM_SolveControl(benchmark::State& state) {
  const std::vector<int> sizes = {4, 4 * static_cast<int>(state.range(0))};
  const auto topo = BuildTopology(sizes, TrustFromRatios(sizes, {0.5}, false), false);
  ControlProblem p;
  p.topology = &topo;
  p.stats = DeriveTrustStats(topo);
  p.dp.T = 100;
  p.model_dim = 100;
  p.k_max = 20;
  p.ctx = {200, 4};
  for (auto _ : state) benchmark::DoNotOptimize(SolveControl(p).objective);
}
BENCHMARK(BM_SolveControl)->Arg(5)->Arg(20);

void BM_ShortRun(benchmark::State& state) {
  const std::vector<int> sizes = {4, 20};
  TrainingSetup setup;
  setup.topology = std::make_shared<const TierTopology>(
      BuildTopology(sizes, TrustFromRatios(sizes, {0.5}, false), false));
  setup.dataset = std::make_shared<const FederatedDataset>(
      GenerateSynthetic(20, 50, static_cast<int>(state.range(0)), 2, 0.5, 1));
  setup.loss = {LossKind::kLogistic, 0.1, 1.0};
  setup.dp.T = 4;
  setup.dp.epsilon = 0.2;
  setup.schedule = BuildSchedule(4, {10}, {{1, 5}});
  for (auto _ : state) benchmark::DoNotOptimize(RunTraining(setup).trace.size());
}
BENCHMARK(BM_ShortRun)->Arg(10)->Arg(40)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

// Copyright 2026 The CIS-OPE Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include "cis/experiment.hpp"

namespace {

cis::ExperimentConfig operator_config() {
  auto config = cis::ExperimentConfig::defaults(cis::ExperimentKind::operator_estimation);
  config.samples = 200;
  config.repetitions = 16;
  return config;
}

cis::ExperimentConfig policy_eval_config() {
  auto config = cis::ExperimentConfig::defaults(cis::ExperimentKind::policy_evaluation);
  config.episodes = 100;
  config.repetitions = 16;
  return config;
}

template <cis::ExperimentConfig (*Make)()>
void BM_Repetitions(benchmark::State& state) {
  const auto config = Make();
  const cis::RunOptions options{state.range(0) == 0 ? cis::Execution::serial : cis::Execution::parallel, 0};
  for (auto _ : state) benchmark::DoNotOptimize(cis::run_repetitions(config, options));
  state.SetLabel(state.range(0) == 0 ? "serial" : "openmp");
}

void BM_Bootstrap(benchmark::State& state) {
  auto config = operator_config();
  const auto reps = cis::run_repetitions(config);
  const cis::RunOptions options{state.range(0) == 0 ? cis::Execution::serial : cis::Execution::parallel, 0};
  for (auto _ : state) benchmark::DoNotOptimize(cis::aggregate(config, reps, options));
  state.SetLabel(state.range(0) == 0 ? "serial" : "openmp");
}

}  // namespace

BENCHMARK(BM_Repetitions<operator_config>)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Repetitions<policy_eval_config>)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Bootstrap)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

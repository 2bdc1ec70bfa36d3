// SPDX-License-Identifier: Apache-2.0
//
// Serial reference against the OpenMP kernels. Both policies produce
// bit-identical results; only wall time differs.
#include <benchmark/benchmark.h>

#include "fstrisk/dsl.hpp"
#include "fstrisk/elicitation.hpp"
#include "fstrisk/inference.hpp"
#include "fstrisk/propagate.hpp"

#include <fstream>
#include <sstream>

using namespace fstrisk;

namespace {

const std::vector<AggregatePoint>& points() {
  static const auto p = aggregate(load_estimates(FSTRISK_DATA_DIR "/estimates_workshop.csv"), {2, "combined"}).points;
  return p;
}

const PosteriorSamples& posterior() {
  static const auto s = fit_curve(points(), 0.25, McmcConfig{});
  return s;
}

Execution policy(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::serial : Execution::parallel;
}

void BM_FitCurve(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(fit_curve(points(), 0.25, McmcConfig{}, policy(state)));
}

void BM_SummarizeCurve(benchmark::State& state) {
  const auto grid = log_grid(1, 400, 200);
  for (auto _ : state) benchmark::DoNotOptimize(summarize_curve(posterior(), grid, 0.9, policy(state)));
}

void BM_SampleAnnualLoss(benchmark::State& state) {
  std::ifstream in(FSTRISK_DATA_DIR "/malware.riskdsl");
  std::stringstream ss;
  ss << in.rdbuf();
  auto scenario = parse_scenario(ss.str());
  if (!scenario) {
    state.SkipWithError("malware.riskdsl does not parse");
    return;
  }
  const auto model = compile(std::move(scenario).value(),
                             {{"cyber", std::make_shared<const PosteriorSamples>(posterior())}}, 100000);
  for (auto _ : state) benchmark::DoNotOptimize(sample_annual_loss(model, policy(state)));
}

}  // namespace

BENCHMARK(BM_FitCurve)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SummarizeCurve)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SampleAnnualLoss)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

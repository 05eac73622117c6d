#include <benchmark/benchmark.h>

#include "gsci/simulation.hpp"

using namespace gsci;

namespace {

Execution mode(const benchmark::State& state) { return state.range(0) ? Execution::Parallel : Execution::Serial; }

void label(benchmark::State& state) { state.SetLabel(state.range(0) ? "openmp" : "serial"); }

void BM_CurveTable(benchmark::State& state) {
  CurveOptions opts;
  opts.execution = mode(state);
  for (auto _ : state) {
    NominalLevelCurve c(SpendingFunction::pocock_like(), {0.5, 1.0}, opts);
    benchmark::DoNotOptimize(c.probit(1, 0.025));
  }
  label(state);
}
BENCHMARK(BM_CurveTable)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Replications(benchmark::State& state) {
  static const Scenario scenario = [] {
    ScenarioSpec s = load_scenario(std::string(GSCI_SOURCE_DIR) + "/data/scenario_mixed.json");
    s.metrics = {Metric::Fwer, Metric::Coverage};
    return Scenario(s);
  }();
  for (auto _ : state) benchmark::DoNotOptimize(run_replications(scenario, 0, 500, mode(state)));
  label(state);
}
BENCHMARK(BM_Replications)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_McCrossing(benchmark::State& state) {
  const std::vector<double> t{1.0 / 3, 2.0 / 3, 1.0};
  const std::vector<double> c{2.29, 2.29, 2.29};
  for (auto _ : state) benchmark::DoNotOptimize(mc_crossing(t, c, 1'000'000, 1, mode(state)));
  label(state);
}
BENCHMARK(BM_McCrossing)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

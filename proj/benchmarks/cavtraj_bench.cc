#include <benchmark/benchmark.h>

#include "cavtraj/arcs.h"
#include "cavtraj/oracle.h"
#include "cavtraj/sim.h"
#include "cavtraj/stitcher.h"

namespace cavtraj {
namespace {

const char* const kPresets[] = {"lead_free", "case1", "case2", "case3"};

void BM_SolvePreset(benchmark::State& state) {
  const char* id = kPresets[state.range(0)];
  const Scenario s = MakePreset(id)->scenario;
  for (auto _ : state) {
    SolveOutcome out = SolveTrajectory(s);
    benchmark::DoNotOptimize(out);
  }
  state.SetLabel(id);
}
BENCHMARK(BM_SolvePreset)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

void BM_Oracle(benchmark::State& state) {
  const Scenario s = MakePreset("case1")->scenario;
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) {
    absl::StatusOr<OracleSolution> o = SolveOracle(s, n);
    benchmark::DoNotOptimize(o);
  }
}
BENCHMARK(BM_Oracle)->Arg(520)->Arg(2600)->Unit(benchmark::kMillisecond);

void BM_TrajectoryEval(benchmark::State& state) {
  const Trajectory t = *SolveTrajectory(MakePreset("case1")->scenario).trajectory;
  double time = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(t.Eval(time));
    time += 0.0137;
    if (time > 26.0) time = 0.0;
  }
}
BENCHMARK(BM_TrajectoryEval);

void BM_ViolationScan(benchmark::State& state) {
  const Scenario s = MakePreset("case1")->scenario;
  const Arc arc = *SolveTerminalUnconstrained(0.0, 0.0, 14.0, 26.0, 300.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(DetectFirstViolation({arc}, s.params, &*s.lead));
  }
}
BENCHMARK(BM_ViolationScan)->Unit(benchmark::kMicrosecond);

}  // namespace
}  // namespace cavtraj

BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include <random>

#include "urbanpos/mode_switch.hpp"
#include "urbanpos/positioning.hpp"
#include "urbanpos/scenario.hpp"

using namespace urbanpos;

namespace {

const ScenarioRun& canyon() {
  static const ScenarioRun run = [] {
    ScenarioConfig c = preset("teheran-like", 1);
    c.duration = 600.0;
    return run_scenario(c);
  }();
  return run;
}

void BM_ProcessEpoch(benchmark::State& state) {
  const ScenarioRun& run = canyon();
  PipelineConfig cfg;
  cfg.known_start = KnownStart{run.truth.front().pos, Mat3::Identity() * 0.01};
  PipelineState ps;
  std::size_t k = 0;
  for (auto _ : state) {
    if (k == run.rover.size()) {
      ps = PipelineState{};
      k = 0;
    }
    benchmark::DoNotOptimize(process_epoch(ps, run.rover[k], run.prc[k].corrections, cfg));
    ++k;
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ProcessEpoch);

void BM_StepEpoch(benchmark::State& state) {
  const ScenarioRun& run = canyon();
  TrustedState trusted{run.truth[0].pos, run.truth[0].clock, Mat4::Identity() * 0.01};
  const FilterConfig fc;
  const TrackSet tracks = reinit_all(run.rover[0], trusted, default_tropo_model(), fc);
  for (auto _ : state) benchmark::DoNotOptimize(step_epoch(tracks, run.rover[1], fc));
}
BENCHMARK(BM_StepEpoch);

void BM_DgnssSolve(benchmark::State& state) {
  const ScenarioRun& run = canyon();
  const std::size_t k = 20;  // open-sky part of the run
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        dgnss_solve(run.rover[k], run.prc[k].corrections, run.truth[k].pos, default_tropo_model()));
  }
}
BENCHMARK(BM_DgnssSolve);

void BM_Threshold(benchmark::State& state) {
  int dof = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(threshold(dof, 1e-4));
    dof = dof % 30 + 1;
  }
}
BENCHMARK(BM_Threshold);

void BM_Fuse(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  Mat3 a, b;
  for (int i = 0; i < 9; ++i) {
    a(i / 3, i % 3) = n(rng);
    b(i / 3, i % 3) = n(rng);
  }
  const Mat3 p1 = a * a.transpose() + Mat3::Identity(), p2 = b * b.transpose() + Mat3::Identity();
  for (auto _ : state) benchmark::DoNotOptimize(fuse(Vec3(1, 2, 3), p1, Vec3(3, 2, 1), p2));
}
BENCHMARK(BM_Fuse);

void BM_Simulate60s(benchmark::State& state) {
  ScenarioConfig c = preset("open-sky", 1);
  c.duration = 60.0;
  for (auto _ : state) benchmark::DoNotOptimize(run_scenario(c));
  state.SetItemsProcessed(state.iterations() * 60);
}
BENCHMARK(BM_Simulate60s)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();

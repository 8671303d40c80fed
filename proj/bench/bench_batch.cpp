#include <benchmark/benchmark.h>

#include "wos/engine.hpp"

using namespace wos;

namespace {

void BM_BallSerial(benchmark::State& state) {
  const auto dom = ball_domain(3, 1.0);
  WosConfig c;
  c.epsilon = 1e-6;
  for (auto _ : state) benchmark::DoNotOptimize(run_batch_serial(*dom, c, Point{0.0, 0.0, 0.0}, state.range(0), 0));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_BallParallel(benchmark::State& state) {
  const auto dom = ball_domain(3, 1.0);
  WosConfig c;
  c.epsilon = 1e-6;
  for (auto _ : state)
    benchmark::DoNotOptimize(run_batch(*dom, c, Point{0.0, 0.0, 0.0}, state.range(0), 0, static_cast<int>(state.range(1))));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_PuncturedSerial(benchmark::State& state) {
  const auto dom = build_punctured_disk({4096.0, 0.5});
  WosConfig c;
  c.epsilon = 1.0 / 4096.0;
  for (auto _ : state) benchmark::DoNotOptimize(run_batch_serial(*dom, c, Point{0.0, 0.0}, state.range(0), 0));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_PuncturedParallel(benchmark::State& state) {
  const auto dom = build_punctured_disk({4096.0, 0.5});
  WosConfig c;
  c.epsilon = 1.0 / 4096.0;
  for (auto _ : state)
    benchmark::DoNotOptimize(run_batch(*dom, c, Point{0.0, 0.0}, state.range(0), 0, static_cast<int>(state.range(1))));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_BallSerial)->Arg(10000)->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BallParallel)->Args({10000, 1})->Args({10000, 2})->Args({10000, 4})->Args({10000, 8})->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PuncturedSerial)->Arg(200)->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PuncturedParallel)->Args({200, 1})->Args({200, 4})->UseRealTime()->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include "mwd/grid.hpp"
#include "mwd/kernels.hpp"
#include "mwd/runtime.hpp"
#include "mwd/tiling.hpp"

namespace {

constexpr int kSteps = 4;

struct Fixture {
  mwd::StencilSpec spec;
  mwd::GridBundle bundle;

  Fixture(mwd::StencilKind kind, int n) : spec(mwd::make_spec(kind)) {
    bundle = mwd::allocate_grid(n, n, n, spec);
    mwd::fill_deterministic(bundle.grid, bundle.coeffs, spec, 1);
  }
};

void report(benchmark::State& state, int n) {
  const double lups = static_cast<double>(n) * n * n * kSteps;
  state.counters["LUP/s"] =
      benchmark::Counter(lups, benchmark::Counter::kIsIterationInvariantRate);
}

mwd::StencilKind kind_of(const benchmark::State& state) {
  return static_cast<mwd::StencilKind>(state.range(0));
}

void BM_Naive(benchmark::State& state) {
  const int n = static_cast<int>(state.range(1));
  Fixture f(kind_of(state), n);
  const mwd::StencilOperator op(f.spec, f.bundle.coeffs);
  for (auto _ : state) mwd::sweep_naive(op, f.bundle.grid, kSteps, 1);
  report(state, n);
}

void BM_Spatial(benchmark::State& state) {
  const int n = static_cast<int>(state.range(1));
  Fixture f(kind_of(state), n);
  const mwd::StencilOperator op(f.spec, f.bundle.coeffs);
  const mwd::BlockSpec block{n, 16, mwd::Schedule::kContiguous};
  for (auto _ : state) mwd::sweep_spatial(op, f.bundle.grid, kSteps, 1, block);
  report(state, n);
}

void BM_Wavefront(benchmark::State& state) {
  const int n = static_cast<int>(state.range(1));
  const int d_w = static_cast<int>(state.range(2));
  Fixture f(kind_of(state), n);
  const mwd::StencilOperator op(f.spec, f.bundle.coeffs);
  const auto tess = mwd::build_tessellation(n, kSteps, d_w, f.spec.radius);
  for (auto _ : state) mwd::run_mwd(op, f.bundle.grid, kSteps, tess, {1, 1}, 0);
  report(state, n);
}

constexpr auto k7c = static_cast<int64_t>(mwd::StencilKind::k7ptConst);
constexpr auto k7v = static_cast<int64_t>(mwd::StencilKind::k7ptVar);
constexpr auto k25v = static_cast<int64_t>(mwd::StencilKind::k25ptVar);

}  // namespace

BENCHMARK(BM_Naive)->Args({k7c, 64})->Args({k7v, 64})->Args({k25v, 64})->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Spatial)->Args({k7c, 64})->Args({k7v, 64})->Args({k25v, 64})->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Wavefront)
    ->Args({k7c, 64, 8})
    ->Args({k7c, 64, 16})
    ->Args({k7v, 64, 8})
    ->Args({k25v, 64, 16})
    ->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK_MAIN();

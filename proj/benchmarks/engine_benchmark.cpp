#include <benchmark/benchmark.h>

#include "npfkit/reference.hpp"

namespace {

using namespace npfkit;

struct Fixture {
  SystemModel model;
  EquilibriumPoint eq;
  ModalBasis basis;

  Fixture(std::size_t n, int order)
      : model(gen_random_poly({n, static_cast<unsigned>(order), 0.5, 1 + n, 0.1})),
        eq{std::vector<double>(n, 0.0), 0.0},
        basis(decompose(jacobian(model, eq.x))) {}
};

void BM_ContractAxis(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  ComplexTensor t = ComplexTensor::filled(Shape{n, n, n, n}, complex_t(0.5, 0.25));
  const ComplexTensor m = ComplexTensor::filled(Shape{n, n}, complex_t(1.0, -0.5));
  for (auto _ : state) {
    auto r = contract_axis(t, m, 2);
    benchmark::DoNotOptimize(r.values().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * n * n * n * n));
}
BENCHMARK(BM_ContractAxis)->Arg(8)->Arg(16)->Arg(24);

void BM_PlanBatches(benchmark::State& state) {
  for (auto _ : state) {
    auto plan = plan_batches({5, 4251, 8.0, 8});
    benchmark::DoNotOptimize(plan.batches);
  }
}
BENCHMARK(BM_PlanBatches);

void BM_Vbt(benchmark::State& state) {
  const Fixture f(static_cast<std::size_t>(state.range(0)), static_cast<int>(state.range(1)));
  EngineConfig cfg;
  cfg.max_order = static_cast<int>(state.range(1));
  for (auto _ : state) {
    auto r = compute_npf(f.model, f.eq, f.basis, all_modes(f.basis.size()), cfg, Excitation::all(0.1));
    benchmark::DoNotOptimize(r.total.values().data());
  }
}
BENCHMARK(BM_Vbt)->Args({6, 4})->Args({20, 3})->Unit(benchmark::kMillisecond);

void BM_VbtBatched(benchmark::State& state) {
  const Fixture f(20, 3);
  EngineConfig cfg;
  cfg.max_order = 3;
  cfg.memory_limit_gib = 20.0 * 20 * 20 * 4 * 8 / kBytesPerGiB;
  for (auto _ : state) {
    auto r = compute_npf(f.model, f.eq, f.basis, all_modes(20), cfg, Excitation::all(0.1));
    benchmark::DoNotOptimize(r.total.values().data());
  }
}
BENCHMARK(BM_VbtBatched)->Unit(benchmark::kMillisecond);

void BM_Tc(benchmark::State& state) {
  const Fixture f(static_cast<std::size_t>(state.range(0)), static_cast<int>(state.range(1)));
  EngineConfig cfg;
  cfg.max_order = static_cast<int>(state.range(1));
  for (auto _ : state) {
    auto r = npf_tc_unbatched(f.model, f.eq, f.basis, all_modes(f.basis.size()), cfg, Excitation::all(0.1));
    benchmark::DoNotOptimize(r.total.values().data());
  }
}
BENCHMARK(BM_Tc)->Args({6, 4})->Args({20, 3})->Unit(benchmark::kMillisecond);

void BM_Traditional(benchmark::State& state) {
  const Fixture f(static_cast<std::size_t>(state.range(0)), static_cast<int>(state.range(1)));
  EngineConfig cfg;
  cfg.max_order = static_cast<int>(state.range(1));
  for (auto _ : state) {
    auto r = npf_traditional(f.model, f.eq, f.basis, all_modes(f.basis.size()), cfg, Excitation::all(0.1));
    benchmark::DoNotOptimize(r.total.values().data());
  }
}
BENCHMARK(BM_Traditional)->Args({4, 3})->Args({6, 4})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

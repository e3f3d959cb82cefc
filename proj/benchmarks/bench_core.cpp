#include <benchmark/benchmark.h>

#include <cmath>

#include "rwre/branching.hpp"
#include "rwre/env_model.hpp"
#include "rwre/perpetuity.hpp"
#include "rwre/walk.hpp"

namespace {

const rwre::EnvSpec& beta31() {
  static const rwre::EnvSpec spec = rwre::EnvSpec::beta(3.0, 1.0);
  return spec;
}

void BM_PositionAfter(benchmark::State& state) {
  const auto steps = state.range(0);
  std::uint64_t i = 0;
  for (auto _ : state) {
    const rwre::RngStream r(7, i++);
    rwre::QuenchedEnv env(beta31(), r.split(0));
    rwre::RngStream walk = r.split(1);
    benchmark::DoNotOptimize(rwre::position_after(env, steps, walk));
  }
  state.SetItemsProcessed(state.iterations() * steps);
}
BENCHMARK(BM_PositionAfter)->Arg(1000)->Arg(4000);

void BM_RunUntilHit(benchmark::State& state) {
  std::uint64_t i = 0;
  for (auto _ : state) {
    const rwre::RngStream r(7, i++);
    rwre::QuenchedEnv env(beta31(), r.split(0));
    rwre::RngStream walk = r.split(1);
    benchmark::DoNotOptimize(rwre::run_until_hit(env, state.range(0), walk).T);
  }
}
BENCHMARK(BM_RunUntilHit)->Arg(50)->Arg(500);

void BM_NegativeBinomial(benchmark::State& state) {
  rwre::RngStream rng(7, 0);
  const auto k = state.range(0);
  for (auto _ : state) benchmark::DoNotOptimize(rwre::negative_binomial(k, 0.6, rng));
}
BENCHMARK(BM_NegativeBinomial)->Arg(1)->Arg(10)->Arg(1000);

void BM_BetaDraw(benchmark::State& state) {
  rwre::RngStream rng(7, 0);
  for (auto _ : state) benchmark::DoNotOptimize(rwre::draw_A(beta31(), rng));
}
BENCHMARK(BM_BetaDraw);

void BM_ApproxYInf(benchmark::State& state) {
  rwre::RngStream rng(7, 0);
  for (auto _ : state) benchmark::DoNotOptimize(rwre::approx_Y_inf(beta31(), 1e-6, rng).value);
}
BENCHMARK(BM_ApproxYInf);

void BM_RegenerationCycle(benchmark::State& state) {
  rwre::RngStream rng(7, 0);
  for (auto _ : state) benchmark::DoNotOptimize(rwre::run_cycle(beta31(), rng).sum);
}
BENCHMARK(BM_RegenerationCycle);

void BM_TotalProgeny(benchmark::State& state) {
  rwre::RngStream rng(7, 0);
  for (auto _ : state) benchmark::DoNotOptimize(rwre::total_progeny_W(beta31(), state.range(0), rng));
}
BENCHMARK(BM_TotalProgeny)->Arg(50)->Arg(1000);

void BM_TiltedProductTail(benchmark::State& state) {
  const rwre::RngStream stream(7, 0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rwre::tilted_product_tail(beta31(), 20, std::exp(20 * 1.5), 1024, stream).value);
  }
  state.SetItemsProcessed(state.iterations() * 1024);
}
BENCHMARK(BM_TiltedProductTail);

}  // namespace

BENCHMARK_MAIN();

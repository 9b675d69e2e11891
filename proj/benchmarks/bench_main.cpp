#include <benchmark/benchmark.h>

#include <cmath>

#include "linkm/curves.hpp"
#include "linkm/linking.hpp"
#include "linkm/potentials.hpp"
#include "linkm/quadrature.hpp"
#include "linkm/terms.hpp"

using namespace linkm;

static void BM_GaussLinking(benchmark::State& state) {
  const Link3 link = make_preset("eccentric_tori");
  for (auto _ : state) benchmark::DoNotOptimize(gauss_linking(link[0], link[1], 1e-10));
}
BENCHMARK(BM_GaussLinking)->Unit(benchmark::kMillisecond);

static void BM_CrossingLinking(benchmark::State& state) {
  const Link3 link = make_preset("eccentric_tori");
  for (auto _ : state) benchmark::DoNotOptimize(crossing_sign_linking(link[0], link[1]));
}
BENCHMARK(BM_CrossingLinking)->Unit(benchmark::kMillisecond);

static void BM_CurvePotential(benchmark::State& state) {
  const Link3 link = make_preset("hopf_plus_far_circle");
  const Vec3 x{0.3, -0.2, 0.4};
  for (auto _ : state)
    benchmark::DoNotOptimize(curve_potential(link[0], x, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_CurvePotential)->Arg(128)->Arg(512)->Arg(2048);

static void BM_McRun(benchmark::State& state) {
  McOptions o;
  o.budget = static_cast<std::uint64_t>(state.range(0));
  o.min_samples = o.budget;
  for (auto _ : state) {
    const auto est = mc_run(
        1,
        [](CounterRng& rng, std::span<double> out) {
          const double x = rng.uniform(), y = rng.uniform();
          out[0] = std::exp(-x * y);
          return true;
        },
        o);
    benchmark::DoNotOptimize(est);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_McRun)->Arg(1 << 14)->Arg(1 << 17)->Unit(benchmark::kMillisecond);

static void BM_AssembleM(benchmark::State& state) {
  const Link3 link = make_preset("eccentric_tori");
  MOptions o;
  o.pair_budget = static_cast<std::uint64_t>(state.range(0));
  o.volume_budget = 4096;
  for (auto _ : state) benchmark::DoNotOptimize(assemble_M(link, o));
}
BENCHMARK(BM_AssembleM)->Arg(1 << 12)->Arg(1 << 14)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();

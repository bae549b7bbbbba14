#include <vector>

#include <benchmark/benchmark.h>

#include "thzalloc/baselines.hpp"
#include "thzalloc/solver.hpp"
#include "thzalloc/synthetic.hpp"

using namespace thz;

namespace {

const SpectrumLayout& layout() {
  static const SpectrumLayout l = fit_layout(generate_absorption(SyntheticProfile::single_peak()));
  return l;
}

Scenario scenario(std::size_t users) {
  auto p = default_params(users);
  p.seed = 3;
  return generate(p);
}

void BM_FitLayout(benchmark::State& state) {
  const auto samples = generate_absorption(SyntheticProfile::two_window());
  for (auto _ : state) benchmark::DoNotOptimize(fit_layout(samples));
}
BENCHMARK(BM_FitLayout);

void BM_RateIntegral(benchmark::State& state) {
  const auto sc = scenario(1);
  const auto& region = layout().regions[0];
  const auto link = sc.link(0, sc.p_max);
  for (auto _ : state) benchmark::DoNotOptimize(rate_integral(link, region, region.f_lo() + 5e9, 1e9));
}
BENCHMARK(BM_RateIntegral);

void BM_Subproblem(benchmark::State& state) {
  const std::size_t users = static_cast<std::size_t>(state.range(0));
  ProblemConfig pc;
  pc.convexity = ConvexityPolicy::Warn;
  const auto inst = build(scenario(users), layout(), pc);
  const std::vector<double> anchor(inst.n_x(), 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(solve_subproblem(inst, anchor, SolverConfig{}));
}
BENCHMARK(BM_Subproblem)->Arg(2)->Arg(4)->Arg(6)->Unit(benchmark::kMillisecond);

void BM_Scheme(benchmark::State& state) {
  const auto scheme = static_cast<Scheme>(state.range(0));
  const auto sc = scenario(static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(run_scheme(scheme, sc, layout(), BaselineConfig{}, 50));
  state.SetLabel(to_string(scheme));
}
BENCHMARK(BM_Scheme)
    ->Args({static_cast<long>(Scheme::ESB), 8})
    ->Args({static_cast<long>(Scheme::ASB_fixed_edge), 8})
    ->Args({static_cast<long>(Scheme::ASB_full), 8})
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

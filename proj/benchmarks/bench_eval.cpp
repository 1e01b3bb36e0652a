#include <benchmark/benchmark.h>

#include <vector>

#include "codestop/eval.hpp"
#include "codestop/synthgen.hpp"

namespace {

const std::vector<codestop::Trajectory>& corpus() {
  static const auto c = codestop::generate_corpus(codestop::GeneratorParams{});
  return c;
}

void BM_Replay(benchmark::State& state) {
  codestop::PolicyConfig cfg;
  cfg.rule = static_cast<codestop::Rule>(state.range(0));
  const codestop::ReplayOptions opts{static_cast<unsigned>(state.range(1))};
  for (auto _ : state) benchmark::DoNotOptimize(codestop::evaluate(corpus(), cfg, opts));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(corpus().size()));
}
BENCHMARK(BM_Replay)->ArgsProduct({{0, 1, 4}, {1, 0}})->ArgNames({"rule", "threads"});

void BM_Sweep(benchmark::State& state) {
  std::vector<codestop::PolicyConfig> grid;
  for (int i = 0; i < state.range(0); ++i) {
    codestop::PolicyConfig c;
    c.tau = 0.5 + 0.25 * i;
    grid.push_back(c);
  }
  for (auto _ : state) benchmark::DoNotOptimize(codestop::sweep(corpus(), grid));
}
BENCHMARK(BM_Sweep)->Arg(10)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_Generate(benchmark::State& state) {
  codestop::GeneratorParams p;
  p.n_trajectories = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(codestop::generate_corpus(p));
}
BENCHMARK(BM_Generate)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "codestop/policy.hpp"
#include "codestop/stepper.hpp"

namespace {

std::vector<codestop::StepObservation> walk(std::size_t n) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<codestop::StepObservation> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].step_index = static_cast<int>(i + 1);
    out[i].token_pos = static_cast<codestop::TokenCount>(300 * (i + 1));
    out[i].confidence = 0.9 * unit(rng);
  }
  return out;
}

void BM_UpdateDegeneration(benchmark::State& state) {
  const auto steps = walk(static_cast<std::size_t>(state.range(0)));
  codestop::PolicyConfig cfg;
  cfg.w_variant = static_cast<codestop::WeightVariant>(state.range(1));
  for (auto _ : state) {
    codestop::DegenerationState s;
    double d = 0;
    for (const auto& o : steps) {
      auto up = codestop::update_degeneration(s, o, cfg);
      s = up.state;
      d = up.score;
    }
    benchmark::DoNotOptimize(d);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_UpdateDegeneration)
    ->ArgsProduct({{100, 10000}, {0, 1, 2, 3}})
    ->ArgNames({"steps", "w"});

void BM_StepperObserve(benchmark::State& state) {
  const auto steps = walk(1000);
  codestop::PolicyConfig cfg;
  cfg.r_min = cfg.r_max = 0.95;
  cfg.ramp_steps = 1;
  cfg.tau = codestop::kInfinity;
  for (auto _ : state) {
    codestop::PolicyStepper stepper(cfg);
    for (const auto& o : steps) benchmark::DoNotOptimize(stepper.observe(o));
  }
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_StepperObserve);

}  // namespace

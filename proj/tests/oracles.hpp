#pragma once

// Reference implementations used only by tests. They recompute everything
// from scratch at every step and deliberately share no code with the engine.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "codestop/types.hpp"

namespace codestop::testing {

/// D_k by direct summation over steps 1..k, all weights evaluated at T_k.
inline double direct_degeneration(const std::vector<double>& conf,
                                  const std::vector<TokenCount>& pos,
                                  std::size_t k, InstabilityVariant v_variant,
                                  WeightVariant w_variant, double delta) {
  const double t_k = static_cast<double>(pos[k - 1]);
  double num = 0.0;
  double weight_total = 0.0;
  for (std::size_t i = 1; i <= k; ++i) {
    const double c = conf[i - 1];
    const double prev = i == 1 ? conf[0] : conf[i - 2];
    double v = 0.0;
    switch (v_variant) {
      case InstabilityVariant::TrendAware: v = (2 * c - prev < delta) ? 1 : 0; break;
      case InstabilityVariant::LowConfidence: v = c < delta ? 1 : 0; break;
      case InstabilityVariant::ConfidenceComplement: v = 1 - c; break;
      case InstabilityVariant::ConfidenceDrop: v = prev - c; break;
    }
    const double t_i = static_cast<double>(pos[i - 1]);
    double w = 1.0;
    switch (w_variant) {
      case WeightVariant::Uniform: w = 1.0; break;
      case WeightVariant::Log:
      case WeightVariant::NormalizedLog: w = std::log(t_k / t_i) + 1.0; break;
      case WeightVariant::LogInverse: w = std::log(t_i / t_k) + 1.0; break;
    }
    num += w * v;
    weight_total += w;
  }
  return w_variant == WeightVariant::NormalizedLog ? num / weight_total : num;
}

/// Stop step of the combined rule, recomputed from the raw definition with
/// D_k summed from scratch at each step. Returns 0 if nothing fires.
inline int direct_codestop_stop(const std::vector<double>& conf,
                                const std::vector<TokenCount>& pos,
                                const PolicyConfig& cfg) {
  for (std::size_t k = 1; k <= conf.size(); ++k) {
    const double r = std::min(cfg.r_max, cfg.r_min + (cfg.r_max - cfg.r_min) *
                                                         static_cast<double>(k) /
                                                         cfg.ramp_steps);
    if (conf[k - 1] >= r) return static_cast<int>(k);
    const double d = direct_degeneration(conf, pos, k, cfg.v_variant,
                                         cfg.w_variant, cfg.delta);
    if (d >= cfg.tau) return static_cast<int>(k);
  }
  return 0;
}

/// Indices of rows not strictly dominated, by an all-pairs check.
inline std::vector<std::size_t> brute_force_frontier(
    const std::vector<double>& acc, const std::vector<double>& cost) {
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < acc.size(); ++r) {
    bool dominated = false;
    for (std::size_t s = 0; s < acc.size() && !dominated; ++s) {
      if (s == r) continue;
      dominated = (acc[s] >= acc[r] && cost[s] < cost[r]) ||
                  (acc[s] > acc[r] && cost[s] <= cost[r]);
    }
    if (!dominated) keep.push_back(r);
  }
  return keep;
}

/// Random valid trajectory; confidences mix smooth drift with jumps so every
/// indicator branch is exercised.
inline Trajectory random_trajectory(std::mt19937_64& rng, std::size_t max_len,
                                    const std::string& id = "t") {
  std::uniform_int_distribution<std::size_t> len_dist(1, max_len);
  std::uniform_int_distribution<TokenCount> gap(1, 400);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> answer(0, 3);

  Trajectory t;
  t.id = id;
  t.benchmark = "bench";
  t.model = "m";
  const std::size_t n = len_dist(rng);
  TokenCount pos = 0;
  double c = unit(rng);
  for (std::size_t i = 0; i < n; ++i) {
    pos += gap(rng);
    c = unit(rng) < 0.3 ? unit(rng)
                        : std::clamp(c + 0.2 * (unit(rng) - 0.5), 0.0, 1.0);
    StepObservation s;
    s.step_index = static_cast<int>(i + 1);
    s.token_pos = pos;
    s.confidence = c;
    s.intermediate_answer = "A" + std::to_string(answer(rng));
    s.answer_correct = unit(rng) < 0.5;
    s.probe_overhead_tokens = gap(rng) / 10;
    t.steps.push_back(std::move(s));
  }
  t.total_reasoning_tokens = pos + gap(rng);
  t.budget_tokens = std::max<TokenCount>(t.total_reasoning_tokens, 32768);
  t.final_correct = unit(rng) < 0.5;
  return t;
}

inline std::vector<double> confidences(const Trajectory& t) {
  std::vector<double> out;
  for (const auto& s : t.steps) out.push_back(s.confidence);
  return out;
}

inline std::vector<TokenCount> positions(const Trajectory& t) {
  std::vector<TokenCount> out;
  for (const auto& s : t.steps) out.push_back(s.token_pos);
  return out;
}

}  // namespace codestop::testing

#pragma once

// Seeded generator for synthetic reasoning trajectories.
//
// Correct-class runs ramp up along a logistic curve in normalized step
// position and settle near 1; their intermediate answers become correct the
// first time confidence exceeds 0.8. Incorrect-class runs hover around
// `incorrect_level` with large step-to-step noise and a slow upward drift,
// are heavy-tailed in length (lognormal step counts, truncated by the token
// budget) and never answer correctly.
//
// Trajectory i depends only on (seed, i), so corpora can be generated in
// any order or in parallel.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "codestop/types.hpp"

namespace codestop {

struct GeneratorParams {
  std::size_t n_trajectories = 2000;
  double p_correct = 0.6;

  // Correct-class step count: lognormal with this mean and log-sd.
  double correct_len_mean = 8.0;
  double correct_len_dispersion = 0.35;
  // Incorrect-class step count: lognormal with this median and log-sd
  // (the tail shape).
  double incorrect_len_scale = 20.0;
  double incorrect_len_shape = 0.8;

  double rise_rate = 12.0;  // logistic slope per unit of normalized position
  double noise_sd = 0.05;   // correct-class confidence noise
  double incorrect_level = 0.45;
  double incorrect_noise_sd = 0.15;
  double late_rise = 0.3;  // incorrect-class drift over the whole run

  double tokens_per_step = 600.0;
  double probe_overhead = 20.0;
  TokenCount budget_tokens = kDefaultBudgetTokens;

  std::vector<std::string> benchmarks = {"aime", "math500", "gsm8k", "gpqa"};
  std::string model = "synthetic";
  std::string prompt_variant = "vanilla";
  std::uint64_t seed = 42;
};

/// Throws ValidationError naming the bad field.
void validate(const GeneratorParams& params);

/// The index-th trajectory of the corpus described by `params`.
Trajectory generate_trajectory(const GeneratorParams& params, std::size_t index);

std::vector<Trajectory> generate_corpus(const GeneratorParams& params);

struct CorpusSummary {
  std::size_t trajectories = 0;
  std::size_t correct = 0;
  std::size_t incorrect = 0;
  double mean_tokens_correct = 0.0;
  double mean_tokens_incorrect = 0.0;
  double mean_steps_correct = 0.0;
  double mean_steps_incorrect = 0.0;
};

/// Class is taken from final_correct.
CorpusSummary summarize(std::span<const Trajectory> corpus);

}  // namespace codestop

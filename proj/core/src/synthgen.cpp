#include "codestop/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>

#include "codestop/errors.hpp"

namespace codestop {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// std::mt19937_64 is bit-specified; the standard distributions are not, so
// the variates are drawn by hand to keep corpora identical across toolchains.
class Stream {
 public:
  Stream(std::uint64_t seed, std::size_t index)
      : engine_(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(index)))) {}

  double uniform() {  // [0, 1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }
  double normal(double mean, double sd) { return mean + sd * normal(); }
  double lognormal(double mu, double sigma) {
    return std::exp(mu + sigma * normal());
  }
  int below(int n) {
    return static_cast<int>(uniform() * static_cast<double>(n));
  }

 private:
  std::mt19937_64 engine_;
};

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Rounded lognormal draw with the given arithmetic mean, at least 1.
TokenCount draw_tokens(Stream& rng, double mean, double sigma) {
  const double mu = std::log(mean) - 0.5 * sigma * sigma;
  return std::max<TokenCount>(1, std::llround(rng.lognormal(mu, sigma)));
}

constexpr int kAnswerSpace = 100;
constexpr double kCorrectFlipConfidence = 0.8;
constexpr double kGapSigma = 0.4;
constexpr double kProbeSigma = 0.3;

std::string answer_label(int value) { return "A-" + std::to_string(value); }

int wrong_answer(Stream& rng, int gold) {
  int a = rng.below(kAnswerSpace - 1);
  return a >= gold ? a + 1 : a;
}

}  // namespace

void validate(const GeneratorParams& p) {
  auto prob = [](double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; };
  auto positive = [](double x) { return std::isfinite(x) && x > 0.0; };
  if (!prob(p.p_correct)) throw ValidationError("p_correct outside [0, 1]", "p_correct");
  if (!positive(p.correct_len_mean))
    throw ValidationError("correct_len_mean must be > 0", "correct_len_mean");
  if (!positive(p.correct_len_dispersion))
    throw ValidationError("correct_len_dispersion must be > 0",
                          "correct_len_dispersion");
  if (!positive(p.incorrect_len_scale))
    throw ValidationError("incorrect_len_scale must be > 0",
                          "incorrect_len_scale");
  if (!positive(p.incorrect_len_shape))
    throw ValidationError("incorrect_len_shape must be > 0",
                          "incorrect_len_shape");
  if (!positive(p.rise_rate)) throw ValidationError("rise_rate must be > 0", "rise_rate");
  if (!std::isfinite(p.noise_sd) || p.noise_sd < 0.0)
    throw ValidationError("noise_sd must be >= 0", "noise_sd");
  if (!std::isfinite(p.incorrect_noise_sd) || p.incorrect_noise_sd < 0.0)
    throw ValidationError("incorrect_noise_sd must be >= 0",
                          "incorrect_noise_sd");
  if (!prob(p.incorrect_level))
    throw ValidationError("incorrect_level outside [0, 1]", "incorrect_level");
  if (!std::isfinite(p.late_rise))
    throw ValidationError("late_rise must be finite", "late_rise");
  if (!positive(p.tokens_per_step))
    throw ValidationError("tokens_per_step must be > 0", "tokens_per_step");
  if (!positive(p.probe_overhead))
    throw ValidationError("probe_overhead must be > 0", "probe_overhead");
  if (p.budget_tokens < 2)
    throw ValidationError("budget_tokens must be >= 2", "budget_tokens");
  if (p.benchmarks.empty())
    throw ValidationError("benchmarks must be nonempty", "benchmarks");
  if (p.prompt_variant != "vanilla" && p.prompt_variant != "budget_force" &&
      p.prompt_variant != "cod" && p.prompt_variant != "no_thinking")
    throw ValidationError("unknown prompt_variant", "prompt_variant");
}

Trajectory generate_trajectory(const GeneratorParams& p, std::size_t index) {
  Stream rng(p.seed, index);

  Trajectory traj;
  char id[64];
  std::snprintf(id, sizeof id, "syn-%llu-%06zu",
                static_cast<unsigned long long>(p.seed), index);
  traj.id = id;
  traj.benchmark = p.benchmarks[index % p.benchmarks.size()];
  traj.model = p.model;
  traj.prompt_variant = p.prompt_variant;
  traj.budget_tokens = p.budget_tokens;

  const bool correct_class = rng.uniform() < p.p_correct;
  const int gold = rng.below(kAnswerSpace);

  double raw_len;
  if (correct_class) {
    const double s = p.correct_len_dispersion;
    raw_len = rng.lognormal(std::log(p.correct_len_mean) - 0.5 * s * s, s);
  } else {
    raw_len = rng.lognormal(std::log(p.incorrect_len_scale),
                            p.incorrect_len_shape);
  }
  const int planned = std::max(1, static_cast<int>(std::llround(raw_len)));

  // Token positions; steps that would cross the budget are dropped and the
  // run is treated as having hit the cap.
  std::vector<TokenCount> positions;
  positions.reserve(static_cast<std::size_t>(std::min(planned, 4096)));
  TokenCount pos = 0;
  bool truncated = false;
  for (int i = 0; i < planned; ++i) {
    pos += draw_tokens(rng, p.tokens_per_step, kGapSigma);
    if (pos >= p.budget_tokens) {
      truncated = true;
      break;
    }
    positions.push_back(pos);
  }
  if (positions.empty()) {
    positions.push_back(std::min<TokenCount>(p.budget_tokens - 1,
                                             std::llround(p.tokens_per_step)));
    truncated = false;
  }
  const TokenCount tail = draw_tokens(rng, p.tokens_per_step, kGapSigma);
  traj.total_reasoning_tokens =
      truncated ? p.budget_tokens
                : std::min(p.budget_tokens, positions.back() + tail);

  const int n = static_cast<int>(positions.size());
  const double midpoint = rng.uniform(0.15, 0.45);
  const int favourite_wrong = wrong_answer(rng, gold);
  bool flipped = false;

  traj.steps.reserve(positions.size());
  for (int i = 0; i < n; ++i) {
    const double u = static_cast<double>(i + 1) / static_cast<double>(n);
    StepObservation s;
    s.step_index = i + 1;
    s.token_pos = positions[static_cast<std::size_t>(i)];
    s.probe_overhead_tokens = draw_tokens(rng, p.probe_overhead, kProbeSigma);

    if (correct_class) {
      s.confidence = clamp01(logistic(p.rise_rate * (u - midpoint)) +
                             rng.normal(0.0, p.noise_sd));
      if (s.confidence > kCorrectFlipConfidence || i + 1 == n) flipped = true;
      s.answer_correct = flipped;
      s.intermediate_answer =
          answer_label(flipped ? gold : wrong_answer(rng, gold));
    } else {
      s.confidence = clamp01(p.incorrect_level + p.late_rise * u +
                             rng.normal(0.0, p.incorrect_noise_sd));
      s.answer_correct = false;
      const bool sticky = rng.uniform() < 0.5;
      s.intermediate_answer =
          answer_label(sticky ? favourite_wrong : wrong_answer(rng, gold));
    }
    traj.steps.push_back(std::move(s));
  }
  traj.final_correct = correct_class;
  return traj;
}

std::vector<Trajectory> generate_corpus(const GeneratorParams& params) {
  validate(params);
  std::vector<Trajectory> out;
  out.reserve(params.n_trajectories);
  for (std::size_t i = 0; i < params.n_trajectories; ++i) {
    out.push_back(generate_trajectory(params, i));
  }
  return out;
}

CorpusSummary summarize(std::span<const Trajectory> corpus) {
  CorpusSummary s;
  s.trajectories = corpus.size();
  double tok_c = 0, tok_i = 0, steps_c = 0, steps_i = 0;
  for (const auto& t : corpus) {
    if (t.final_correct) {
      ++s.correct;
      tok_c += static_cast<double>(t.total_reasoning_tokens);
      steps_c += static_cast<double>(t.steps.size());
    } else {
      ++s.incorrect;
      tok_i += static_cast<double>(t.total_reasoning_tokens);
      steps_i += static_cast<double>(t.steps.size());
    }
  }
  if (s.correct > 0) {
    s.mean_tokens_correct = tok_c / static_cast<double>(s.correct);
    s.mean_steps_correct = steps_c / static_cast<double>(s.correct);
  }
  if (s.incorrect > 0) {
    s.mean_tokens_incorrect = tok_i / static_cast<double>(s.incorrect);
    s.mean_steps_incorrect = steps_i / static_cast<double>(s.incorrect);
  }
  return s;
}

}  // namespace codestop

#pragma once

// Domain types shared by the stopping rules, the replay harness and the
// decision service.

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace codestop {

using TokenCount = std::int64_t;

/// One reasoning-step probe: where the step ended and what the forced
/// intermediate answer looked like.
struct StepObservation {
  int step_index = 0;         // 1-based position in the trajectory
  TokenCount token_pos = 0;   // cumulative reasoning tokens at the delimiter
  double confidence = 0.0;    // mean probability of the forced answer tokens
  std::string intermediate_answer;
  bool answer_correct = false;
  TokenCount probe_overhead_tokens = 0;

  bool operator==(const StepObservation&) const = default;
};

inline constexpr TokenCount kDefaultBudgetTokens = 32768;

/// A recorded reasoning run; the unit of replay.
struct Trajectory {
  std::string id;
  std::string benchmark;
  std::string model;
  std::string prompt_variant = "vanilla";
  std::vector<StepObservation> steps;
  TokenCount total_reasoning_tokens = 0;
  bool final_correct = false;
  TokenCount budget_tokens = kDefaultBudgetTokens;

  bool operator==(const Trajectory&) const = default;
};

enum class Rule { CodeStop, Deer, DeerFixedStep, AnswerConvergence, Vanilla };

/// Instability indicator v_i.
enum class InstabilityVariant {
  TrendAware,            // 1(2c_i - c_{i-1} < delta)
  LowConfidence,         // 1(c_i < delta)
  ConfidenceComplement,  // 1 - c_i
  ConfidenceDrop,        // c_{i-1} - c_i
};

/// Step weight w_i, evaluated against the current step's token position.
enum class WeightVariant {
  Log,            // ln(T_k / T_i) + 1
  Uniform,        // 1
  LogInverse,     // ln(T_i / T_k) + 1
  NormalizedLog,  // Log weights divided by their sum over steps 1..k
};

struct PolicyConfig {
  Rule rule = Rule::CodeStop;
  InstabilityVariant v_variant = InstabilityVariant::TrendAware;
  WeightVariant w_variant = WeightVariant::Log;
  double r_min = 0.0;
  double r_max = 0.95;
  int ramp_steps = 5;
  double tau = 7.1;
  double delta = 0.55;
  double deer_threshold = 0.95;
  int fixed_step_cap = 40;
  int convergence_window = 3;

  bool operator==(const PolicyConfig&) const = default;
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Running accumulators for the degeneration score. With these sums the
/// score at step k is a closed form in ln(T_k), so each update is O(1) even
/// though every past weight depends on the current token position.
struct DegenerationState {
  double count_sum = 0.0;        // sum v_i
  double log_sum = 0.0;          // sum v_i * ln(T_i)
  double weight_norm_sum = 0.0;  // sum ln(T_j) over all steps (NormalizedLog)
  double last_confidence = 0.0;
  TokenCount last_token_pos = 0;
  int step_count = 0;

  // Neumaier compensation terms for the three sums above.
  double count_comp = 0.0;
  double log_comp = 0.0;
  double norm_comp = 0.0;

  bool fresh() const { return step_count == 0; }
};

enum class Action { Continue, Stop };

enum class StopReason {
  None,
  Confidence,
  Degeneration,
  FixedStep,
  Convergence,
  BudgetExhausted,
};

struct StopDecision {
  Action action = Action::Continue;
  StopReason reason = StopReason::None;
  double threshold_value = 0.0;  // r_k or tau, whichever was compared last
  double score_value = 0.0;      // c_k or D_k

  bool stop() const { return action == Action::Stop; }

  static StopDecision continue_with(double threshold, double score) {
    return {Action::Continue, StopReason::None, threshold, score};
  }
  static StopDecision stop_with(StopReason reason, double threshold,
                                double score) {
    return {Action::Stop, reason, threshold, score};
  }
};

std::string_view to_string(Rule rule);
std::string_view to_string(InstabilityVariant v);
std::string_view to_string(WeightVariant w);
std::string_view to_string(Action action);
std::string_view to_string(StopReason reason);

// Parsers accept the snake_case names produced by to_string (plus a few
// short aliases) and throw ValidationError otherwise.
Rule parse_rule(std::string_view text);
InstabilityVariant parse_instability_variant(std::string_view text);
WeightVariant parse_weight_variant(std::string_view text);
StopReason parse_stop_reason(std::string_view text);

/// Throws ValidationError naming the offending field.
void validate(const PolicyConfig& cfg);

}  // namespace codestop

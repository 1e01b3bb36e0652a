#include "codestop/types.hpp"

#include <array>
#include <cmath>
#include <string>
#include <utility>

#include "codestop/errors.hpp"

namespace codestop {

namespace {

template <typename Enum, std::size_t N>
Enum lookup(const std::array<std::pair<std::string_view, Enum>, N>& table,
            std::string_view text, const char* what) {
  for (const auto& [name, value] : table) {
    if (name == text) return value;
  }
  throw ValidationError("unknown " + std::string(what) + " '" +
                            std::string(text) + "'",
                        what);
}

constexpr std::array<std::pair<std::string_view, Rule>, 8> kRuleNames{{
    {"codestop", Rule::CodeStop},
    {"deer", Rule::Deer},
    {"deer_fixed_step", Rule::DeerFixedStep},
    {"answer_convergence", Rule::AnswerConvergence},
    {"vanilla", Rule::Vanilla},
    {"code_stop", Rule::CodeStop},
    {"fixed_step", Rule::DeerFixedStep},
    {"convergence", Rule::AnswerConvergence},
}};

constexpr std::array<std::pair<std::string_view, InstabilityVariant>, 4>
    kInstabilityNames{{
        {"trend_aware", InstabilityVariant::TrendAware},
        {"low_confidence", InstabilityVariant::LowConfidence},
        {"confidence_complement", InstabilityVariant::ConfidenceComplement},
        {"confidence_drop", InstabilityVariant::ConfidenceDrop},
    }};

constexpr std::array<std::pair<std::string_view, WeightVariant>, 4>
    kWeightNames{{
        {"log", WeightVariant::Log},
        {"uniform", WeightVariant::Uniform},
        {"log_inverse", WeightVariant::LogInverse},
        {"normalized_log", WeightVariant::NormalizedLog},
    }};

constexpr std::array<std::pair<std::string_view, StopReason>, 6> kReasonNames{{
    {"none", StopReason::None},
    {"confidence", StopReason::Confidence},
    {"degeneration", StopReason::Degeneration},
    {"fixed_step", StopReason::FixedStep},
    {"convergence", StopReason::Convergence},
    {"budget_exhausted", StopReason::BudgetExhausted},
}};

template <typename Enum, std::size_t N>
std::string_view name_of(
    const std::array<std::pair<std::string_view, Enum>, N>& table,
    Enum value) {
  for (const auto& [name, v] : table) {
    if (v == value) return name;
  }
  return "unknown";
}

}  // namespace

std::string_view to_string(Rule rule) { return name_of(kRuleNames, rule); }
std::string_view to_string(InstabilityVariant v) {
  return name_of(kInstabilityNames, v);
}
std::string_view to_string(WeightVariant w) { return name_of(kWeightNames, w); }
std::string_view to_string(StopReason reason) {
  return name_of(kReasonNames, reason);
}
std::string_view to_string(Action action) {
  return action == Action::Stop ? "stop" : "continue";
}

Rule parse_rule(std::string_view text) {
  return lookup(kRuleNames, text, "rule");
}
InstabilityVariant parse_instability_variant(std::string_view text) {
  return lookup(kInstabilityNames, text, "v_variant");
}
WeightVariant parse_weight_variant(std::string_view text) {
  return lookup(kWeightNames, text, "w_variant");
}
StopReason parse_stop_reason(std::string_view text) {
  return lookup(kReasonNames, text, "reason");
}

void validate(const PolicyConfig& cfg) {
  auto unit = [](double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; };
  if (!unit(cfg.r_min)) throw ValidationError("r_min outside [0, 1]", "r_min");
  if (!unit(cfg.r_max)) throw ValidationError("r_max outside [0, 1]", "r_max");
  if (cfg.r_min > cfg.r_max)
    throw ValidationError("r_min exceeds r_max", "r_min");
  if (cfg.ramp_steps < 1)
    throw ValidationError("steps must be at least 1", "steps");
  if (std::isnan(cfg.tau) || cfg.tau < 0.0)
    throw ValidationError("tau must be nonnegative", "tau");
  if (!unit(cfg.delta)) throw ValidationError("delta outside [0, 1]", "delta");
  if (!unit(cfg.deer_threshold))
    throw ValidationError("deer_threshold outside [0, 1]", "deer_threshold");
  if (cfg.fixed_step_cap < 1)
    throw ValidationError("fixed_step_cap must be at least 1",
                          "fixed_step_cap");
  if (cfg.convergence_window < 1)
    throw ValidationError("convergence_window must be at least 1",
                          "convergence_window");
}

}  // namespace codestop

#include "codestop/baselines.hpp"

#include <string_view>

namespace codestop {

namespace {

std::string_view trim(std::string_view s) {
  constexpr std::string_view kSpace = " \t\r\n\f\v";
  const auto first = s.find_first_not_of(kSpace);
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(kSpace);
  return s.substr(first, last - first + 1);
}

}  // namespace

StopDecision vanilla_decide(const StepObservation& obs,
                            const Trajectory& traj) {
  const bool last =
      obs.step_index == static_cast<int>(traj.steps.size());
  if (last) {
    return StopDecision::stop_with(StopReason::BudgetExhausted,
                                   static_cast<double>(traj.budget_tokens),
                                   static_cast<double>(obs.token_pos));
  }
  return StopDecision::continue_with(static_cast<double>(traj.budget_tokens),
                                     static_cast<double>(obs.token_pos));
}

StopDecision deer_decide(const StepObservation& obs, const PolicyConfig& cfg) {
  if (obs.confidence >= cfg.deer_threshold) {
    return StopDecision::stop_with(StopReason::Confidence, cfg.deer_threshold,
                                   obs.confidence);
  }
  return StopDecision::continue_with(cfg.deer_threshold, obs.confidence);
}

StopDecision fixed_step_decide(const StepObservation& obs,
                               const PolicyConfig& cfg) {
  StopDecision d = deer_decide(obs, cfg);
  if (d.stop()) return d;
  if (obs.step_index >= cfg.fixed_step_cap) {
    return StopDecision::stop_with(StopReason::FixedStep,
                                   static_cast<double>(cfg.fixed_step_cap),
                                   static_cast<double>(obs.step_index));
  }
  return d;
}

StopDecision answer_convergence_decide(
    std::span<const std::string> recent_answers, const PolicyConfig& cfg) {
  const auto window = static_cast<std::size_t>(cfg.convergence_window);
  const double seen = static_cast<double>(recent_answers.size());
  if (recent_answers.size() < window) {
    return StopDecision::continue_with(cfg.convergence_window, seen);
  }
  const auto tail = recent_answers.last(window);
  const std::string_view first = trim(tail.front());
  for (const auto& answer : tail) {
    if (trim(answer) != first) {
      return StopDecision::continue_with(cfg.convergence_window, seen);
    }
  }
  return StopDecision::stop_with(StopReason::Convergence,
                                 cfg.convergence_window, seen);
}

}  // namespace codestop

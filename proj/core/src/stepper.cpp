#include "codestop/stepper.hpp"

#include <stdexcept>
#include <utility>

#include "codestop/baselines.hpp"
#include "codestop/errors.hpp"
#include "codestop/policy.hpp"

namespace codestop {

PolicyStepper::PolicyStepper(PolicyConfig cfg) : cfg_(std::move(cfg)) {
  validate(cfg_);
}

StepReport PolicyStepper::observe(const StepObservation& obs, bool last) {
  if (stopped_) throw std::logic_error("observe() after a stop decision");
  const int ordinal = state_.step_count + 1;
  if (obs.step_index != 0 && obs.step_index != ordinal) {
    throw ValidationError("step_index does not match stream position",
                          "step_index");
  }
  StepObservation at = obs;
  at.step_index = ordinal;

  // Everything below works on copies until the final commit.
  CodeStopStep core = decide(state_, at, cfg_);
  StepReport report{ordinal, {}, 0.0, core.d_k};
  std::deque<std::string> answers = recent_answers_;

  switch (cfg_.rule) {
    case Rule::CodeStop:
      report.decision = core.decision;
      report.r_k = core.r_k;
      break;
    case Rule::Deer:
      report.decision = deer_decide(at, cfg_);
      report.r_k = cfg_.deer_threshold;
      break;
    case Rule::DeerFixedStep:
      report.decision = fixed_step_decide(at, cfg_);
      report.r_k = cfg_.deer_threshold;
      break;
    case Rule::AnswerConvergence: {
      answers.push_back(at.intermediate_answer);
      while (answers.size() > static_cast<std::size_t>(cfg_.convergence_window))
        answers.pop_front();
      const std::vector<std::string> window(answers.begin(), answers.end());
      report.decision = answer_convergence_decide(window, cfg_);
      break;
    }
    case Rule::Vanilla:
      report.decision = StopDecision::continue_with(0.0, at.token_pos);
      break;
  }
  if (!report.decision.stop() && last) {
    report.decision = StopDecision::stop_with(
        StopReason::BudgetExhausted, 0.0, static_cast<double>(at.token_pos));
  }

  state_ = core.state;
  recent_answers_ = std::move(answers);
  stopped_ = report.decision.stop();
  last_report_ = report;
  return report;
}

}  // namespace codestop

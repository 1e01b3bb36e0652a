#pragma once

#include <deque>
#include <string>
#include <vector>

#include "codestop/types.hpp"

namespace codestop {

/// What one observation produced, plus the diagnostics reported on the wire.
struct StepReport {
  int step = 0;  // 1-based ordinal of the observation just consumed
  StopDecision decision;
  double r_k = 0.0;  // confidence bar in effect (0 for rules without one)
  double d_k = 0.0;  // degeneration score under cfg's v/w variants
};

/// Drives any configured rule over a stream of observations. The batch
/// replay and the sidecar both go through this type, one observation at a
/// time, so their decisions agree by construction.
///
/// observe() is transactional: if it throws, the stepper is unchanged.
class PolicyStepper {
 public:
  explicit PolicyStepper(PolicyConfig cfg);

  /// `last` marks the final observation of the stream; if no rule fires
  /// there the step reports Stop(BudgetExhausted). A nonzero
  /// obs.step_index must equal the next ordinal.
  StepReport observe(const StepObservation& obs, bool last = false);

  const PolicyConfig& config() const { return cfg_; }
  const DegenerationState& state() const { return state_; }
  int steps_seen() const { return state_.step_count; }
  bool stopped() const { return stopped_; }
  const StepReport& last_report() const { return last_report_; }

 private:
  PolicyConfig cfg_;
  DegenerationState state_;
  std::deque<std::string> recent_answers_;
  bool stopped_ = false;
  StepReport last_report_;
};

}  // namespace codestop

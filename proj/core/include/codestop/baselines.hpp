#pragma once

// Comparison rules that can be replayed from the same traces.

#include <span>
#include <string>

#include "codestop/types.hpp"

namespace codestop {

/// No early stopping: Continue until the trace runs out.
StopDecision vanilla_decide(const StepObservation& obs, const Trajectory& traj);

/// Fixed confidence threshold, inclusive.
StopDecision deer_decide(const StepObservation& obs, const PolicyConfig& cfg);

/// DEER, or a hard cap on the number of reasoning steps.
StopDecision fixed_step_decide(const StepObservation& obs,
                               const PolicyConfig& cfg);

/// Stops once the last `convergence_window` intermediate answers agree after
/// trimming surrounding whitespace. `recent_answers` is oldest first and may
/// be shorter than the window early in a trace.
StopDecision answer_convergence_decide(std::span<const std::string> recent_answers,
                                       const PolicyConfig& cfg);

}  // namespace codestop

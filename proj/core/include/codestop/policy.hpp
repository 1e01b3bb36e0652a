#pragma once

// The confidence-dynamics stopping rule: a ramping confidence threshold plus
// an accumulated, early-weighted degeneration score.
//
//   r_k = min(r_max, r_min + (r_max - r_min) * k / steps)
//   D_k = sum_{i<=k} w_i(T_k, T_i) * v_i
//   stop at k if c_k >= r_k (reason Confidence) or D_k >= tau (Degeneration)
//
// All functions are pure; DegenerationState is passed in and a new one is
// returned, so many trajectories can be evaluated in parallel.

#include "codestop/types.hpp"

namespace codestop {

/// r_k for the 1-based step ordinal k. Nondecreasing in k, equal to r_max
/// from k = ramp_steps onwards.
double ramping_threshold(int k, const PolicyConfig& cfg);

/// v_i. At the first step callers pass c_prev == c_cur. Throws
/// ValidationError for a non-finite or out-of-range confidence.
double instability_indicator(double c_prev, double c_cur,
                             InstabilityVariant variant, double delta);

/// w_i evaluated at the current token position. For NormalizedLog this is
/// the raw Log weight; normalization happens over all steps inside the
/// degeneration score.
double step_weight(TokenCount t_current, TokenCount t_i, WeightVariant variant);

/// D_k from the accumulators, with every weight evaluated at `t_current`.
double degeneration_score(const DegenerationState& state, TokenCount t_current,
                          WeightVariant variant);

struct DegenerationUpdate {
  DegenerationState state;
  double score = 0.0;  // D_k
};

/// Folds one observation into the accumulators. Throws ValidationError for
/// a bad confidence or a token position that does not strictly increase;
/// the input state is never modified.
DegenerationUpdate update_degeneration(const DegenerationState& state,
                                       const StepObservation& obs,
                                       const PolicyConfig& cfg);

struct CodeStopStep {
  DegenerationState state;
  StopDecision decision;
  double r_k = 0.0;
  double d_k = 0.0;
};

/// One step of the combined rule. When both conditions hold the reported
/// reason is Confidence.
CodeStopStep decide(const DegenerationState& state, const StepObservation& obs,
                    const PolicyConfig& cfg);

/// Range/finiteness check on a single confidence value.
void validate_confidence(double c, const char* field = "confidence");

}  // namespace codestop

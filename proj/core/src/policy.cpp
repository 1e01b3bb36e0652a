#include "codestop/policy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "codestop/errors.hpp"

namespace codestop {

namespace {

// Neumaier-compensated accumulation.
void accumulate(double& sum, double& comp, double x) {
  const double t = sum + x;
  if (std::fabs(sum) >= std::fabs(x)) {
    comp += (sum - t) + x;
  } else {
    comp += (x - t) + sum;
  }
  sum = t;
}

double log_tokens(TokenCount t) { return std::log(static_cast<double>(t)); }

}  // namespace

void validate_confidence(double c, const char* field) {
  if (!std::isfinite(c) || c < 0.0 || c > 1.0) {
    throw ValidationError("confidence out of range", field);
  }
}

double ramping_threshold(int k, const PolicyConfig& cfg) {
  // Exact at and past the end of the ramp, whatever the rounding below.
  if (k >= cfg.ramp_steps) return cfg.r_max;
  const double ramp =
      cfg.r_min + (cfg.r_max - cfg.r_min) * static_cast<double>(k) /
                      static_cast<double>(cfg.ramp_steps);
  return std::min(cfg.r_max, ramp);
}

double instability_indicator(double c_prev, double c_cur,
                             InstabilityVariant variant, double delta) {
  validate_confidence(c_prev, "previous confidence");
  validate_confidence(c_cur);
  switch (variant) {
    case InstabilityVariant::TrendAware:
      return (2.0 * c_cur - c_prev < delta) ? 1.0 : 0.0;
    case InstabilityVariant::LowConfidence:
      return c_cur < delta ? 1.0 : 0.0;
    case InstabilityVariant::ConfidenceComplement:
      return 1.0 - c_cur;
    case InstabilityVariant::ConfidenceDrop:
      return c_prev - c_cur;
  }
  return 0.0;
}

double step_weight(TokenCount t_current, TokenCount t_i,
                   WeightVariant variant) {
  if (t_i < 1) throw ValidationError("token position must be >= 1", "T_i");
  switch (variant) {
    case WeightVariant::Uniform:
      return 1.0;
    case WeightVariant::Log:
    case WeightVariant::NormalizedLog:
      if (t_current < t_i)
        throw ValidationError("current token position precedes step", "T_k");
      return log_tokens(t_current) - log_tokens(t_i) + 1.0;
    case WeightVariant::LogInverse:
      if (t_current < 1)
        throw ValidationError("token position must be >= 1", "T_k");
      return log_tokens(t_i) - log_tokens(t_current) + 1.0;
  }
  return 1.0;
}

double degeneration_score(const DegenerationState& state, TokenCount t_current,
                          WeightVariant variant) {
  if (state.step_count == 0) return 0.0;
  const double count = state.count_sum + state.count_comp;
  const double log_sum = state.log_sum + state.log_comp;
  const double ln_tk = log_tokens(t_current);
  switch (variant) {
    case WeightVariant::Uniform:
      return count;
    case WeightVariant::Log:
      return (ln_tk + 1.0) * count - log_sum;
    case WeightVariant::LogInverse:
      return log_sum + (1.0 - ln_tk) * count;
    case WeightVariant::NormalizedLog: {
      // Every raw Log weight is >= 1, so the normalizer is >= k.
      const double norm = state.weight_norm_sum + state.norm_comp;
      const double total_weight = state.step_count * (ln_tk + 1.0) - norm;
      return ((ln_tk + 1.0) * count - log_sum) / total_weight;
    }
  }
  return 0.0;
}

DegenerationUpdate update_degeneration(const DegenerationState& state,
                                       const StepObservation& obs,
                                       const PolicyConfig& cfg) {
  validate_confidence(obs.confidence);
  if (obs.token_pos < 1) {
    throw ValidationError("token_pos must be >= 1", "token_pos");
  }
  if (!state.fresh() && obs.token_pos <= state.last_token_pos) {
    throw ValidationError("token_pos not strictly increasing", "token_pos");
  }

  const double c_prev = state.fresh() ? obs.confidence : state.last_confidence;
  const double v =
      instability_indicator(c_prev, obs.confidence, cfg.v_variant, cfg.delta);
  const double ln_t = log_tokens(obs.token_pos);

  DegenerationUpdate out{state, 0.0};
  DegenerationState& next = out.state;
  accumulate(next.count_sum, next.count_comp, v);
  accumulate(next.log_sum, next.log_comp, v * ln_t);
  accumulate(next.weight_norm_sum, next.norm_comp, ln_t);
  next.last_confidence = obs.confidence;
  next.last_token_pos = obs.token_pos;
  next.step_count = state.step_count + 1;
  out.score = degeneration_score(next, obs.token_pos, cfg.w_variant);
  return out;
}

CodeStopStep decide(const DegenerationState& state, const StepObservation& obs,
                    const PolicyConfig& cfg) {
  auto [next, d_k] = update_degeneration(state, obs, cfg);
  const double r_k = ramping_threshold(next.step_count, cfg);

  CodeStopStep out{next, {}, r_k, d_k};
  if (obs.confidence >= r_k) {
    out.decision = StopDecision::stop_with(StopReason::Confidence, r_k,
                                           obs.confidence);
  } else if (d_k >= cfg.tau) {
    out.decision = StopDecision::stop_with(StopReason::Degeneration, cfg.tau,
                                           d_k);
  } else {
    out.decision = StopDecision::continue_with(cfg.tau, d_k);
  }
  return out;
}

}  // namespace codestop

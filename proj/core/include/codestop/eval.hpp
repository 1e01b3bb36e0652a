#pragma once

// Replay of stopping rules over trace corpora and the four reported metrics:
//   Acc  - percent of trajectories whose answer at the stop point is correct
//   Tok  - mean reasoning tokens at the stop point
//   CR   - Tok as a percent of the full-budget (vanilla) Tok, per benchmark
//   Cost - mean of reasoning tokens plus the probe tokens spent deciding
// The overall row is the unweighted mean of the per-benchmark rows.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "codestop/stepper.hpp"
#include "codestop/types.hpp"

namespace codestop {

struct StopOutcome {
  std::string trajectory_id;
  std::string benchmark;
  int stop_step = 0;
  StopReason reason = StopReason::None;
  TokenCount reasoning_tokens = 0;
  TokenCount cost_tokens = 0;
  bool correct = false;
  bool final_correct = false;  // class label, kept for breakdowns
};

/// Per-step reports up to and including the stop step.
std::vector<StepReport> decision_trace(const Trajectory& traj,
                                       const PolicyConfig& cfg);

/// Probe overhead is charged for every evaluated step up to and including
/// the stop step (the stopping probe is the final answer). Vanilla charges
/// no probes.
StopOutcome run_policy(const Trajectory& traj, const PolicyConfig& cfg);

/// 100 * tok_method / tok_vanilla. Throws ValidationError when
/// tok_vanilla <= 0.
double compression_rate(double tok_method, double tok_vanilla);

/// Half-away-from-zero rounding to one decimal, for presentation only.
double round1(double x);

struct MetricsRow {
  std::string benchmark;
  std::size_t n = 0;
  double acc = 0.0;   // percent
  double tok = 0.0;   // mean tokens
  double cr = 0.0;    // percent
  double cost = 0.0;  // mean tokens
};

struct MetricsReport {
  std::string method;
  PolicyConfig config;
  std::vector<MetricsRow> rows;  // one per benchmark, sorted by name
  MetricsRow overall;
};

/// Overall row = column-wise arithmetic mean of `rows`. Throws
/// ValidationError on an empty input.
MetricsReport aggregate(std::vector<MetricsRow> rows);

/// Per-benchmark rows. The vanilla reference Tok is the mean
/// total_reasoning_tokens of each benchmark's trajectories in `corpus`.
/// Sums run in trajectory-id order so the result does not depend on input
/// order.
std::vector<MetricsRow> benchmark_rows(std::span<const StopOutcome> outcomes,
                                       std::span<const Trajectory> corpus);

struct ReplayOptions {
  unsigned threads = 0;  // 0 = hardware concurrency
};

/// Outcomes in corpus order.
std::vector<StopOutcome> replay(std::span<const Trajectory> corpus,
                                const PolicyConfig& cfg,
                                ReplayOptions options = {});

MetricsReport evaluate(std::span<const Trajectory> corpus,
                       const PolicyConfig& cfg, ReplayOptions options = {});

struct ClassTokenMeans {
  double correct = 0.0;
  double incorrect = 0.0;
  std::size_t n_correct = 0;
  std::size_t n_incorrect = 0;
};

/// Mean stop-point reasoning tokens split by trajectory class.
ClassTokenMeans class_token_means(std::span<const StopOutcome> outcomes);

struct SweepRow {
  PolicyConfig config;
  MetricsReport report;
};

/// One report per config, in grid order. Throws ValidationError on an empty
/// grid or an invalid config.
std::vector<SweepRow> sweep(std::span<const Trajectory> corpus,
                            std::span<const PolicyConfig> grid,
                            ReplayOptions options = {});

struct ParetoPoint {
  std::size_t index = 0;  // caller's row id
  double acc = 0.0;
  double cost = 0.0;
};

/// Rows not strictly dominated on (higher acc, lower cost), stably sorted
/// by cost ascending.
std::vector<ParetoPoint> pareto_frontier(std::span<const ParetoPoint> rows);

std::vector<ParetoPoint> pareto_points(std::span<const SweepRow> rows);

/// Method label used in reports ("codestop", "deer", ...).
std::string method_name(const PolicyConfig& cfg);

// Rendering. CSV numbers carry one decimal; JSON keeps full precision.
std::string report_to_json(const MetricsReport& report);
std::string report_to_csv(std::span<const MetricsReport> reports);
std::string sweep_to_csv(std::span<const SweepRow> rows);
std::string sweep_to_csv(std::span<const SweepRow> rows,
                         std::span<const ParetoPoint> subset);
std::string sweep_to_json(std::span<const SweepRow> rows);

}  // namespace codestop

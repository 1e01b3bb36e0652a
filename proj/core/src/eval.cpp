#include "codestop/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <nlohmann/json.hpp>
#include <thread>

#include "codestop/config_json.hpp"
#include "codestop/errors.hpp"

namespace codestop {

namespace {

using ordered_json = nlohmann::ordered_json;

template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  // Small inputs are not worth a thread each.
  const std::size_t useful = std::max<std::size_t>(1, n / 256);
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, useful));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    workers.emplace_back([begin, end, &fn] {
      for (std::size_t i = begin; i < end; ++i) fn(i);
    });
  }
  for (auto& w : workers) w.join();
}

std::string fmt1(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", round1(x));
  return buf;
}

std::string fmt_param(double x) {
  if (std::isinf(x)) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

ordered_json row_json(const MetricsRow& row) {
  ordered_json j;
  j["benchmark"] = row.benchmark;
  j["n"] = row.n;
  j["acc"] = row.acc;
  j["tok"] = row.tok;
  j["cr"] = row.cr;
  j["cost"] = row.cost;
  return j;
}

ordered_json report_json(const MetricsReport& report) {
  ordered_json j;
  j["method"] = report.method;
  j["config"] = config_to_json(report.config);
  ordered_json rows = ordered_json::array();
  for (const auto& r : report.rows) rows.push_back(row_json(r));
  j["benchmarks"] = std::move(rows);
  j["overall"] = row_json(report.overall);
  return j;
}

std::string csv_row(const std::string& method, const MetricsRow& row) {
  return method + "," + row.benchmark + "," + fmt1(row.acc) + "," +
         fmt1(row.tok) + "," + fmt1(row.cr) + "," + fmt1(row.cost) + "\n";
}

}  // namespace

std::vector<StepReport> decision_trace(const Trajectory& traj,
                                       const PolicyConfig& cfg) {
  PolicyStepper stepper(cfg);
  std::vector<StepReport> out;
  out.reserve(traj.steps.size());
  for (std::size_t i = 0; i < traj.steps.size(); ++i) {
    out.push_back(stepper.observe(traj.steps[i], i + 1 == traj.steps.size()));
    if (out.back().decision.stop()) break;
  }
  return out;
}

StopOutcome run_policy(const Trajectory& traj, const PolicyConfig& cfg) {
  PolicyStepper stepper(cfg);
  const bool charge_probes = cfg.rule != Rule::Vanilla;

  StopOutcome out;
  out.trajectory_id = traj.id;
  out.benchmark = traj.benchmark;
  out.final_correct = traj.final_correct;

  TokenCount probe_tokens = 0;
  for (std::size_t i = 0; i < traj.steps.size(); ++i) {
    const StepObservation& step = traj.steps[i];
    const StepReport report = stepper.observe(step, i + 1 == traj.steps.size());
    if (charge_probes) probe_tokens += step.probe_overhead_tokens;
    if (!report.decision.stop()) continue;

    out.stop_step = report.step;
    out.reason = report.decision.reason;
    if (out.reason == StopReason::BudgetExhausted) {
      out.reasoning_tokens = traj.total_reasoning_tokens;
      out.correct = traj.final_correct;
    } else {
      out.reasoning_tokens = step.token_pos;
      out.correct = step.answer_correct;
    }
    out.cost_tokens = out.reasoning_tokens + probe_tokens;
    return out;
  }
  // Unreachable for a validated trajectory: the last step always stops.
  throw ValidationError("trajectory has no steps", "steps", traj.id);
}

double compression_rate(double tok_method, double tok_vanilla) {
  if (!(tok_vanilla > 0.0)) {
    throw ValidationError("vanilla token count must be positive", "tok_vanilla");
  }
  return 100.0 * tok_method / tok_vanilla;
}

double round1(double x) { return std::round(x * 10.0) / 10.0; }

MetricsReport aggregate(std::vector<MetricsRow> rows) {
  if (rows.empty()) throw ValidationError("no benchmark rows to aggregate");
  MetricsReport report;
  MetricsRow& all = report.overall;
  all.benchmark = "overall";
  for (const auto& r : rows) {
    all.n += r.n;
    all.acc += r.acc;
    all.tok += r.tok;
    all.cr += r.cr;
    all.cost += r.cost;
  }
  const double k = static_cast<double>(rows.size());
  all.acc /= k;
  all.tok /= k;
  all.cr /= k;
  all.cost /= k;
  report.rows = std::move(rows);
  return report;
}

std::vector<MetricsRow> benchmark_rows(std::span<const StopOutcome> outcomes,
                                       std::span<const Trajectory> corpus) {
  std::map<std::string, std::vector<const StopOutcome*>> by_bench;
  for (const auto& o : outcomes) by_bench[o.benchmark].push_back(&o);
  std::map<std::string, std::vector<const Trajectory*>> corpus_by_bench;
  for (const auto& t : corpus) corpus_by_bench[t.benchmark].push_back(&t);

  std::vector<MetricsRow> rows;
  for (auto& [bench, group] : by_bench) {
    std::sort(group.begin(), group.end(),
              [](const StopOutcome* a, const StopOutcome* b) {
                return a->trajectory_id < b->trajectory_id;
              });
    auto ref = corpus_by_bench.find(bench);
    if (ref == corpus_by_bench.end()) {
      throw ValidationError("benchmark missing from corpus", "benchmark");
    }
    auto& trajs = ref->second;
    std::sort(trajs.begin(), trajs.end(),
              [](const Trajectory* a, const Trajectory* b) { return a->id < b->id; });

    double correct = 0, tok = 0, cost = 0, vanilla = 0;
    for (const StopOutcome* o : group) {
      correct += o->correct ? 1.0 : 0.0;
      tok += static_cast<double>(o->reasoning_tokens);
      cost += static_cast<double>(o->cost_tokens);
    }
    for (const Trajectory* t : trajs) {
      vanilla += static_cast<double>(t->total_reasoning_tokens);
    }
    const double n = static_cast<double>(group.size());
    MetricsRow row;
    row.benchmark = bench;
    row.n = group.size();
    row.acc = 100.0 * correct / n;
    row.tok = tok / n;
    row.cost = cost / n;
    row.cr = compression_rate(row.tok, vanilla / static_cast<double>(trajs.size()));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<StopOutcome> replay(std::span<const Trajectory> corpus,
                                const PolicyConfig& cfg,
                                ReplayOptions options) {
  validate(cfg);
  std::vector<StopOutcome> out(corpus.size());
  parallel_for(corpus.size(), options.threads,
               [&](std::size_t i) { out[i] = run_policy(corpus[i], cfg); });
  return out;
}

MetricsReport evaluate(std::span<const Trajectory> corpus,
                       const PolicyConfig& cfg, ReplayOptions options) {
  const auto outcomes = replay(corpus, cfg, options);
  MetricsReport report = aggregate(benchmark_rows(outcomes, corpus));
  report.method = method_name(cfg);
  report.config = cfg;
  return report;
}

ClassTokenMeans class_token_means(std::span<const StopOutcome> outcomes) {
  std::vector<const StopOutcome*> sorted;
  sorted.reserve(outcomes.size());
  for (const auto& o : outcomes) sorted.push_back(&o);
  std::sort(sorted.begin(), sorted.end(),
            [](const StopOutcome* a, const StopOutcome* b) {
              return a->trajectory_id < b->trajectory_id;
            });
  ClassTokenMeans m;
  for (const StopOutcome* o : sorted) {
    if (o->final_correct) {
      m.correct += static_cast<double>(o->reasoning_tokens);
      ++m.n_correct;
    } else {
      m.incorrect += static_cast<double>(o->reasoning_tokens);
      ++m.n_incorrect;
    }
  }
  if (m.n_correct) m.correct /= static_cast<double>(m.n_correct);
  if (m.n_incorrect) m.incorrect /= static_cast<double>(m.n_incorrect);
  return m;
}

std::vector<SweepRow> sweep(std::span<const Trajectory> corpus,
                            std::span<const PolicyConfig> grid,
                            ReplayOptions options) {
  if (grid.empty()) throw ValidationError("sweep grid is empty", "grid");
  for (const auto& cfg : grid) validate(cfg);
  std::vector<SweepRow> rows;
  rows.reserve(grid.size());
  for (const auto& cfg : grid) {
    rows.push_back({cfg, evaluate(corpus, cfg, options)});
  }
  return rows;
}

std::vector<ParetoPoint> pareto_frontier(std::span<const ParetoPoint> rows) {
  std::vector<ParetoPoint> sorted(rows.begin(), rows.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ParetoPoint& a, const ParetoPoint& b) {
                     return a.cost < b.cost;
                   });
  std::vector<ParetoPoint> out;
  double best_cheaper = -kInfinity;  // best acc among strictly cheaper rows
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    double group_best = -kInfinity;
    while (j < sorted.size() && sorted[j].cost == sorted[i].cost) {
      group_best = std::max(group_best, sorted[j].acc);
      ++j;
    }
    for (std::size_t m = i; m < j; ++m) {
      const bool dominated =
          sorted[m].acc < group_best || sorted[m].acc <= best_cheaper;
      if (!dominated) out.push_back(sorted[m]);
    }
    best_cheaper = std::max(best_cheaper, group_best);
    i = j;
  }
  return out;
}

std::vector<ParetoPoint> pareto_points(std::span<const SweepRow> rows) {
  std::vector<ParetoPoint> points;
  points.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    points.push_back({i, rows[i].report.overall.acc, rows[i].report.overall.cost});
  }
  return points;
}

std::string method_name(const PolicyConfig& cfg) {
  return std::string(to_string(cfg.rule));
}

std::string report_to_json(const MetricsReport& report) {
  return report_json(report).dump(2) + "\n";
}

std::string report_to_csv(std::span<const MetricsReport> reports) {
  std::string out = "method,benchmark,acc,tok,cr,cost\n";
  for (const auto& r : reports) {
    for (const auto& row : r.rows) out += csv_row(r.method, row);
    out += csv_row(r.method, r.overall);
  }
  return out;
}

std::string sweep_to_csv(std::span<const SweepRow> rows,
                         std::span<const ParetoPoint> subset) {
  std::string out =
      "config_id,rule,v_variant,w_variant,steps,r_min,r_max,tau,delta,"
      "deer_threshold,fixed_step_cap,convergence_window,acc,tok,cr,cost\n";
  for (const auto& p : subset) {
    const PolicyConfig& c = rows[p.index].config;
    const MetricsRow& m = rows[p.index].report.overall;
    out += std::to_string(p.index) + "," + std::string(to_string(c.rule)) + "," +
           std::string(to_string(c.v_variant)) + "," +
           std::string(to_string(c.w_variant)) + "," +
           std::to_string(c.ramp_steps) + "," + fmt_param(c.r_min) + "," +
           fmt_param(c.r_max) + "," + fmt_param(c.tau) + "," +
           fmt_param(c.delta) + "," + fmt_param(c.deer_threshold) + "," +
           std::to_string(c.fixed_step_cap) + "," +
           std::to_string(c.convergence_window) + "," + fmt1(m.acc) + "," +
           fmt1(m.tok) + "," + fmt1(m.cr) + "," + fmt1(m.cost) + "\n";
  }
  return out;
}

std::string sweep_to_csv(std::span<const SweepRow> rows) {
  std::vector<ParetoPoint> all;
  all.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) all.push_back({i, 0.0, 0.0});
  return sweep_to_csv(rows, all);
}

std::string sweep_to_json(std::span<const SweepRow> rows) {
  ordered_json arr = ordered_json::array();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ordered_json j = report_json(rows[i].report);
    j["config_id"] = i;
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

}  // namespace codestop

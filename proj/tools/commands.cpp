#include "commands.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <condition_variable>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "codestop/errors.hpp"
#include "codestop/eval.hpp"
#include "codestop/sidecar.hpp"
#include "codestop/synthgen.hpp"
#include "codestop/trace_io.hpp"

namespace codestop::cli {

namespace {

namespace fs = std::filesystem;

// Policy flags; the sweep variant takes comma lists.
struct PolicyFlags {
  std::string rule = "codestop";
  std::string v_variant = "trend_aware";
  std::string w_variant = "log";
  std::string steps = "5";
  std::string r_min = "0.0";
  std::string r_max = "0.95";
  std::string tau = "7.1";
  std::string delta = "0.55";
  std::string deer_threshold = "0.95";
  std::string fixed_step_cap = "40";
  std::string window = "3";
};

void add_policy_flags(CLI::App& app, PolicyFlags& f) {
  app.add_option("--rule", f.rule,
                 "codestop | deer | deer_fixed_step | answer_convergence | vanilla")
      ->capture_default_str();
  app.add_option("--v-variant", f.v_variant,
                 "trend_aware | low_confidence | confidence_complement | confidence_drop")
      ->capture_default_str();
  app.add_option("--w-variant", f.w_variant,
                 "log | uniform | log_inverse | normalized_log")
      ->capture_default_str();
  app.add_option("--steps", f.steps, "ramp length of the confidence threshold")
      ->capture_default_str();
  app.add_option("--r-min", f.r_min, "threshold at the start of the ramp")
      ->capture_default_str();
  app.add_option("--r-max", f.r_max, "threshold after the ramp")
      ->capture_default_str();
  app.add_option("--tau", f.tau, "degeneration threshold (inf disables)")
      ->capture_default_str();
  app.add_option("--delta", f.delta, "instability threshold")
      ->capture_default_str();
  app.add_option("--deer-threshold", f.deer_threshold,
                 "fixed confidence threshold for deer rules")
      ->capture_default_str();
  app.add_option("--fixed-step-cap", f.fixed_step_cap,
                 "step cap for deer_fixed_step")
      ->capture_default_str();
  app.add_option("--window", f.window, "answer_convergence window")
      ->capture_default_str();
}

// CODESTOP_<FLAG> environment overrides for every long option.
void add_env_overrides(CLI::App& app) {
  for (CLI::Option* opt : app.get_options()) {
    const auto& names = opt->get_lnames();
    if (names.empty() || names.front() == "help") continue;
    std::string env = "CODESTOP_" + names.front();
    for (char& c : env) {
      c = c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    opt->envname(env);
  }
}

std::vector<std::string> split_list(const std::string& text, const char* flag) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  if (out.empty()) {
    throw CLI::ValidationError(std::string(flag), "empty value list");
  }
  return out;
}

double to_real(const std::string& s, const char* flag) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw CLI::ValidationError(std::string(flag), "not a number: " + s);
}

int to_int(const std::string& s, const char* flag) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw CLI::ValidationError(std::string(flag), "not an integer: " + s);
}

template <typename T, typename Fn>
std::vector<T> parse_list(const std::string& text, const char* flag, Fn fn) {
  std::vector<T> out;
  for (const auto& item : split_list(text, flag)) out.push_back(fn(item, flag));
  return out;
}

// Unknown enum names are usage errors, not data errors.
template <typename Parse>
auto as_flag(Parse parse) {
  return [parse](const std::string& s, const char* flag) {
    try {
      return parse(s);
    } catch (const Error& e) {
      throw CLI::ValidationError(std::string(flag), e.message());
    }
  };
}

/// Cartesian product in a fixed order (tau varies fastest).
std::vector<PolicyConfig> build_grid(const PolicyFlags& f) {
  const Rule rule = as_flag(parse_rule)(f.rule, "--rule");
  auto vs = parse_list<InstabilityVariant>(f.v_variant, "--v-variant",
                                           as_flag(parse_instability_variant));
  auto ws = parse_list<WeightVariant>(f.w_variant, "--w-variant",
                                      as_flag(parse_weight_variant));
  auto steps = parse_list<int>(f.steps, "--steps", to_int);
  auto r_mins = parse_list<double>(f.r_min, "--r-min", to_real);
  auto r_maxs = parse_list<double>(f.r_max, "--r-max", to_real);
  auto deltas = parse_list<double>(f.delta, "--delta", to_real);
  auto deers = parse_list<double>(f.deer_threshold, "--deer-threshold", to_real);
  auto caps = parse_list<int>(f.fixed_step_cap, "--fixed-step-cap", to_int);
  auto windows = parse_list<int>(f.window, "--window", to_int);
  auto taus = parse_list<double>(f.tau, "--tau", to_real);

  std::vector<PolicyConfig> grid;
  for (auto v : vs)
    for (auto w : ws)
      for (int s : steps)
        for (double lo : r_mins)
          for (double hi : r_maxs)
            for (double d : deltas)
              for (double dt : deers)
                for (int cap : caps)
                  for (int win : windows)
                    for (double t : taus) {
                      PolicyConfig c;
                      c.rule = rule;
                      c.v_variant = v;
                      c.w_variant = w;
                      c.ramp_steps = s;
                      c.r_min = lo;
                      c.r_max = hi;
                      c.delta = d;
                      c.deer_threshold = dt;
                      c.fixed_step_cap = cap;
                      c.convergence_window = win;
                      c.tau = t;
                      validate(c);
                      grid.push_back(c);
                    }
  return grid;
}

void print_report(std::ostream& out, const MetricsReport& r) {
  char line[160];
  std::snprintf(line, sizeof line, "%-12s %6s %8s %10s %7s %10s\n", "benchmark",
                "n", "acc", "tok", "cr", "cost");
  out << "method: " << r.method << "\n" << line;
  auto row = [&](const MetricsRow& m) {
    std::snprintf(line, sizeof line, "%-12s %6zu %8.1f %10.1f %7.1f %10.1f\n",
                  m.benchmark.c_str(), m.n, round1(m.acc), round1(m.tok),
                  round1(m.cr), round1(m.cost));
    out << line;
  };
  for (const auto& m : r.rows) row(m);
  row(r.overall);
}

// Writes every file or none of them.
void write_all(const std::vector<std::pair<fs::path, std::string>>& files) {
  std::vector<fs::path> written;
  try {
    for (const auto& [path, contents] : files) {
      write_file_atomic(path, contents);
      written.push_back(path);
    }
  } catch (...) {
    std::error_code ec;
    for (const auto& p : written) fs::remove(p, ec);
    throw;
  }
}

fs::path with_suffix(const std::string& prefix, const std::string& suffix) {
  return fs::path(prefix + suffix);
}

// --- serve ------------------------------------------------------------------

std::atomic<TcpServer*> g_server{nullptr};

extern "C" void on_signal(int) {
  if (TcpServer* s = g_server.load()) s->stop();
}

struct ServeFlags {
  std::string listen;
  double idle_timeout_s = 600.0;
  std::size_t max_sessions = 10000;
};

int serve(const ServeFlags& f, std::istream& in, std::ostream& out,
          std::ostream& err) {
  SidecarOptions options;
  options.idle_timeout = std::chrono::milliseconds(
      static_cast<std::int64_t>(f.idle_timeout_s * 1000.0));
  options.max_sessions = f.max_sessions;
  SessionManager manager(options);

  if (f.listen.empty()) {
    serve_stdio(manager, in, out);
    return kExitOk;
  }

  std::string host = "127.0.0.1";
  std::string port_text = f.listen;
  if (auto colon = f.listen.rfind(':'); colon != std::string::npos) {
    host = f.listen.substr(0, colon);
    port_text = f.listen.substr(colon + 1);
  }
  const int port = to_int(port_text, "--listen");
  if (port < 0 || port > 65535) {
    throw CLI::ValidationError("--listen", "port out of range");
  }

  TcpServer server(manager, host, static_cast<std::uint16_t>(port));
  server.bind();
  err << "codestop sidecar listening on " << host << ":" << server.port()
      << std::endl;

  std::mutex mu;
  std::condition_variable cv;
  bool done = false;
  std::thread janitor([&] {
    std::unique_lock lock(mu);
    while (!cv.wait_for(lock, std::chrono::seconds(1), [&] { return done; })) {
      manager.expire_idle();
    }
  });

  g_server.store(&server);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.run();
  g_server.store(nullptr);

  {
    std::lock_guard lock(mu);
    done = true;
  }
  cv.notify_all();
  janitor.join();
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in,
        std::ostream& out, std::ostream& err) {
  CLI::App app{"Confidence-dynamics early stopping: replay, sweep, generate, serve",
               "codestop"};
  app.require_subcommand(1);

  // replay
  PolicyFlags replay_flags;
  std::string replay_trace, replay_out = "report";
  unsigned threads = 0;
  CLI::App* replay_cmd =
      app.add_subcommand("replay", "replay a policy over a trace corpus");
  replay_cmd->add_option("--trace", replay_trace, "input JSONL trace")->required();
  replay_cmd->add_option("--out", replay_out,
                         "output prefix; writes <out>.json and <out>.csv")
      ->capture_default_str();
  replay_cmd->add_option("--threads", threads, "worker threads (0 = all cores)");
  add_policy_flags(*replay_cmd, replay_flags);
  add_env_overrides(*replay_cmd);

  // sweep
  PolicyFlags sweep_flags;
  std::string sweep_trace, sweep_out = "sweep";
  CLI::App* sweep_cmd = app.add_subcommand(
      "sweep", "evaluate a grid of configs (comma lists) and its Pareto frontier");
  sweep_cmd->add_option("--trace", sweep_trace, "input JSONL trace")->required();
  sweep_cmd->add_option("--out", sweep_out,
                        "output prefix; writes <out>_sweep.csv, "
                        "<out>_frontier.csv and <out>_sweep.json")
      ->capture_default_str();
  sweep_cmd->add_option("--threads", threads, "worker threads (0 = all cores)");
  add_policy_flags(*sweep_cmd, sweep_flags);
  add_env_overrides(*sweep_cmd);

  // generate
  GeneratorParams gen;
  std::string gen_out, gen_benchmarks = "aime,math500,gsm8k,gpqa";
  CLI::App* gen_cmd =
      app.add_subcommand("generate", "write a seeded synthetic trace corpus");
  gen_cmd->add_option("--out", gen_out, "output JSONL path")->required();
  gen_cmd->add_option("--n", gen.n_trajectories, "number of trajectories")
      ->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "RNG seed")->capture_default_str();
  gen_cmd->add_option("--p-correct", gen.p_correct,
                      "probability of a correct-class trajectory")
      ->capture_default_str();
  gen_cmd->add_option("--correct-len-mean", gen.correct_len_mean)->capture_default_str();
  gen_cmd->add_option("--correct-len-dispersion", gen.correct_len_dispersion)
      ->capture_default_str();
  gen_cmd->add_option("--incorrect-len-scale", gen.incorrect_len_scale)
      ->capture_default_str();
  gen_cmd->add_option("--incorrect-len-shape", gen.incorrect_len_shape)
      ->capture_default_str();
  gen_cmd->add_option("--rise-rate", gen.rise_rate)->capture_default_str();
  gen_cmd->add_option("--noise-sd", gen.noise_sd)->capture_default_str();
  gen_cmd->add_option("--incorrect-level", gen.incorrect_level)->capture_default_str();
  gen_cmd->add_option("--incorrect-noise-sd", gen.incorrect_noise_sd)
      ->capture_default_str();
  gen_cmd->add_option("--late-rise", gen.late_rise)->capture_default_str();
  gen_cmd->add_option("--tokens-per-step", gen.tokens_per_step)->capture_default_str();
  gen_cmd->add_option("--probe-overhead", gen.probe_overhead)->capture_default_str();
  gen_cmd->add_option("--budget-tokens", gen.budget_tokens)->capture_default_str();
  gen_cmd->add_option("--benchmarks", gen_benchmarks, "comma list")
      ->capture_default_str();
  gen_cmd->add_option("--model", gen.model)->capture_default_str();
  gen_cmd->add_option("--prompt-variant", gen.prompt_variant)->capture_default_str();
  add_env_overrides(*gen_cmd);

  // serve
  ServeFlags serve_flags;
  CLI::App* serve_cmd =
      app.add_subcommand("serve", "run the stop/continue decision sidecar");
  serve_cmd->add_option("--listen", serve_flags.listen,
                        "host:port for TCP; stdin/stdout when omitted");
  serve_cmd->add_option("--idle-timeout", serve_flags.idle_timeout_s,
                        "seconds before an idle session expires")
      ->capture_default_str();
  serve_cmd->add_option("--max-sessions", serve_flags.max_sessions)
      ->capture_default_str();
  add_env_overrides(*serve_cmd);

  std::vector<std::string> argv_storage;
  argv_storage.reserve(args.size() + 1);
  argv_storage.push_back("codestop");
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*replay_cmd) {
      const auto grid = build_grid(replay_flags);
      if (grid.size() != 1) {
        throw CLI::ValidationError("replay", "takes a single config; use sweep");
      }
      const auto corpus = read_trace(replay_trace);
      if (corpus.empty()) throw ValidationError("trace has no trajectories");
      const MetricsReport report = evaluate(corpus, grid.front(), {threads});
      const MetricsReport reports[] = {report};
      write_all({{with_suffix(replay_out, ".json"), report_to_json(report)},
                 {with_suffix(replay_out, ".csv"), report_to_csv(reports)}});
      print_report(out, report);
      return kExitOk;
    }
    if (*sweep_cmd) {
      const auto grid = build_grid(sweep_flags);
      const auto corpus = read_trace(sweep_trace);
      if (corpus.empty()) throw ValidationError("trace has no trajectories");
      const auto rows = sweep(corpus, grid, {threads});
      const auto frontier = pareto_frontier(pareto_points(rows));
      write_all({{with_suffix(sweep_out, "_sweep.csv"), sweep_to_csv(rows)},
                 {with_suffix(sweep_out, "_frontier.csv"),
                  sweep_to_csv(rows, frontier)},
                 {with_suffix(sweep_out, "_sweep.json"), sweep_to_json(rows)}});
      out << "configs: " << rows.size() << "\nfrontier: " << frontier.size()
          << "\n";
      return kExitOk;
    }
    if (*gen_cmd) {
      gen.benchmarks = split_list(gen_benchmarks, "--benchmarks");
      const auto corpus = generate_corpus(gen);
      TraceHeader header;
      header.producer = "codestop generate seed=" + std::to_string(gen.seed);
      header.benchmarks = gen.benchmarks;
      write_trace(corpus, fs::path(gen_out), header);
      const CorpusSummary s = summarize(corpus);
      char buf[256];
      std::snprintf(buf, sizeof buf,
                    "trajectories: %zu\ncorrect: %zu\nincorrect: %zu\n"
                    "mean_tokens_correct: %.1f\nmean_tokens_incorrect: %.1f\n"
                    "mean_steps_correct: %.2f\nmean_steps_incorrect: %.2f\n",
                    s.trajectories, s.correct, s.incorrect,
                    s.mean_tokens_correct, s.mean_tokens_incorrect,
                    s.mean_steps_correct, s.mean_steps_incorrect);
      out << buf;
      return kExitOk;
    }
    if (*serve_cmd) return serve(serve_flags, in, out, err);
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitUsage;
}

}  // namespace codestop::cli

#include "codestop/trace_io.hpp"

#include <unistd.h>

#include <cmath>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>
#include <system_error>
#include <unordered_set>

#include "codestop/errors.hpp"

namespace codestop {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr std::string_view kPromptVariants[] = {"vanilla", "budget_force",
                                                "cod", "no_thinking"};

// Field accessors that report the offending path and trajectory id.
struct FieldReader {
  const json& obj;
  std::string prefix;
  const std::string& traj_id;
  std::size_t line;

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw ValidationError(msg, prefix + key, traj_id, line);
  }

  const json& at(const std::string& key) const {
    auto it = obj.find(key);
    if (it == obj.end()) fail(key, "missing field");
    return *it;
  }

  std::string str(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_string()) fail(key, "expected a string");
    return v.get<std::string>();
  }

  TokenCount integer(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_number_integer()) fail(key, "expected an integer");
    return v.get<TokenCount>();
  }

  double real(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_number()) fail(key, "expected a number");
    return v.get<double>();
  }

  bool boolean(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_boolean()) fail(key, "expected a boolean");
    return v.get<bool>();
  }
};

json parse_object(std::string_view line, std::size_t line_no) {
  json j = json::parse(line.begin(), line.end(), nullptr, false);
  if (j.is_discarded()) throw ParseError("malformed JSON", line_no);
  if (!j.is_object()) throw ParseError("expected a JSON object", line_no);
  return j;
}

bool blank(std::string_view line) {
  return line.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

std::string step_path(std::size_t i) {
  return "steps[" + std::to_string(i) + "].";
}

}  // namespace

void validate(const Trajectory& traj) {
  auto fail = [&](const std::string& field, const std::string& msg) {
    throw ValidationError(msg, field, traj.id);
  };
  if (traj.id.empty()) fail("id", "id must be nonempty");
  bool known_variant = false;
  for (auto v : kPromptVariants) known_variant |= (v == traj.prompt_variant);
  if (!known_variant) fail("prompt_variant", "unknown prompt_variant");
  if (traj.steps.empty()) fail("steps", "steps must be nonempty");

  TokenCount prev = 0;
  for (std::size_t i = 0; i < traj.steps.size(); ++i) {
    const StepObservation& s = traj.steps[i];
    const std::string p = step_path(i);
    if (s.step_index != static_cast<int>(i + 1))
      fail(p + "step_index", "step_index does not match position");
    if (!std::isfinite(s.confidence) || s.confidence < 0.0 ||
        s.confidence > 1.0)
      fail(p + "confidence", "confidence out of range");
    if (s.token_pos < 1) fail(p + "token_pos", "token_pos must be >= 1");
    if (i > 0 && s.token_pos <= prev)
      fail(p + "token_pos", "token_pos not strictly increasing");
    if (s.probe_overhead_tokens < 0)
      fail(p + "probe_overhead_tokens", "probe_overhead_tokens is negative");
    prev = s.token_pos;
  }
  if (traj.total_reasoning_tokens < prev)
    fail("total_reasoning_tokens",
         "total_reasoning_tokens is below the last step's token_pos");
  if (traj.budget_tokens < traj.total_reasoning_tokens)
    fail("budget_tokens", "budget_tokens is below total_reasoning_tokens");
}

Trajectory parse_trace_line(std::string_view line, std::size_t line_no) {
  const json j = parse_object(line, line_no);

  Trajectory traj;
  // Pick up the id first so later errors can name the trajectory.
  if (auto it = j.find("id"); it != j.end() && it->is_string()) {
    traj.id = it->get<std::string>();
  }
  const FieldReader r{j, "", traj.id, line_no};
  traj.id = r.str("id");
  traj.benchmark = r.str("benchmark");
  traj.model = r.str("model");
  traj.prompt_variant = r.str("prompt_variant");
  traj.budget_tokens = r.integer("budget_tokens");
  traj.total_reasoning_tokens = r.integer("total_reasoning_tokens");
  traj.final_correct = r.boolean("final_correct");

  const json& steps = r.at("steps");
  if (!steps.is_array()) r.fail("steps", "expected an array");
  traj.steps.reserve(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const json& sj = steps[i];
    if (!sj.is_object())
      throw ValidationError("expected an object", "steps[" + std::to_string(i) + "]",
                            traj.id, line_no);
    const FieldReader sr{sj, step_path(i), traj.id, line_no};
    StepObservation s;
    s.step_index = static_cast<int>(sr.integer("step_index"));
    s.token_pos = sr.integer("token_pos");
    s.confidence = sr.real("confidence");
    s.intermediate_answer = sr.str("intermediate_answer");
    s.answer_correct = sr.boolean("answer_correct");
    s.probe_overhead_tokens = sr.integer("probe_overhead_tokens");
    traj.steps.push_back(std::move(s));
  }

  try {
    validate(traj);
  } catch (const ValidationError& e) {
    throw ValidationError(e.message(), e.field(), traj.id, line_no);
  }
  return traj;
}

TraceHeader parse_trace_header(std::string_view line, std::size_t line_no) {
  const json j = parse_object(line, line_no);
  auto kind = j.find("kind");
  if (kind == j.end() || !kind->is_string() ||
      kind->get<std::string>() != kTraceKind) {
    throw ParseError("missing trace header (kind must be \"codestop-trace\")",
                     line_no);
  }
  auto version = j.find("format_version");
  if (version == j.end() || !version->is_number_integer()) {
    throw ParseError("header lacks an integer format_version", line_no);
  }
  TraceHeader header;
  header.format_version = version->get<int>();
  if (header.format_version != kTraceFormatVersion) {
    throw ParseError("unsupported format_version " +
                         std::to_string(header.format_version),
                     line_no);
  }
  if (auto it = j.find("producer"); it != j.end() && it->is_string()) {
    header.producer = it->get<std::string>();
  }
  if (auto it = j.find("benchmarks"); it != j.end() && it->is_array()) {
    for (const auto& b : *it) {
      if (b.is_string()) header.benchmarks.push_back(b.get<std::string>());
    }
  }
  return header;
}

std::string serialize_header(const TraceHeader& header) {
  ordered_json j;
  j["format_version"] = header.format_version;
  j["kind"] = kTraceKind;
  j["producer"] = header.producer;
  j["benchmarks"] = header.benchmarks;
  return j.dump();
}

std::string serialize_trajectory(const Trajectory& traj) {
  ordered_json j;
  j["id"] = traj.id;
  j["benchmark"] = traj.benchmark;
  j["model"] = traj.model;
  j["prompt_variant"] = traj.prompt_variant;
  j["budget_tokens"] = traj.budget_tokens;
  j["total_reasoning_tokens"] = traj.total_reasoning_tokens;
  j["final_correct"] = traj.final_correct;
  ordered_json steps = ordered_json::array();
  for (const auto& s : traj.steps) {
    ordered_json sj;
    sj["step_index"] = s.step_index;
    sj["token_pos"] = s.token_pos;
    sj["confidence"] = s.confidence;
    sj["intermediate_answer"] = s.intermediate_answer;
    sj["answer_correct"] = s.answer_correct;
    sj["probe_overhead_tokens"] = s.probe_overhead_tokens;
    steps.push_back(std::move(sj));
  }
  j["steps"] = std::move(steps);
  return j.dump();
}

TraceReader::TraceReader(const std::filesystem::path& path) : in_(path) {
  if (!in_) throw IoError("cannot open trace file " + path.string());
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    if (blank(line)) continue;
    header_ = parse_trace_header(line, line_);
    return;
  }
  throw ParseError("empty trace file (no header)", line_ == 0 ? 1 : line_);
}

std::optional<Trajectory> TraceReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    if (blank(line)) continue;
    return parse_trace_line(line, line_);
  }
  if (in_.bad()) throw IoError("read error after line " + std::to_string(line_));
  return std::nullopt;
}

std::vector<Trajectory> read_trace(const std::filesystem::path& path) {
  TraceReader reader(path);
  std::vector<Trajectory> out;
  std::unordered_set<std::string> ids;
  while (auto traj = reader.next()) {
    if (!ids.insert(traj->id).second) {
      throw ValidationError("duplicate trajectory id", "id", traj->id,
                            reader.line());
    }
    out.push_back(std::move(*traj));
  }
  return out;
}

std::vector<std::string> benchmarks_of(std::span<const Trajectory> corpus) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& t : corpus) {
    if (seen.insert(t.benchmark).second) out.push_back(t.benchmark);
  }
  return out;
}

std::size_t write_trace(std::span<const Trajectory> trajectories,
                        std::ostream& out, TraceHeader header) {
  for (const auto& t : trajectories) validate(t);
  if (header.benchmarks.empty()) header.benchmarks = benchmarks_of(trajectories);
  out << serialize_header(header) << '\n';
  for (const auto& t : trajectories) out << serialize_trajectory(t) << '\n';
  if (!out) throw IoError("write failed");
  return trajectories.size();
}

std::size_t write_trace(std::span<const Trajectory> trajectories,
                        const std::filesystem::path& destination,
                        TraceHeader header) {
  std::ostringstream buffer;
  const std::size_t n = write_trace(trajectories, buffer, std::move(header));
  write_file_atomic(destination, buffer.str());
  return n;
}

void write_file_atomic(const std::filesystem::path& path,
                       std::string_view contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("write failed for " + path.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    const std::string reason = ec.message();
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot write " + path.string() + ": " + reason);
  }
}

}  // namespace codestop

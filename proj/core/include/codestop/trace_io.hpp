#pragma once

// Versioned JSONL trajectory traces.
//
// Line 1 is a header:
//   {"format_version":1,"kind":"codestop-trace","producer":"...","benchmarks":[...]}
// Every following non-blank line is one trajectory object with the keys
//   id, benchmark, model, prompt_variant, budget_tokens,
//   total_reasoning_tokens, final_correct, steps
// where each step has
//   step_index, token_pos, confidence, intermediate_answer, answer_correct,
//   probe_overhead_tokens.
// Unknown keys are ignored on read.

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "codestop/types.hpp"

namespace codestop {

inline constexpr int kTraceFormatVersion = 1;
inline constexpr std::string_view kTraceKind = "codestop-trace";

struct TraceHeader {
  int format_version = kTraceFormatVersion;
  std::string producer = "codestop";
  std::vector<std::string> benchmarks;
};

/// Structural and range checks on a trajectory. Throws ValidationError with
/// the trajectory id and a field path such as "steps[2].token_pos".
void validate(const Trajectory& traj);

/// Parses and validates one body line. `line_no` is only used for messages.
Trajectory parse_trace_line(std::string_view line, std::size_t line_no = 0);

/// Parses the header line; throws ParseError on a wrong kind or version.
TraceHeader parse_trace_header(std::string_view line, std::size_t line_no = 1);

std::string serialize_header(const TraceHeader& header);
std::string serialize_trajectory(const Trajectory& traj);

/// Line-at-a-time reader; memory use does not depend on file length.
class TraceReader {
 public:
  explicit TraceReader(const std::filesystem::path& path);

  const TraceHeader& header() const { return header_; }
  /// Next trajectory, or nullopt at end of file.
  std::optional<Trajectory> next();
  std::size_t line() const { return line_; }

 private:
  std::ifstream in_;
  TraceHeader header_;
  std::size_t line_ = 0;
};

/// Reads a whole corpus, failing on the first bad line.
std::vector<Trajectory> read_trace(const std::filesystem::path& path);

/// Writes header + one line per trajectory; returns the number of
/// trajectories written. Every trajectory is validated first.
std::size_t write_trace(std::span<const Trajectory> trajectories,
                        std::ostream& out, TraceHeader header = {});

/// File variant. Writes to a sibling temporary and renames it into place,
/// so a failure never leaves a partial file. Throws IoError.
std::size_t write_trace(std::span<const Trajectory> trajectories,
                        const std::filesystem::path& destination,
                        TraceHeader header = {});

/// Benchmarks in first-appearance order.
std::vector<std::string> benchmarks_of(std::span<const Trajectory> corpus);

/// Replaces `path` atomically with `contents`. Throws IoError.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view contents);

}  // namespace codestop

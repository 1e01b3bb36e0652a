#include "codestop/errors.hpp"

namespace codestop {

Error::Error(ErrorKind kind, std::string message, std::string field,
             std::string trajectory_id, std::size_t line)
    : std::runtime_error(render(message, field, trajectory_id, line)),
      kind_(kind),
      message_(std::move(message)),
      field_(std::move(field)),
      trajectory_id_(std::move(trajectory_id)),
      line_(line) {}

std::string Error::render(const std::string& message, const std::string& field,
                          const std::string& trajectory_id, std::size_t line) {
  std::string out;
  if (line != 0) out += "line " + std::to_string(line) + ": ";
  if (!trajectory_id.empty()) out += "trajectory '" + trajectory_id + "': ";
  out += message;
  if (!field.empty()) out += " (field " + field + ")";
  return out;
}

}  // namespace codestop

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace codestop {

enum class ErrorKind { Validation, Parse, Io };

/// Base error. `field` is a dotted/indexed path such as "steps[3].confidence";
/// `trajectory_id` and `line` are filled in when the error comes from a trace.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string message, std::string field = {},
        std::string trajectory_id = {}, std::size_t line = 0);

  ErrorKind kind() const { return kind_; }
  const std::string& message() const { return message_; }
  const std::string& field() const { return field_; }
  const std::string& trajectory_id() const { return trajectory_id_; }
  std::size_t line() const { return line_; }

 private:
  static std::string render(const std::string& message,
                            const std::string& field,
                            const std::string& trajectory_id,
                            std::size_t line);

  ErrorKind kind_;
  std::string message_;
  std::string field_;
  std::string trajectory_id_;
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(std::string message, std::string field = {},
                           std::string trajectory_id = {}, std::size_t line = 0)
      : Error(ErrorKind::Validation, std::move(message), std::move(field),
              std::move(trajectory_id), line) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(std::string message, std::size_t line = 0)
      : Error(ErrorKind::Parse, std::move(message), {}, {}, line) {}
};

class IoError : public Error {
 public:
  explicit IoError(std::string message)
      : Error(ErrorKind::Io, std::move(message)) {}
};

}  // namespace codestop

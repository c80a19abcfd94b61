#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace omnifuse {

enum class ErrorKind {
  input,     // precondition violated by a caller-supplied value
  geometry,  // invalid array geometry
  parse,     // malformed file or script
  protocol,  // a backend answered, but with something unusable
  backend,   // a backend could not be reached or failed
  startup,   // the task could not begin
  config,    // invalid run configuration
  data,      // unreadable or inconsistent dataset content
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& m) : Error(ErrorKind::input, m) {}
};

class GeometryError : public Error {
 public:
  explicit GeometryError(const std::string& m) : Error(ErrorKind::geometry, m) {}
};

class ParseError : public Error {
 public:
  ParseError(const std::string& m, std::optional<std::size_t> line = std::nullopt)
      : Error(ErrorKind::parse, line ? m + " (line " + std::to_string(*line) + ")" : m), line_(line) {}
  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  std::optional<std::size_t> line_;
};

class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& m) : Error(ErrorKind::protocol, m) {}
};

class BackendError : public Error {
 public:
  BackendError(const std::string& m, std::optional<int> status = std::nullopt)
      : Error(ErrorKind::backend, m), status_(status) {}
  std::optional<int> status() const noexcept { return status_; }

 private:
  std::optional<int> status_;
};

class StartupError : public Error {
 public:
  explicit StartupError(const std::string& m) : Error(ErrorKind::startup, m) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& m) : Error(ErrorKind::config, m) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& m) : Error(ErrorKind::data, m) {}
};

/// Process exit codes used by the `fuse` tool.
enum class ExitCode : int { success = 0, failure = 1, config = 2, backend = 3, data = 4 };

ExitCode exit_code_for(ErrorKind kind) noexcept;

}  // namespace omnifuse

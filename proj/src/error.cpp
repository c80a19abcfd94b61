#include "omnifuse/error.hpp"

namespace omnifuse {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::input: return "input";
    case ErrorKind::geometry: return "geometry";
    case ErrorKind::parse: return "parse";
    case ErrorKind::protocol: return "protocol";
    case ErrorKind::backend: return "backend";
    case ErrorKind::startup: return "startup";
    case ErrorKind::config: return "config";
    case ErrorKind::data: return "data";
  }
  return "unknown";
}

ExitCode exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::config:
    case ErrorKind::geometry:
    case ErrorKind::parse:
      return ExitCode::config;
    case ErrorKind::backend:
    case ErrorKind::protocol:
    case ErrorKind::startup:
      return ExitCode::backend;
    case ErrorKind::data:
    case ErrorKind::input:
      return ExitCode::data;
  }
  return ExitCode::failure;
}

}  // namespace omnifuse

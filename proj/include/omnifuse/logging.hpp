#pragma once

#include <memory>

namespace spdlog {
class logger;
}

namespace omnifuse {

/// Shared stderr logger. Level comes from OMNIFUSE_LOG
/// (trace|debug|info|warn|error|off), default "info".
std::shared_ptr<spdlog::logger> logger();

}  // namespace omnifuse

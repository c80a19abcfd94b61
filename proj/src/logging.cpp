#include "omnifuse/logging.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <mutex>

namespace omnifuse {

std::shared_ptr<spdlog::logger> logger() {
  static std::once_flag once;
  static std::shared_ptr<spdlog::logger> instance;
  std::call_once(once, [] {
    instance = spdlog::stderr_color_mt("omnifuse");
    auto level = spdlog::level::info;
    if (const char* env = std::getenv("OMNIFUSE_LOG")) {
      level = spdlog::level::from_str(env);
    }
    instance->set_level(level);
    instance->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
  });
  return instance;
}

}  // namespace omnifuse

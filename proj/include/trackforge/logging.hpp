#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace trackforge {

enum class LogLevel : int { Debug = 0, Info = 1, Warn = 2, Error = 3, Off = 4 };

// Level comes from TRACKFORGE_LOG_LEVEL (debug|info|warn|error|off),
// defaulting to warn. Messages go to stderr; file outputs stay clean.
inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("TRACKFORGE_LOG_LEVEL");
    if (!env) return LogLevel::Warn;
    if (!std::strcmp(env, "debug")) return LogLevel::Debug;
    if (!std::strcmp(env, "info")) return LogLevel::Info;
    if (!std::strcmp(env, "warn")) return LogLevel::Warn;
    if (!std::strcmp(env, "error")) return LogLevel::Error;
    if (!std::strcmp(env, "off")) return LogLevel::Off;
    return LogLevel::Warn;
  }();
  return level;
}

}  // namespace trackforge

#define TF_LOG_AT(level, tag, ...)                                      \
  do {                                                                  \
    if (static_cast<int>(level) >= static_cast<int>(::trackforge::log_level())) { \
      std::fprintf(stderr, "[trackforge %s] ", tag);                    \
      std::fprintf(stderr, __VA_ARGS__);                                \
      std::fprintf(stderr, "\n");                                       \
    }                                                                   \
  } while (0)

#define TF_LOG_DEBUG(...) TF_LOG_AT(::trackforge::LogLevel::Debug, "debug", __VA_ARGS__)
#define TF_LOG_INFO(...) TF_LOG_AT(::trackforge::LogLevel::Info, "info", __VA_ARGS__)
#define TF_LOG_WARN(...) TF_LOG_AT(::trackforge::LogLevel::Warn, "warn", __VA_ARGS__)
#define TF_LOG_ERROR(...) TF_LOG_AT(::trackforge::LogLevel::Error, "error", __VA_ARGS__)

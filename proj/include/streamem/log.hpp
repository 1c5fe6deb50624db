#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

// Minimal stderr logger. Verbosity comes from the ONLINE_EM_LOG environment
// variable: error|warn|info|debug or 0..3. Default is warn.

namespace streamem::logging {

enum class Level : int { error = 0, warn = 1, info = 2, debug = 3 };

inline Level level() {
  static Level lv = [] {
    const char* env = std::getenv("ONLINE_EM_LOG");
    if (!env || !*env) return Level::warn;
    if (!std::strcmp(env, "error") || !std::strcmp(env, "0")) return Level::error;
    if (!std::strcmp(env, "warn") || !std::strcmp(env, "1")) return Level::warn;
    if (!std::strcmp(env, "info") || !std::strcmp(env, "2")) return Level::info;
    if (!std::strcmp(env, "debug") || !std::strcmp(env, "3")) return Level::debug;
    return Level::warn;
  }();
  return lv;
}

inline void log(Level lv, const std::string& msg) {
  if (static_cast<int>(lv) > static_cast<int>(level())) return;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::fprintf(stderr, "[%s] %s\n", names[static_cast<int>(lv)], msg.c_str());
}

inline void error(const std::string& msg) { log(Level::error, msg); }
inline void warn(const std::string& msg) { log(Level::warn, msg); }
inline void info(const std::string& msg) { log(Level::info, msg); }
inline void debug(const std::string& msg) { log(Level::debug, msg); }

}  // namespace streamem::logging

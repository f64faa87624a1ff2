#include "mealsense/util/log.h"

#include <atomic>
#include <iostream>
#include <mutex>

namespace mealsense::util {

namespace {
std::atomic<LogLevel> g_level{LogLevel::Warn};
std::mutex g_mu;
}  // namespace

void set_log_level(LogLevel level) { g_level = level; }
LogLevel log_level() { return g_level; }

void log(LogLevel level, const std::string& message) {
  if (level < g_level.load() || level == LogLevel::Off) return;
  static const char* names[] = {"debug", "info", "warn", "error"};
  std::lock_guard lock(g_mu);
  std::cerr << "[mealsense " << names[static_cast<int>(level)] << "] " << message << '\n';
}

}  // namespace mealsense::util

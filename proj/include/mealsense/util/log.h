#pragma once

#include <string>

namespace mealsense::util {

enum class LogLevel { Debug, Info, Warn, Error, Off };

void set_log_level(LogLevel level);
LogLevel log_level();
// One line to stderr, prefixed with the level.
void log(LogLevel level, const std::string& message);

}  // namespace mealsense::util

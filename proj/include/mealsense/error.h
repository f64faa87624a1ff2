#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mealsense {

enum class ErrorCode {
  EmptyStream,
  MalformedStream,
  UnsupportedRate,
  EmptyWindowSet,
  InvalidSignal,
  LayoutError,
  DegenerateDataset,
  InsufficientUsers,
  UndefinedAttitude,
  InvalidImage,
  ServiceUnavailable,
  ProtocolError,
  NoMealContent,
  EmptyDocument,
  DimensionError,
  NoKnowledge,
  InvalidArgument,
  Conflict,
  NotFound,
  Io,
};

std::string_view to_string(ErrorCode code);

// Base exception for every failure surfaced by the library. The code is the
// stable, machine-checkable part; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) {
    fail(code, message);
  }
}

}  // namespace mealsense

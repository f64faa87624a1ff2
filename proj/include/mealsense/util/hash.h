#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mealsense::util {

// 64-bit FNV-1a; incremental so callers can fold several fields in order.
class Fnv1a {
 public:
  void update(std::span<const std::byte> bytes);
  void update(std::string_view text);
  void update_u64(std::uint64_t value);
  void update_f64(double value);
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::uint64_t fnv1a(std::string_view text);

std::string to_hex(std::uint64_t value);

std::string base64_encode(std::span<const std::uint8_t> bytes);
// Standard alphabet with padding; whitespace is skipped. InvalidArgument on other junk.
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace mealsense::util

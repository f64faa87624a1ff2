#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "mealsense/error.h"

namespace mealsense::util {

// Little-endian fixed-width encoding; truncated input raises `on_error`.
inline void put_u64(std::ostream& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFFU));
}

inline std::uint64_t get_u64(std::istream& in, ErrorCode on_error) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    const int c = in.get();
    require(c != std::char_traits<char>::eof(), on_error, "truncated binary file");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

inline void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }
inline double get_f64(std::istream& in, ErrorCode on_error) { return std::bit_cast<double>(get_u64(in, on_error)); }

inline void put_string(std::ostream& out, const std::string& s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in, ErrorCode on_error, std::uint64_t max_size = 1ULL << 30) {
  const auto n = get_u64(in, on_error);
  require(n <= max_size, on_error, "implausible string length in binary file");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  require(static_cast<std::uint64_t>(in.gcount()) == n, on_error, "truncated binary file");
  return s;
}

}  // namespace mealsense::util

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace mealsense::image {

struct FrameImage {
  std::string frame_id;
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // RGB8, row-major
  std::int64_t captured_ns = 0;

  std::uint8_t& at(int x, int y, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::uint8_t at(int x, int y, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
};

// InvalidImage unless width, height > 0 and the buffer is 3*w*h bytes.
void validate(const FrameImage& frame);

// Row-major binary bitmap, one byte (0/1) per pixel.
struct Bitmap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  static Bitmap zeros(int width, int height);
  bool get(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v) { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
  std::size_t count() const;
};

struct SegmentMask {
  std::string class_label;
  Bitmap mask;
  double confidence = 0;
};

// Rectangle [x0, x1) x [y0, y1), clipped to the bitmap.
Bitmap rect_mask(int width, int height, int x0, int y0, int x1, int y1);

// Run lengths over the row-major bitmap, alternating and starting with zeros.
std::vector<std::uint32_t> rle_encode(const Bitmap& mask);
Bitmap rle_decode(int width, int height, const std::vector<std::uint32_t>& counts);

// Wire form: {"label", "rle": {"size": [h, w], "counts": [...]}, "confidence"}.
nlohmann::json mask_to_json(const SegmentMask& mask);
SegmentMask mask_from_json(const nlohmann::json& j);

// Binary PPM (P6, maxval 255).
std::vector<std::uint8_t> encode_ppm(const FrameImage& frame);
FrameImage decode_ppm(const std::vector<std::uint8_t>& bytes, std::string frame_id = {});
FrameImage read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const FrameImage& frame);

}  // namespace mealsense::image

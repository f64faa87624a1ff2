#include "mealsense/image/frame.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iterator>

#include "mealsense/error.h"

namespace mealsense::image {

void validate(const FrameImage& frame) {
  require(frame.width > 0 && frame.height > 0, ErrorCode::InvalidImage, "frame dimensions must be positive");
  require(frame.pixels.size() == 3ULL * static_cast<std::size_t>(frame.width) * static_cast<std::size_t>(frame.height),
          ErrorCode::InvalidImage, "pixel buffer size does not match dimensions");
}

Bitmap Bitmap::zeros(int width, int height) {
  require(width > 0 && height > 0, ErrorCode::InvalidImage, "bitmap dimensions must be positive");
  Bitmap b;
  b.width = width;
  b.height = height;
  b.bits.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
  return b;
}

std::size_t Bitmap::count() const {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](auto v) { return v != 0; }));
}

Bitmap rect_mask(int width, int height, int x0, int y0, int x1, int y1) {
  Bitmap b = Bitmap::zeros(width, height);
  x0 = std::clamp(x0, 0, width);
  x1 = std::clamp(x1, 0, width);
  y0 = std::clamp(y0, 0, height);
  y1 = std::clamp(y1, 0, height);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) b.set(x, y, true);
  return b;
}

std::vector<std::uint32_t> rle_encode(const Bitmap& mask) {
  std::vector<std::uint32_t> counts;
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (auto v : mask.bits) {
    const std::uint8_t bit = v != 0 ? 1 : 0;
    if (bit != current) {
      counts.push_back(run);
      run = 0;
      current = bit;
    }
    ++run;
  }
  counts.push_back(run);
  return counts;
}

Bitmap rle_decode(int width, int height, const std::vector<std::uint32_t>& counts) {
  require(width > 0 && height > 0, ErrorCode::ProtocolError, "rle: dimensions must be positive");
  const std::size_t total = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  Bitmap b;
  b.width = width;
  b.height = height;
  b.bits.reserve(total);
  std::uint8_t bit = 0;
  for (auto c : counts) {
    require(b.bits.size() + c <= total, ErrorCode::ProtocolError, "rle: runs exceed bitmap size");
    b.bits.insert(b.bits.end(), c, bit);
    bit ^= 1U;
  }
  require(b.bits.size() == total, ErrorCode::ProtocolError, "rle: runs do not cover the bitmap");
  return b;
}

nlohmann::json mask_to_json(const SegmentMask& mask) {
  return {{"label", mask.class_label},
          {"rle", {{"size", {mask.mask.height, mask.mask.width}}, {"counts", rle_encode(mask.mask)}}},
          {"confidence", mask.confidence}};
}

SegmentMask mask_from_json(const nlohmann::json& j) {
  try {
    SegmentMask m;
    m.class_label = j.at("label").get<std::string>();
    m.confidence = j.at("confidence").get<double>();
    require(m.confidence >= 0.0 && m.confidence <= 1.0, ErrorCode::ProtocolError, "mask confidence outside [0,1]");
    const auto& rle = j.at("rle");
    const auto size = rle.at("size").get<std::vector<int>>();
    require(size.size() == 2, ErrorCode::ProtocolError, "rle size must be [height, width]");
    m.mask = rle_decode(size[1], size[0], rle.at("counts").get<std::vector<std::uint32_t>>());
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ProtocolError, std::string("malformed mask: ") + e.what());
  }
}

std::vector<std::uint8_t> encode_ppm(const FrameImage& frame) {
  validate(frame);
  const std::string header = "P6\n" + std::to_string(frame.width) + " " + std::to_string(frame.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), frame.pixels.begin(), frame.pixels.end());
  return out;
}

FrameImage decode_ppm(const std::vector<std::uint8_t>& bytes, std::string frame_id) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&] {
    skip_space();
    long value = 0;
    std::size_t digits = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos]) && digits < 9) {
      value = value * 10 + (bytes[pos++] - '0');
      ++digits;
    }
    require(digits > 0, ErrorCode::InvalidImage, "ppm: expected integer");
    return static_cast<int>(value);
  };
  require(bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6', ErrorCode::InvalidImage, "ppm: not a P6 file");
  pos = 2;
  FrameImage f;
  f.frame_id = std::move(frame_id);
  f.width = read_int();
  f.height = read_int();
  const int maxval = read_int();
  require(maxval == 255, ErrorCode::InvalidImage, "ppm: only maxval 255 is supported");
  require(pos < bytes.size() && std::isspace(bytes[pos]), ErrorCode::InvalidImage, "ppm: bad header");
  ++pos;
  require(f.width > 0 && f.height > 0, ErrorCode::InvalidImage, "ppm: bad dimensions");
  const std::size_t n = 3ULL * static_cast<std::size_t>(f.width) * static_cast<std::size_t>(f.height);
  require(bytes.size() - pos >= n, ErrorCode::InvalidImage, "ppm: truncated pixel data");
  f.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
  return f;
}

FrameImage read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_ppm(bytes, path.stem().string());
}

void write_ppm(const std::filesystem::path& path, const FrameImage& frame) {
  const auto bytes = encode_ppm(frame);
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace mealsense::image

#include "mealsense/ingest/io.h"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "mealsense/error.h"

namespace mealsense::ingest {

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string_view f = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
    fields.push_back(f);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::int64_t parse_i64(std::string_view s, std::size_t line_no) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    fail(ErrorCode::MalformedStream, "bad integer '" + std::string(s) + "' on line " +
                                         std::to_string(line_no));
  }
  return v;
}

double parse_f64(std::string_view s, std::size_t line_no) {
  // std::from_chars for double is not available on every toolchain we target.
  std::string tmp(s);
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (tmp.empty() || end != tmp.c_str() + tmp.size() || !std::isfinite(v)) {
    fail(ErrorCode::MalformedStream, "bad number '" + tmp + "' on line " + std::to_string(line_no));
  }
  return v;
}

bool skip_line(std::string_view line) {
  const auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string_view::npos || line[pos] == '#';
}

int infer_rate(const ImuStream& s) {
  if (s.samples.size() < 2) {
    return 0;
  }
  std::vector<std::int64_t> deltas;
  deltas.reserve(s.samples.size() - 1);
  for (std::size_t i = 1; i < s.samples.size(); ++i) {
    deltas.push_back(s.samples[i].timestamp_ns - s.samples[i - 1].timestamp_ns);
  }
  auto mid = deltas.begin() + static_cast<std::ptrdiff_t>(deltas.size() / 2);
  std::nth_element(deltas.begin(), mid, deltas.end());
  if (*mid <= 0) {
    fail(ErrorCode::MalformedStream, "non-increasing IMU timestamps");
  }
  return static_cast<int>(std::llround(static_cast<double>(kNanosPerSecond) / static_cast<double>(*mid)));
}

template <typename T>
T read_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> buf{};
  in.read(reinterpret_cast<char*>(buf.data()), sizeof(T));
  if (!in) {
    fail(ErrorCode::MalformedStream, "truncated WAV file");
  }
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  }
  T out;
  if constexpr (sizeof(T) == 4 && std::is_same_v<T, float>) {
    auto bits = static_cast<std::uint32_t>(v);
    std::memcpy(&out, &bits, 4);
  } else {
    out = static_cast<T>(v);
  }
  return out;
}

template <typename T>
void write_le(std::ostream& out, T value) {
  std::uint64_t v = 0;
  if constexpr (std::is_same_v<T, float>) {
    std::uint32_t bits = 0;
    std::memcpy(&bits, &value, 4);
    v = bits;
  } else {
    v = static_cast<std::uint64_t>(value);
  }
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.put(static_cast<char>((v >> (8 * i)) & 0xFFU));
  }
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    fail(ErrorCode::Io, "cannot open " + path.string());
  }
  return in;
}

void write_wav_header(std::ostream& out, const AudioStream& audio, std::uint16_t format,
                      std::uint16_t bits) {
  const auto data_bytes = static_cast<std::uint32_t>(audio.samples.size() * (bits / 8U));
  out.write("RIFF", 4);
  write_le<std::uint32_t>(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_le<std::uint32_t>(out, 16);
  write_le<std::uint16_t>(out, format);
  write_le<std::uint16_t>(out, 1);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(audio.sample_rate_hz));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(audio.sample_rate_hz) * (bits / 8U));
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(bits / 8U));
  write_le<std::uint16_t>(out, bits);
  out.write("data", 4);
  write_le<std::uint32_t>(out, data_bytes);
}

}  // namespace

std::pair<ImuStream, ImuStream> read_imu_csv(std::istream& in) {
  ImuStream left;
  ImuStream right;
  left.sensor = SensorId::Left;
  right.sensor = SensorId::Right;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_line(line)) continue;
    const auto f = split_csv(line);
    if (f.size() != 8) {
      fail(ErrorCode::MalformedStream, "expected 8 fields on line " + std::to_string(line_no));
    }
    if (line_no == 1 && f[0] == "timestamp_ns") continue;  // optional header
    ImuSample s;
    s.timestamp_ns = parse_i64(f[0], line_no);
    s.ax = parse_f64(f[2], line_no);
    s.ay = parse_f64(f[3], line_no);
    s.az = parse_f64(f[4], line_no);
    s.gx = parse_f64(f[5], line_no);
    s.gy = parse_f64(f[6], line_no);
    s.gz = parse_f64(f[7], line_no);
    ImuStream* target = nullptr;
    if (f[1] == "left" || f[1] == "Left" || f[1] == "0") {
      target = &left;
    } else if (f[1] == "right" || f[1] == "Right" || f[1] == "1") {
      target = &right;
    } else {
      fail(ErrorCode::MalformedStream, "unknown sensor_id on line " + std::to_string(line_no));
    }
    if (!target->samples.empty() && s.timestamp_ns <= target->samples.back().timestamp_ns) {
      fail(ErrorCode::MalformedStream,
           "timestamps not strictly increasing on line " + std::to_string(line_no));
    }
    target->samples.push_back(s);
  }
  left.sample_rate_hz = infer_rate(left);
  right.sample_rate_hz = infer_rate(right);
  return {std::move(left), std::move(right)};
}

std::pair<ImuStream, ImuStream> read_imu_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_imu_csv(in);
}

void write_imu_csv(std::ostream& out, const ImuStream& left, const ImuStream& right) {
  out << std::setprecision(17);
  // Interleave by timestamp so the file reads like a device log.
  std::size_t i = 0;
  std::size_t j = 0;
  auto emit = [&out](const ImuSample& s, const char* id) {
    out << s.timestamp_ns << ',' << id << ',' << s.ax << ',' << s.ay << ',' << s.az << ',' << s.gx
        << ',' << s.gy << ',' << s.gz << '\n';
  };
  while (i < left.samples.size() || j < right.samples.size()) {
    if (j >= right.samples.size() ||
        (i < left.samples.size() && left.samples[i].timestamp_ns <= right.samples[j].timestamp_ns)) {
      emit(left.samples[i++], "left");
    } else {
      emit(right.samples[j++], "right");
    }
  }
}

AudioStream read_wav(std::istream& in, std::int64_t start_ns) {
  std::array<char, 4> tag{};
  in.read(tag.data(), 4);
  if (!in || std::memcmp(tag.data(), "RIFF", 4) != 0) {
    fail(ErrorCode::MalformedStream, "not a RIFF file");
  }
  read_le<std::uint32_t>(in);
  in.read(tag.data(), 4);
  if (!in || std::memcmp(tag.data(), "WAVE", 4) != 0) {
    fail(ErrorCode::MalformedStream, "not a WAVE file");
  }
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
  bool have_fmt = false;
  while (true) {
    in.read(tag.data(), 4);
    if (!in) {
      fail(ErrorCode::MalformedStream, "WAV file has no data chunk");
    }
    const auto size = read_le<std::uint32_t>(in);
    if (std::memcmp(tag.data(), "fmt ", 4) == 0) {
      format = read_le<std::uint16_t>(in);
      channels = read_le<std::uint16_t>(in);
      rate = read_le<std::uint32_t>(in);
      read_le<std::uint32_t>(in);
      read_le<std::uint16_t>(in);
      bits = read_le<std::uint16_t>(in);
      in.ignore(static_cast<std::streamsize>(size - 16 + (size & 1U)));
      have_fmt = true;
    } else if (std::memcmp(tag.data(), "data", 4) == 0) {
      if (!have_fmt) {
        fail(ErrorCode::MalformedStream, "data chunk before fmt chunk");
      }
      if (channels != 1) {
        fail(ErrorCode::MalformedStream, "only mono WAV is supported");
      }
      AudioStream audio;
      audio.sample_rate_hz = static_cast<int>(rate);
      audio.start_ns = start_ns;
      // WAVE_FORMAT_EXTENSIBLE (0xFFFE) is accepted when the bit depth is unambiguous.
      const bool pcm16 = (format == 1 || format == 0xFFFE) && bits == 16;
      const bool f32 = (format == 3 || format == 0xFFFE) && bits == 32;
      if (pcm16) {
        audio.samples.resize(size / 2);
        for (double& v : audio.samples) {
          v = static_cast<std::int16_t>(read_le<std::uint16_t>(in)) / 32768.0;
        }
      } else if (f32) {
        audio.samples.resize(size / 4);
        for (double& v : audio.samples) {
          v = read_le<float>(in);
        }
      } else {
        fail(ErrorCode::MalformedStream, "unsupported WAV encoding (need 16-bit PCM or 32-bit float)");
      }
      return audio;
    } else {
      in.ignore(static_cast<std::streamsize>(size + (size & 1U)));
    }
  }
}

AudioStream read_wav(const std::filesystem::path& path, std::int64_t start_ns) {
  auto in = open_in(path);
  return read_wav(in, start_ns);
}

void write_wav_float(std::ostream& out, const AudioStream& audio) {
  write_wav_header(out, audio, 3, 32);
  for (double v : audio.samples) {
    write_le<float>(out, static_cast<float>(v));
  }
}

void write_wav_pcm16(std::ostream& out, const AudioStream& audio) {
  write_wav_header(out, audio, 1, 16);
  for (double v : audio.samples) {
    const double clamped = std::clamp(v, -1.0, 32767.0 / 32768.0);
    write_le<std::uint16_t>(out, static_cast<std::uint16_t>(
                                     static_cast<std::int16_t>(std::lround(clamped * 32768.0))));
  }
}

std::vector<LabelInterval> read_labels(std::istream& in) {
  std::vector<LabelInterval> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_line(line)) continue;
    const auto f = split_csv(line);
    if (f.size() != 2) {
      fail(ErrorCode::MalformedStream, "expected start_ns,end_ns on line " + std::to_string(line_no));
    }
    if (line_no == 1 && f[0] == "start_ns") continue;
    LabelInterval iv{parse_i64(f[0], line_no), parse_i64(f[1], line_no)};
    if (iv.end_ns < iv.start_ns) {
      fail(ErrorCode::MalformedStream, "interval ends before it starts on line " + std::to_string(line_no));
    }
    out.push_back(iv);
  }
  return out;
}

std::vector<LabelInterval> read_labels(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_labels(in);
}

void write_labels(std::ostream& out, const std::vector<LabelInterval>& labels) {
  for (const auto& iv : labels) {
    out << iv.start_ns << ',' << iv.end_ns << '\n';
  }
}

}  // namespace mealsense::ingest

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "mealsense/ingest/streams.h"

namespace mealsense::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("mealsense-" + tag + "-" + std::to_string(rd()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline ingest::ImuStream make_imu(ingest::SensorId id, int rate_hz, std::size_t n, std::int64_t t0,
                                  const std::function<double(int axis, std::size_t i)>& value) {
  ingest::ImuStream s;
  s.sensor = id;
  s.sample_rate_hz = rate_hz;
  s.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& x = s.samples[i];
    x.timestamp_ns = t0 + static_cast<std::int64_t>(i) * (ingest::kNanosPerSecond / rate_hz);
    for (int a = 0; a < 6; ++a) ingest::set_axis_value(x, a, value(a, i));
  }
  return s;
}

// A 1 kHz recording with every stream on the same grid.
inline ingest::SyncedRecording make_synced(std::size_t n, std::int64_t t0,
                                           const std::function<double(int channel, std::size_t i)>& imu,
                                           const std::function<double(std::size_t i)>& audio) {
  ingest::SyncedRecording r;
  r.recording_id = "test";
  r.start_epoch_ns = t0;
  r.imu_left = make_imu(ingest::SensorId::Left, 1000, n, t0, [&](int a, std::size_t i) { return imu(a, i); });
  r.imu_right =
      make_imu(ingest::SensorId::Right, 1000, n, t0, [&](int a, std::size_t i) { return imu(a + 6, i); });
  r.audio.sample_rate_hz = 1000;
  r.audio.start_ns = t0;
  r.audio.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.audio.samples[i] = audio(i);
  return r;
}

inline ingest::WindowSlice make_window(const std::function<double(int channel, std::size_t i)>& imu,
                                       const std::function<double(std::size_t i)>& audio) {
  ingest::WindowSlice w;
  w.imu.resize(static_cast<std::size_t>(ingest::kImuChannels) * ingest::kWindowSamples);
  w.audio.resize(ingest::kWindowSamples);
  for (int c = 0; c < ingest::kImuChannels; ++c) {
    for (std::size_t i = 0; i < ingest::kWindowSamples; ++i) {
      w.imu[static_cast<std::size_t>(c) * ingest::kWindowSamples + i] = imu(c, i);
    }
  }
  for (std::size_t i = 0; i < ingest::kWindowSamples; ++i) w.audio[i] = audio(i);
  return w;
}

inline ingest::WindowSlice random_window(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return make_window([&](int, std::size_t) { return g(rng); }, [&](std::size_t) { return u(rng); });
}

inline double sine(double freq_hz, std::size_t i, double rate_hz = 1000.0, double amp = 1.0) {
  return amp * std::sin(2.0 * std::numbers::pi * freq_hz * static_cast<double>(i) / rate_hz);
}

}  // namespace mealsense::testing

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mealsense::ingest {

inline constexpr int kTargetRateHz = 1000;
inline constexpr int kImuChannels = 12;
inline constexpr std::size_t kWindowSamples = 1000;
inline constexpr std::int64_t kNanosPerSecond = 1'000'000'000;

enum class SensorId { Left, Right };

enum class ActivityLabel { Other, Ingestive };

struct ImuSample {
  std::int64_t timestamp_ns = 0;
  double ax = 0, ay = 0, az = 0;  // m/s^2
  double gx = 0, gy = 0, gz = 0;  // rad/s
};

// Axis 0..5 maps to ax, ay, az, gx, gy, gz.
double axis_value(const ImuSample& s, int axis);
void set_axis_value(ImuSample& s, int axis, double value);

struct ImuStream {
  SensorId sensor = SensorId::Left;
  int sample_rate_hz = 0;
  std::vector<ImuSample> samples;
};

struct AudioStream {
  int sample_rate_hz = 0;
  std::int64_t start_ns = 0;
  std::vector<double> samples;  // amplitudes in [-1, 1]
};

// Streams as they come off the device, before any rate conversion.
struct RawRecording {
  std::string recording_id;
  ImuStream imu_left;
  ImuStream imu_right;
  AudioStream audio;
};

// All three streams at 1 kHz on a common sample grid; sample i of every
// stream belongs to time start_epoch_ns + i ms.
struct SyncedRecording {
  std::string recording_id;
  ImuStream imu_left;
  ImuStream imu_right;
  AudioStream audio;
  std::int64_t start_epoch_ns = 0;

  std::size_t sample_count() const { return audio.samples.size(); }
};

struct LabelInterval {
  std::int64_t start_ns = 0;
  std::int64_t end_ns = 0;
};

struct WindowSlice {
  std::size_t window_index = 0;
  std::int64_t start_ns = 0;
  std::vector<double> imu;    // channel-major, kImuChannels x kWindowSamples
  std::vector<double> audio;  // kWindowSamples
  std::optional<ActivityLabel> label;

  std::span<const double> channel(int c) const {
    return std::span<const double>(imu).subspan(static_cast<std::size_t>(c) * kWindowSamples,
                                                kWindowSamples);
  }
};

// Channel naming for the 12-channel IMU block: left then right, accel then gyro.
std::string imu_channel_name(int channel);

}  // namespace mealsense::ingest

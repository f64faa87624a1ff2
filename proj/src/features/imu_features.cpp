#include "mealsense/features/imu_features.h"

#include <algorithm>
#include <cmath>

#include "mealsense/error.h"
#include "mealsense/features/fft.h"

namespace mealsense::features {

namespace {

void check_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      fail(ErrorCode::InvalidSignal, "non-finite sample in window");
    }
  }
}

void check_shape(const ingest::WindowSlice& window) {
  require(window.imu.size() == static_cast<std::size_t>(ingest::kImuChannels) * ingest::kWindowSamples,
          ErrorCode::InvalidSignal, "window must hold 12 x 1000 IMU values");
}

}  // namespace

ChannelMoments channel_moments(std::span<const double> values) {
  require(!values.empty(), ErrorCode::InvalidSignal, "empty channel");
  check_finite(values);
  const auto n = static_cast<double>(values.size());
  ChannelMoments m;
  m.min = *std::min_element(values.begin(), values.end());
  m.max = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  m.mean = sum / n;
  // Rounding can push the mean a hair outside [min, max] on constant input.
  m.mean = std::clamp(m.mean, m.min, m.max);
  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;
  for (double v : values) {
    const double d = v - m.mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  m.std = std::sqrt(m2);
  if (m.max == m.min || m2 <= 0.0) {
    m.std = 0.0;
    return m;
  }
  m.skewness = m3 / (m2 * m.std);
  m.kurtosis = m4 / (m2 * m2) - 3.0;
  return m;
}

SpectrumSummary spectrum_summary(std::span<const double> values) {
  check_finite(values);
  SpectrumSummary s;
  if (values.size() < 2) {
    return s;
  }
  const auto mags = rfft_magnitudes(values);
  double sum = 0.0;
  for (std::size_t k = 1; k < mags.size(); ++k) {
    sum += mags[k];
    s.peak_mag = std::max(s.peak_mag, mags[k]);
  }
  s.mean_mag = sum / static_cast<double>(mags.size() - 1);
  return s;
}

std::array<ChannelMoments, ingest::kImuChannels> imu_stats(const ingest::WindowSlice& window) {
  check_shape(window);
  std::array<ChannelMoments, ingest::kImuChannels> out{};
  for (int c = 0; c < ingest::kImuChannels; ++c) {
    out[static_cast<std::size_t>(c)] = channel_moments(window.channel(c));
  }
  return out;
}

std::array<SpectrumSummary, ingest::kImuChannels> imu_freq(const ingest::WindowSlice& window) {
  check_shape(window);
  std::array<SpectrumSummary, ingest::kImuChannels> out{};
  for (int c = 0; c < ingest::kImuChannels; ++c) {
    out[static_cast<std::size_t>(c)] = spectrum_summary(window.channel(c));
  }
  return out;
}

ImuFeatureSet imu_features(const ingest::WindowSlice& window) {
  const auto stats = imu_stats(window);
  const auto freq = imu_freq(window);
  ImuFeatureSet set;
  for (std::size_t c = 0; c < set.channels.size(); ++c) {
    set.channels[c].moments = stats[c];
    set.channels[c].spectrum = freq[c];
  }
  return set;
}

}  // namespace mealsense::features

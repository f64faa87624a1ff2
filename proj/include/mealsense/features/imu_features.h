#pragma once

#include <array>
#include <span>

#include "mealsense/ingest/streams.h"

namespace mealsense::features {

// Population moments; kurtosis is excess kurtosis. A zero-variance channel
// reports skewness = kurtosis = 0.
struct ChannelMoments {
  double mean = 0;
  double std = 0;
  double min = 0;
  double max = 0;
  double kurtosis = 0;
  double skewness = 0;
};

// Magnitude summary over positive-frequency bins 1..n/2 (DC excluded).
struct SpectrumSummary {
  double mean_mag = 0;
  double peak_mag = 0;
};

struct ImuChannelFeatures {
  ChannelMoments moments;
  SpectrumSummary spectrum;
};

struct ImuFeatureSet {
  std::array<ImuChannelFeatures, ingest::kImuChannels> channels{};
};

ChannelMoments channel_moments(std::span<const double> values);
SpectrumSummary spectrum_summary(std::span<const double> values);

std::array<ChannelMoments, ingest::kImuChannels> imu_stats(const ingest::WindowSlice& window);
std::array<SpectrumSummary, ingest::kImuChannels> imu_freq(const ingest::WindowSlice& window);
ImuFeatureSet imu_features(const ingest::WindowSlice& window);

}  // namespace mealsense::features

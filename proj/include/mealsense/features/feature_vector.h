#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mealsense/features/audio_features.h"
#include "mealsense/features/imu_features.h"
#include "mealsense/ingest/streams.h"

namespace mealsense::features {

// Layout 1: 12 IMU channels x (mean, std, min, max, kurtosis, skewness,
// fft_mean_mag, fft_peak_mag), then mel_mean[32], mel_std[32], zcr, centroid,
// bandwidth, rolloff, chroma[12], rms.
inline constexpr int kLayoutVersion = 1;
inline constexpr std::size_t kImuBlockLength = 12 * 8;
inline constexpr std::size_t kMelBands = 32;
inline constexpr std::size_t kAudioBlockLength = 2 * kMelBands + 4 + 12 + 1;
inline constexpr std::size_t kFeatureLength = kImuBlockLength + kAudioBlockLength;

struct FeatureVector {
  std::vector<double> values;
  int layout_version = kLayoutVersion;
};

// Names in vector order; stable for a given layout version.
const std::vector<std::string>& feature_names();

// Digest of the ordered names; pinned per layout version in the tests.
std::uint64_t layout_fingerprint();

FeatureVector concat_features(const ImuFeatureSet& imu, const AudioFeatureSet& audio);

FeatureVector extract_features(const ingest::WindowSlice& window);

// One header line of feature names, then one comma-separated line per window.
void write_feature_table(std::ostream& out, std::span<const FeatureVector> vectors);

}  // namespace mealsense::features

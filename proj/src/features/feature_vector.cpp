#include "mealsense/features/feature_vector.h"

#include <array>
#include <cmath>
#include <iomanip>

#include "mealsense/error.h"
#include "mealsense/util/hash.h"

namespace mealsense::features {

namespace {

std::vector<std::string> build_names() {
  static constexpr std::array<const char*, 8> kImu = {"mean",     "std",      "min",          "max",
                                                      "kurtosis", "skewness", "fft_mean_mag", "fft_peak_mag"};
  static constexpr std::array<const char*, 12> kPitch = {"C",  "Cs", "D",  "Ds", "E",  "F",
                                                         "Fs", "G",  "Gs", "A",  "As", "B"};
  std::vector<std::string> names;
  names.reserve(kFeatureLength);
  for (int c = 0; c < ingest::kImuChannels; ++c) {
    for (const char* f : kImu) {
      names.push_back(ingest::imu_channel_name(c) + "_" + f);
    }
  }
  for (std::size_t b = 0; b < kMelBands; ++b) names.push_back("mel_mean_" + std::to_string(b));
  for (std::size_t b = 0; b < kMelBands; ++b) names.push_back("mel_std_" + std::to_string(b));
  names.emplace_back("zero_crossing_rate");
  names.emplace_back("spectral_centroid_hz");
  names.emplace_back("spectral_bandwidth_hz");
  names.emplace_back("spectral_rolloff_hz");
  for (const char* p : kPitch) names.push_back(std::string("chroma_") + p);
  names.emplace_back("rms");
  return names;
}

}  // namespace

const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = build_names();
  return names;
}

std::uint64_t layout_fingerprint() {
  util::Fnv1a h;
  h.update_u64(static_cast<std::uint64_t>(kLayoutVersion));
  for (const auto& n : feature_names()) {
    h.update(n);
    h.update(std::string_view("\n"));
  }
  return h.digest();
}

FeatureVector concat_features(const ImuFeatureSet& imu, const AudioFeatureSet& audio) {
  if (audio.mel_mean.size() != kMelBands || audio.mel_std.size() != kMelBands) {
    fail(ErrorCode::LayoutError, "audio feature set has " + std::to_string(audio.mel_mean.size()) +
                                     " mel bands, layout expects " + std::to_string(kMelBands));
  }
  FeatureVector fv;
  fv.layout_version = kLayoutVersion;
  fv.values.reserve(kFeatureLength);
  for (const auto& ch : imu.channels) {
    const auto& m = ch.moments;
    fv.values.insert(fv.values.end(), {m.mean, m.std, m.min, m.max, m.kurtosis, m.skewness,
                                       ch.spectrum.mean_mag, ch.spectrum.peak_mag});
  }
  fv.values.insert(fv.values.end(), audio.mel_mean.begin(), audio.mel_mean.end());
  fv.values.insert(fv.values.end(), audio.mel_std.begin(), audio.mel_std.end());
  fv.values.insert(fv.values.end(), {audio.zero_crossing_rate, audio.spectral_centroid_hz,
                                     audio.spectral_bandwidth_hz, audio.spectral_rolloff_hz});
  fv.values.insert(fv.values.end(), audio.chroma.begin(), audio.chroma.end());
  fv.values.push_back(audio.rms);
  for (double v : fv.values) {
    if (!std::isfinite(v)) {
      fail(ErrorCode::InvalidSignal, "non-finite feature value");
    }
  }
  return fv;
}

FeatureVector extract_features(const ingest::WindowSlice& window) {
  MelConfig config;
  config.bands = static_cast<int>(kMelBands);
  return concat_features(imu_features(window), audio_features(window.audio, config));
}

void write_feature_table(std::ostream& out, std::span<const FeatureVector> vectors) {
  const auto& names = feature_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    out << (i ? "," : "") << names[i];
  }
  out << '\n' << std::setprecision(17);
  for (const auto& fv : vectors) {
    if (fv.layout_version != kLayoutVersion || fv.values.size() != names.size()) {
      fail(ErrorCode::LayoutError, "feature vector does not match the current layout");
    }
    for (std::size_t i = 0; i < fv.values.size(); ++i) {
      out << (i ? "," : "") << fv.values[i];
    }
    out << '\n';
  }
}

}  // namespace mealsense::features

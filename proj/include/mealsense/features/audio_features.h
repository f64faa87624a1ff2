#pragma once

#include <array>
#include <span>
#include <vector>

namespace mealsense::features {

struct MelConfig {
  int sample_rate_hz = 1000;
  int frame_length = 256;
  int hop_length = 128;
  int bands = 32;
  double fmin_hz = 0.0;
  double fmax_hz = 500.0;
};

// Power mel spectrogram, bands x frames, row-major by band.
struct MelSpectrogram {
  int bands = 0;
  int frames = 0;
  std::vector<double> power;

  double at(int band, int frame) const {
    return power[static_cast<std::size_t>(band) * static_cast<std::size_t>(frames) +
                 static_cast<std::size_t>(frame)];
  }
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Centre frequency (Hz) of every triangular band.
std::vector<double> mel_center_frequencies(const MelConfig& config = {});

// Hann-windowed STFT (no padding) folded through the triangular filterbank.
MelSpectrogram melspectrogram(std::span<const double> audio, const MelConfig& config = {});

inline constexpr double kRolloffFraction = 0.85;

struct AudioFeatureSet {
  std::vector<double> mel_mean;  // per band
  std::vector<double> mel_std;   // per band
  double zero_crossing_rate = 0;
  double spectral_centroid_hz = 0;
  double spectral_bandwidth_hz = 0;
  double spectral_rolloff_hz = 0;
  std::array<double, 12> chroma{};  // C, C#, ..., B; sums to 1 unless silent
  double rms = 0;
};

double zero_crossing_rate(std::span<const double> audio);

// Spectral descriptors use the Hann-windowed power spectrum of the whole
// window. A silent window reports centroid = bandwidth = rolloff = 0.
AudioFeatureSet audio_features(std::span<const double> audio, const MelConfig& config = {});

}  // namespace mealsense::features

#include "mealsense/features/audio_features.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mealsense/error.h"
#include "mealsense/features/fft.h"

namespace mealsense::features {

namespace {

std::vector<double> hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Periodic form, as used for spectral analysis.
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

std::vector<double> power_spectrum(std::span<const double> frame) {
  const auto w = hann(frame.size());
  std::vector<double> x(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) {
    x[i] = frame[i] * w[i];
  }
  auto mags = rfft_magnitudes(x);
  for (double& m : mags) {
    m *= m;
  }
  return mags;
}

// bands x (frame_length/2 + 1) triangular weights.
std::vector<std::vector<double>> filterbank(const MelConfig& config) {
  const int bins = config.frame_length / 2 + 1;
  const double mel_lo = hz_to_mel(config.fmin_hz);
  const double mel_hi = hz_to_mel(config.fmax_hz);
  std::vector<double> edges(static_cast<std::size_t>(config.bands + 2));
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      static_cast<double>(config.bands + 1));
  }
  std::vector<std::vector<double>> fb(static_cast<std::size_t>(config.bands),
                                      std::vector<double>(static_cast<std::size_t>(bins), 0.0));
  for (int b = 0; b < config.bands; ++b) {
    const double lo = edges[static_cast<std::size_t>(b)];
    const double centre = edges[static_cast<std::size_t>(b) + 1];
    const double hi = edges[static_cast<std::size_t>(b) + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * config.sample_rate_hz / config.frame_length;
      double weight = 0.0;
      if (f >= lo && f <= centre && centre > lo) {
        weight = (f - lo) / (centre - lo);
      } else if (f > centre && f <= hi && hi > centre) {
        weight = (hi - f) / (hi - centre);
      }
      fb[static_cast<std::size_t>(b)][static_cast<std::size_t>(k)] = std::max(0.0, weight);
    }
  }
  return fb;
}

}  // namespace

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mel_center_frequencies(const MelConfig& config) {
  const double mel_lo = hz_to_mel(config.fmin_hz);
  const double mel_hi = hz_to_mel(config.fmax_hz);
  std::vector<double> centres(static_cast<std::size_t>(config.bands));
  for (int b = 0; b < config.bands; ++b) {
    centres[static_cast<std::size_t>(b)] =
        mel_to_hz(mel_lo + (mel_hi - mel_lo) * (b + 1) / static_cast<double>(config.bands + 1));
  }
  return centres;
}

MelSpectrogram melspectrogram(std::span<const double> audio, const MelConfig& config) {
  require(config.frame_length > 0 && config.hop_length > 0 && config.bands > 0,
          ErrorCode::InvalidArgument, "mel configuration must be positive");
  require(audio.size() >= static_cast<std::size_t>(config.frame_length), ErrorCode::InvalidSignal,
          "audio shorter than one STFT frame");
  for (double v : audio) {
    require(std::isfinite(v), ErrorCode::InvalidSignal, "non-finite audio sample");
  }
  const auto frame_len = static_cast<std::size_t>(config.frame_length);
  const auto hop = static_cast<std::size_t>(config.hop_length);
  MelSpectrogram mel;
  mel.bands = config.bands;
  mel.frames = static_cast<int>(1 + (audio.size() - frame_len) / hop);
  mel.power.assign(static_cast<std::size_t>(mel.bands) * static_cast<std::size_t>(mel.frames), 0.0);
  const auto fb = filterbank(config);
  for (int f = 0; f < mel.frames; ++f) {
    const auto p = power_spectrum(audio.subspan(static_cast<std::size_t>(f) * hop, frame_len));
    for (int b = 0; b < mel.bands; ++b) {
      double acc = 0.0;
      const auto& weights = fb[static_cast<std::size_t>(b)];
      for (std::size_t k = 0; k < p.size(); ++k) {
        acc += weights[k] * p[k];
      }
      mel.power[static_cast<std::size_t>(b) * static_cast<std::size_t>(mel.frames) +
                static_cast<std::size_t>(f)] = acc;
    }
  }
  return mel;
}

double zero_crossing_rate(std::span<const double> audio) {
  if (audio.size() < 2) {
    return 0.0;
  }
  std::size_t crossings = 0;
  for (std::size_t i = 1; i < audio.size(); ++i) {
    if ((audio[i] < 0.0) != (audio[i - 1] < 0.0)) {
      ++crossings;
    }
  }
  return static_cast<double>(crossings) / static_cast<double>(audio.size() - 1);
}

AudioFeatureSet audio_features(std::span<const double> audio, const MelConfig& config) {
  const MelSpectrogram mel = melspectrogram(audio, config);
  AudioFeatureSet out;
  out.mel_mean.assign(static_cast<std::size_t>(mel.bands), 0.0);
  out.mel_std.assign(static_cast<std::size_t>(mel.bands), 0.0);
  for (int b = 0; b < mel.bands; ++b) {
    double sum = 0.0;
    for (int f = 0; f < mel.frames; ++f) sum += mel.at(b, f);
    const double mean = sum / mel.frames;
    double var = 0.0;
    for (int f = 0; f < mel.frames; ++f) {
      const double d = mel.at(b, f) - mean;
      var += d * d;
    }
    out.mel_mean[static_cast<std::size_t>(b)] = mean;
    out.mel_std[static_cast<std::size_t>(b)] = std::sqrt(var / mel.frames);
  }

  out.zero_crossing_rate = zero_crossing_rate(audio);
  double sq = 0.0;
  for (double v : audio) sq += v * v;
  out.rms = std::sqrt(sq / static_cast<double>(audio.size()));

  const auto power = power_spectrum(audio);
  const double bin_hz = static_cast<double>(config.sample_rate_hz) / static_cast<double>(audio.size());
  double total = 0.0;
  double weighted = 0.0;
  for (std::size_t k = 0; k < power.size(); ++k) {
    total += power[k];
    weighted += power[k] * static_cast<double>(k) * bin_hz;
  }
  if (total <= 0.0) {
    return out;
  }
  out.spectral_centroid_hz = weighted / total;
  double spread = 0.0;
  for (std::size_t k = 0; k < power.size(); ++k) {
    const double d = static_cast<double>(k) * bin_hz - out.spectral_centroid_hz;
    spread += power[k] * d * d;
  }
  out.spectral_bandwidth_hz = std::sqrt(spread / total);
  double cumulative = 0.0;
  for (std::size_t k = 0; k < power.size(); ++k) {
    cumulative += power[k];
    if (cumulative >= kRolloffFraction * total) {
      out.spectral_rolloff_hz = static_cast<double>(k) * bin_hz;
      break;
    }
  }

  // Pitch-class folding relative to A440; index 0 is C.
  double chroma_total = 0.0;
  for (std::size_t k = 1; k < power.size(); ++k) {
    const double f = static_cast<double>(k) * bin_hz;
    const auto semis = static_cast<long>(std::lround(12.0 * std::log2(f / 440.0)));
    const auto pitch_class = static_cast<std::size_t>(((semis + 9) % 12 + 12) % 12);
    out.chroma[pitch_class] += power[k];
    chroma_total += power[k];
  }
  if (chroma_total > 0.0) {
    for (double& c : out.chroma) c /= chroma_total;
  }
  return out;
}

}  // namespace mealsense::features

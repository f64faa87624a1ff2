#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include "doctest.h"
#include "mealsense/error.h"
#include "mealsense/features/audio_features.h"
#include "mealsense/features/feature_vector.h"
#include "mealsense/features/fft.h"
#include "mealsense/features/imu_features.h"
#include "mealsense/util/hash.h"
#include "unit/dft_oracle.h"
#include "unit/helpers.h"

using namespace mealsense;
using namespace mealsense::features;
using mealsense::testing::make_window;
using mealsense::testing::naive_dft_magnitudes;
using mealsense::testing::random_window;
using mealsense::testing::sine;

namespace {

std::vector<double> channel_of(std::function<double(std::size_t)> f, std::size_t n = 1000) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = f(i);
  return v;
}

double max_rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double scale = 0.0;
  for (double v : b) scale = std::max(scale, std::abs(v));
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(scale, 1e-300));
  return worst;
}

}  // namespace

TEST_CASE("channel_moments: constant channel") {
  const auto m = channel_moments(channel_of([](std::size_t) { return 3.0; }));
  CHECK(m.mean == 3.0);
  CHECK(m.std == 0.0);
  CHECK(m.min == 3.0);
  CHECK(m.max == 3.0);
  CHECK(m.skewness == 0.0);
  CHECK(m.kurtosis == 0.0);
}

TEST_CASE("channel_moments: two-point distribution") {
  // P(-1) = P(1) = 1/2: mean 0, variance 1, m4 = 1, excess kurtosis 1 - 3 = -2.
  const auto m = channel_moments(channel_of([](std::size_t i) { return i % 2 ? 1.0 : -1.0; }));
  CHECK(m.mean == doctest::Approx(0.0));
  CHECK(m.std == doctest::Approx(1.0));
  CHECK(m.skewness == doctest::Approx(0.0));
  CHECK(m.kurtosis == doctest::Approx(-2.0));
}

TEST_CASE("channel_moments: standard normal sample") {
  // At n = 1000 the standard errors are ~0.077 (skew) and ~0.155 (kurtosis).
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 5; ++trial) {
    const auto m = channel_moments(channel_of([&](std::size_t) { return g(rng); }));
    CHECK(std::abs(m.skewness) < 0.25);
    CHECK(std::abs(m.kurtosis) < 0.5);
    CHECK(m.min <= m.mean);
    CHECK(m.mean <= m.max);
  }
}

TEST_CASE("channel_moments rejects non-finite input") {
  auto v = channel_of([](std::size_t) { return 1.0; });
  v[3] = std::nan("");
  CHECK_THROWS_AS(channel_moments(v), Error);
}

TEST_CASE("spectrum_summary: zero and single tone") {
  const auto zero = spectrum_summary(channel_of([](std::size_t) { return 0.0; }));
  CHECK(zero.mean_mag == 0.0);
  CHECK(zero.peak_mag == 0.0);

  const auto tone = channel_of([](std::size_t i) { return sine(10.0, i); });
  const auto s = spectrum_summary(tone);
  const auto oracle = naive_dft_magnitudes(tone);
  const auto peak_bin = std::max_element(oracle.begin() + 1, oracle.end()) - oracle.begin();
  CHECK(peak_bin == 10);
  CHECK(s.peak_mag == doctest::Approx(500.0).epsilon(1e-9));
  CHECK(s.peak_mag == doctest::Approx(oracle[10]).epsilon(1e-9));
  CHECK(s.mean_mag < s.peak_mag);
}

TEST_CASE("FFT magnitudes equal naive DFT for a two-tone mix") {
  const auto x = channel_of([](std::size_t i) { return sine(10.0, i) + 0.5 * sine(30.0, i) + 0.1; });
  const auto fast = rfft_magnitudes(x);
  const auto slow = naive_dft_magnitudes(x);
  CHECK(max_rel_error(fast, slow) < 1e-6);
  double sum = 0;
  for (std::size_t k = 1; k < slow.size(); ++k) sum += slow[k];
  const auto s = spectrum_summary(x);
  CHECK(s.mean_mag == doctest::Approx(sum / 500.0).epsilon(1e-6));
  CHECK(s.peak_mag == doctest::Approx(slow[10]).epsilon(1e-6));
}

TEST_CASE("FFT magnitudes equal naive DFT across lengths") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (std::size_t n : {1u, 2u, 7u, 12u, 97u, 256u, 360u, 1000u}) {
    const auto x = channel_of([&](std::size_t) { return g(rng); }, n);
    CHECK(max_rel_error(rfft_magnitudes(x), naive_dft_magnitudes(x)) < 1e-9);
  }
}

TEST_CASE("melspectrogram: zero, noise, and a 100 Hz tone") {
  const auto zero = melspectrogram(channel_of([](std::size_t) { return 0.0; }));
  CHECK(zero.bands == 32);
  CHECK(zero.frames == 6);
  for (double v : zero.power) CHECK(v == 0.0);

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto noise = melspectrogram(channel_of([&](std::size_t) { return u(rng); }));
  for (double v : noise.power) CHECK(v > 0.0);

  const auto tone = melspectrogram(channel_of([](std::size_t i) { return sine(100.0, i); }));
  // Oracle: the band whose centre (HTK mel scale, evenly spaced) lies closest to 100 Hz.
  std::size_t expected = 0;
  double best = 1e9;
  const double top = 2595.0 * std::log10(1.0 + 500.0 / 700.0);
  for (int b = 0; b < 32; ++b) {
    const double centre = 700.0 * (std::pow(10.0, top * (b + 1) / 33.0 / 2595.0) - 1.0);
    if (std::abs(centre - 100.0) < best) {
      best = std::abs(centre - 100.0);
      expected = static_cast<std::size_t>(b);
    }
  }
  std::size_t argmax = 0;
  double maxmean = -1.0;
  for (int b = 0; b < 32; ++b) {
    double mean = 0;
    for (int f = 0; f < tone.frames; ++f) mean += tone.at(b, f);
    if (mean > maxmean) {
      maxmean = mean;
      argmax = static_cast<std::size_t>(b);
    }
  }
  CHECK(argmax == expected);
  CHECK(mel_center_frequencies()[expected] == doctest::Approx(100.0).epsilon(0.1));
}

TEST_CASE("audio_features: silence, alternation, tone") {
  const auto silent = audio_features(channel_of([](std::size_t) { return 0.0; }));
  CHECK(silent.zero_crossing_rate == 0.0);
  CHECK(silent.rms == 0.0);
  CHECK(silent.spectral_centroid_hz == 0.0);
  CHECK(silent.spectral_bandwidth_hz == 0.0);
  CHECK(silent.spectral_rolloff_hz == 0.0);

  const auto alt = audio_features(channel_of([](std::size_t i) { return i % 2 ? -1.0 : 1.0; }));
  CHECK(alt.zero_crossing_rate == 1.0);
  CHECK(alt.rms == 1.0);

  const auto tone = audio_features(channel_of([](std::size_t i) { return sine(100.0, i); }));
  CHECK(std::abs(tone.spectral_centroid_hz - 100.0) <= 5.0);
  CHECK(tone.spectral_rolloff_hz >= 100.0);
  CHECK(tone.spectral_rolloff_hz <= 500.0);
  CHECK(tone.rms == doctest::Approx(std::sqrt(0.5)).epsilon(1e-9));
  // 100 Hz is 24.5 semitones below A440, rounding to G (index 7) or G# (8).
  const auto top = std::max_element(tone.chroma.begin(), tone.chroma.end()) - tone.chroma.begin();
  CHECK((top == 7 || top == 8));
  double sum = 0;
  for (double c : tone.chroma) {
    CHECK(c >= 0.0);
    sum += c;
  }
  CHECK(sum == doctest::Approx(1.0));
}

TEST_CASE("feature vector layout") {
  CHECK(feature_names().size() == kFeatureLength);
  CHECK(kFeatureLength == 96 + kAudioBlockLength);
  CHECK(feature_names()[0] == "left_ax_mean");
  CHECK(feature_names()[95] == "right_gz_fft_peak_mag");
  CHECK(feature_names().back() == "rms");
  // Pinned for layout version 1; reordering or renaming must bump the version.
  CHECK(util::to_hex(layout_fingerprint()) == "d5be1ebf3fffdbb3");

  std::mt19937_64 rng(4);
  const auto w = random_window(rng);
  const auto a = extract_features(w);
  const auto b = extract_features(w);
  CHECK(a.values.size() == kFeatureLength);
  CHECK(a.layout_version == kLayoutVersion);
  CHECK(std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(double)) == 0);

  // Swapping two channels produces a different vector.
  auto swapped = w;
  std::swap_ranges(swapped.imu.begin(), swapped.imu.begin() + 1000, swapped.imu.begin() + 1000);
  CHECK(extract_features(swapped).values != a.values);

  AudioFeatureSet bad = audio_features(w.audio);
  bad.mel_mean.pop_back();
  try {
    concat_features(imu_features(w), bad);
    FAIL("expected LayoutError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::LayoutError);
  }
}

TEST_CASE("scaling a channel scales level features and keeps shape features") {
  std::mt19937_64 rng(8);
  const auto w = random_window(rng);
  auto scaled = w;
  for (auto& v : scaled.imu) v *= 3.5;
  for (auto& v : scaled.audio) v *= 0.25;
  const auto base = imu_features(w);
  const auto big = imu_features(scaled);
  for (std::size_t c = 0; c < 12; ++c) {
    const auto& m0 = base.channels[c].moments;
    const auto& m1 = big.channels[c].moments;
    CHECK(m1.mean == doctest::Approx(3.5 * m0.mean).epsilon(1e-9));
    CHECK(m1.std == doctest::Approx(3.5 * m0.std).epsilon(1e-9));
    CHECK(m1.min == doctest::Approx(3.5 * m0.min).epsilon(1e-9));
    CHECK(m1.max == doctest::Approx(3.5 * m0.max).epsilon(1e-9));
    CHECK(m1.skewness == doctest::Approx(m0.skewness).epsilon(1e-9));
    CHECK(m1.kurtosis == doctest::Approx(m0.kurtosis).epsilon(1e-9));
    CHECK(big.channels[c].spectrum.peak_mag == doctest::Approx(3.5 * base.channels[c].spectrum.peak_mag).epsilon(1e-9));
    CHECK(big.channels[c].spectrum.mean_mag == doctest::Approx(3.5 * base.channels[c].spectrum.mean_mag).epsilon(1e-9));
  }
  CHECK(audio_features(scaled.audio).zero_crossing_rate == audio_features(w.audio).zero_crossing_rate);
}

TEST_CASE("features are finite and within declared ranges for random windows") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 20; ++i) {
    const auto w = random_window(rng);
    const auto fv = extract_features(w);
    for (double v : fv.values) CHECK(std::isfinite(v));
    const auto af = audio_features(w.audio);
    CHECK(af.zero_crossing_rate >= 0.0);
    CHECK(af.zero_crossing_rate <= 1.0);
    CHECK(af.spectral_rolloff_hz <= 500.0);
    const auto imu = imu_features(w);
    for (const auto& ch : imu.channels) {
      CHECK(ch.spectrum.peak_mag >= ch.spectrum.mean_mag);
      CHECK(ch.spectrum.mean_mag >= 0.0);
    }
  }
}

TEST_CASE("feature table export has a header and one row per window") {
  std::mt19937_64 rng(12);
  std::vector<FeatureVector> rows = {extract_features(random_window(rng)), extract_features(random_window(rng))};
  std::stringstream ss;
  write_feature_table(ss, rows);
  std::string line;
  std::getline(ss, line);
  CHECK(line.rfind("left_ax_mean,left_ax_std", 0) == 0);
  int count = 0;
  while (std::getline(ss, line)) {
    ++count;
    CHECK(std::count(line.begin(), line.end(), ',') == static_cast<long>(kFeatureLength - 1));
  }
  CHECK(count == 2);
}

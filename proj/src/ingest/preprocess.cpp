#include "mealsense/ingest/preprocess.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mealsense/error.h"

namespace mealsense::ingest {

namespace {

constexpr double kAntiAliasCutoffHz = 450.0;
constexpr int kTapsPerDecimationStep = 32;

void check_monotone(const ImuStream& stream) {
  for (std::size_t i = 1; i < stream.samples.size(); ++i) {
    if (stream.samples[i].timestamp_ns <= stream.samples[i - 1].timestamp_ns) {
      fail(ErrorCode::MalformedStream,
           "timestamps not strictly increasing at sample " + std::to_string(i));
    }
  }
}

ImuSample lerp(const ImuSample& a, const ImuSample& b, std::int64_t t) {
  if (t == b.timestamp_ns) {
    return b;
  }
  const double frac = static_cast<double>(t - a.timestamp_ns) /
                      static_cast<double>(b.timestamp_ns - a.timestamp_ns);
  ImuSample out;
  out.timestamp_ns = t;
  for (int axis = 0; axis < 6; ++axis) {
    const double va = axis_value(a, axis);
    const double vb = axis_value(b, axis);
    set_axis_value(out, axis, va + frac * (vb - va));
  }
  return out;
}

// Blackman-windowed sinc, unit DC gain.
std::vector<double> lowpass_taps(int input_rate, int decimation) {
  const int num_taps = kTapsPerDecimationStep * decimation + 1;
  const double fc = kAntiAliasCutoffHz / static_cast<double>(input_rate);
  const double mid = (num_taps - 1) / 2.0;
  std::vector<double> taps(static_cast<std::size_t>(num_taps));
  double sum = 0.0;
  for (int n = 0; n < num_taps; ++n) {
    const double x = n - mid;
    const double sinc = x == 0.0 ? 2.0 * fc
                                 : std::sin(2.0 * std::numbers::pi * fc * x) / (std::numbers::pi * x);
    const double phase = 2.0 * std::numbers::pi * n / (num_taps - 1);
    const double window = 0.42 - 0.5 * std::cos(phase) + 0.08 * std::cos(2.0 * phase);
    taps[static_cast<std::size_t>(n)] = sinc * window;
    sum += sinc * window;
  }
  for (double& t : taps) {
    t /= sum;
  }
  return taps;
}

}  // namespace

ImuSample interpolate_at(const ImuStream& stream, std::int64_t timestamp_ns) {
  const auto& s = stream.samples;
  require(!s.empty(), ErrorCode::EmptyStream, "cannot interpolate an empty stream");
  if (s.size() == 1) {
    ImuSample out = s.front();
    out.timestamp_ns = timestamp_ns;
    return out;
  }
  auto it = std::upper_bound(s.begin(), s.end(), timestamp_ns,
                             [](std::int64_t t, const ImuSample& x) { return t < x.timestamp_ns; });
  std::size_t hi = static_cast<std::size_t>(it - s.begin());
  hi = std::clamp<std::size_t>(hi, 1, s.size() - 1);
  return lerp(s[hi - 1], s[hi], timestamp_ns);
}

ImuStream resample_imu(const ImuStream& stream, int target_hz) {
  require(!stream.samples.empty(), ErrorCode::EmptyStream, "IMU stream has no samples");
  require(stream.sample_rate_hz > 0 && target_hz > 0, ErrorCode::InvalidArgument,
          "sample rates must be positive");
  require(stream.sample_rate_hz <= target_hz, ErrorCode::InvalidArgument,
          "resample_imu only upsamples");
  check_monotone(stream);

  ImuStream out;
  out.sensor = stream.sensor;
  out.sample_rate_hz = target_hz;
  const std::size_t n_in = stream.samples.size();
  const auto n_out = static_cast<std::size_t>(std::llround(
      static_cast<double>(n_in) * target_hz / static_cast<double>(stream.sample_rate_hz)));
  const std::int64_t t0 = stream.samples.front().timestamp_ns;
  out.samples.reserve(n_out);

  // Walk the input once; the output grid is monotone.
  std::size_t hi = 1;
  for (std::size_t i = 0; i < n_out; ++i) {
    const std::int64_t t =
        t0 + static_cast<std::int64_t>(i) * kNanosPerSecond / static_cast<std::int64_t>(target_hz);
    if (n_in == 1) {
      ImuSample s = stream.samples.front();
      s.timestamp_ns = t;
      out.samples.push_back(s);
      continue;
    }
    while (hi < n_in - 1 && stream.samples[hi].timestamp_ns <= t) {
      ++hi;
    }
    out.samples.push_back(lerp(stream.samples[hi - 1], stream.samples[hi], t));
  }
  return out;
}

AudioStream downsample_audio(const AudioStream& stream, int target_hz) {
  require(stream.sample_rate_hz > 0 && target_hz > 0, ErrorCode::UnsupportedRate,
          "sample rates must be positive");
  if (stream.sample_rate_hz % target_hz != 0) {
    fail(ErrorCode::UnsupportedRate, "input rate " + std::to_string(stream.sample_rate_hz) +
                                         " is not a multiple of " + std::to_string(target_hz));
  }
  const int factor = stream.sample_rate_hz / target_hz;
  AudioStream out;
  out.sample_rate_hz = target_hz;
  out.start_ns = stream.start_ns;
  const std::size_t n_out = stream.samples.size() / static_cast<std::size_t>(factor);
  out.samples.resize(n_out, 0.0);
  if (factor == 1) {
    std::copy_n(stream.samples.begin(), n_out, out.samples.begin());
    return out;
  }

  double peak = 0.0;
  for (double v : stream.samples) {
    peak = std::max(peak, std::abs(v));
  }
  const std::vector<double> taps = lowpass_taps(stream.sample_rate_hz, factor);
  const auto half = static_cast<std::ptrdiff_t>(taps.size() / 2);
  const auto n_in = static_cast<std::ptrdiff_t>(stream.samples.size());
  for (std::size_t j = 0; j < n_out; ++j) {
    const std::ptrdiff_t centre = static_cast<std::ptrdiff_t>(j) * factor;
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, centre - half);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n_in - 1, centre + half);
    double acc = 0.0;
    for (std::ptrdiff_t k = lo; k <= hi; ++k) {
      acc += taps[static_cast<std::size_t>(k - centre + half)] * stream.samples[static_cast<std::size_t>(k)];
    }
    // Filter ringing may overshoot; the output never exceeds the input's peak.
    out.samples[j] = std::clamp(acc, -peak, peak);
  }
  return out;
}

SyncedRecording preprocess(const RawRecording& raw) {
  ImuStream left = raw.imu_left.sample_rate_hz == kTargetRateHz
                       ? raw.imu_left
                       : resample_imu(raw.imu_left, kTargetRateHz);
  ImuStream right = raw.imu_right.sample_rate_hz == kTargetRateHz
                        ? raw.imu_right
                        : resample_imu(raw.imu_right, kTargetRateHz);
  require(!left.samples.empty() && !right.samples.empty(), ErrorCode::EmptyStream,
          "IMU stream has no samples");
  check_monotone(left);
  check_monotone(right);
  AudioStream audio = downsample_audio(raw.audio, kTargetRateHz);
  require(!audio.samples.empty(), ErrorCode::EmptyStream, "audio stream has no samples");

  constexpr std::int64_t period = kNanosPerSecond / kTargetRateHz;
  const std::int64_t audio_end =
      audio.start_ns + static_cast<std::int64_t>(audio.samples.size() - 1) * period;
  const std::int64_t common_start = std::max(
      {left.samples.front().timestamp_ns, right.samples.front().timestamp_ns, audio.start_ns});
  const std::int64_t common_end =
      std::min({left.samples.back().timestamp_ns, right.samples.back().timestamp_ns, audio_end});
  require(common_end >= common_start, ErrorCode::EmptyStream, "streams do not overlap in time");

  auto first_at_or_after = [](const ImuStream& s, std::int64_t t) {
    return static_cast<std::size_t>(
        std::lower_bound(s.samples.begin(), s.samples.end(), t,
                         [](const ImuSample& x, std::int64_t v) { return x.timestamp_ns < v; }) -
        s.samples.begin());
  };
  const std::size_t l0 = first_at_or_after(left, common_start);
  const std::size_t r0 = first_at_or_after(right, common_start);
  const auto a0 = static_cast<std::size_t>((common_start - audio.start_ns + period - 1) / period);

  const std::size_t span = static_cast<std::size_t>((common_end - common_start) / period) + 1;
  std::size_t n = std::min({span, left.samples.size() - l0, right.samples.size() - r0,
                            audio.samples.size() - a0});
  require(n > 0, ErrorCode::EmptyStream, "no common samples after alignment");

  SyncedRecording out;
  out.recording_id = raw.recording_id;
  out.imu_left.sensor = SensorId::Left;
  out.imu_right.sensor = SensorId::Right;
  out.imu_left.sample_rate_hz = out.imu_right.sample_rate_hz = kTargetRateHz;
  out.imu_left.samples.assign(left.samples.begin() + static_cast<std::ptrdiff_t>(l0),
                              left.samples.begin() + static_cast<std::ptrdiff_t>(l0 + n));
  out.imu_right.samples.assign(right.samples.begin() + static_cast<std::ptrdiff_t>(r0),
                               right.samples.begin() + static_cast<std::ptrdiff_t>(r0 + n));
  out.audio.sample_rate_hz = kTargetRateHz;
  out.audio.start_ns = audio.start_ns + static_cast<std::int64_t>(a0) * period;
  out.audio.samples.assign(audio.samples.begin() + static_cast<std::ptrdiff_t>(a0),
                           audio.samples.begin() + static_cast<std::ptrdiff_t>(a0 + n));
  out.start_epoch_ns = out.audio.start_ns;
  return out;
}

SyncedRecording normalize(const SyncedRecording& recording) {
  SyncedRecording out = recording;
  for (ImuStream* stream : {&out.imu_left, &out.imu_right}) {
    auto& samples = stream->samples;
    if (samples.empty()) {
      continue;
    }
    const auto n = static_cast<double>(samples.size());
    for (int axis = 0; axis < 6; ++axis) {
      double mean = 0.0;
      for (const auto& s : samples) {
        mean += axis_value(s, axis);
      }
      mean /= n;
      double var = 0.0;
      for (const auto& s : samples) {
        const double d = axis_value(s, axis) - mean;
        var += d * d;
      }
      var /= n;
      const double sd = std::sqrt(var);
      // Rounding in the mean leaves a tiny residual spread on constant channels.
      const bool degenerate = sd <= 1e-12 * std::max(1.0, std::abs(mean));
      for (auto& s : samples) {
        set_axis_value(s, axis, degenerate ? 0.0 : (axis_value(s, axis) - mean) / sd);
      }
    }
  }
  double peak = 0.0;
  for (double v : out.audio.samples) {
    peak = std::max(peak, std::abs(v));
  }
  if (peak > 0.0) {
    for (double& v : out.audio.samples) {
      v /= peak;
    }
  }
  return out;
}

std::vector<LabelInterval> merge_intervals(std::span<const LabelInterval> intervals) {
  std::vector<LabelInterval> sorted;
  for (const auto& iv : intervals) {
    if (iv.end_ns > iv.start_ns) {
      sorted.push_back(iv);
    }
  }
  std::sort(sorted.begin(), sorted.end(),
            [](const LabelInterval& a, const LabelInterval& b) { return a.start_ns < b.start_ns; });
  std::vector<LabelInterval> merged;
  for (const auto& iv : sorted) {
    if (!merged.empty() && iv.start_ns <= merged.back().end_ns) {
      merged.back().end_ns = std::max(merged.back().end_ns, iv.end_ns);
    } else {
      merged.push_back(iv);
    }
  }
  return merged;
}

std::vector<WindowSlice> window(const SyncedRecording& recording,
                                std::optional<std::span<const LabelInterval>> labels) {
  const std::size_t n = recording.sample_count();
  require(recording.imu_left.samples.size() >= n && recording.imu_right.samples.size() >= n,
          ErrorCode::MalformedStream, "IMU streams shorter than audio");
  const std::size_t count = n / kWindowSamples;
  require(count > 0, ErrorCode::EmptyWindowSet, "recording shorter than one second");

  std::vector<LabelInterval> merged;
  if (labels) {
    merged = merge_intervals(*labels);
  }

  std::vector<WindowSlice> windows(count);
  for (std::size_t w = 0; w < count; ++w) {
    WindowSlice& slice = windows[w];
    slice.window_index = w;
    slice.start_ns = recording.start_epoch_ns + static_cast<std::int64_t>(w) * kNanosPerSecond;
    slice.imu.resize(static_cast<std::size_t>(kImuChannels) * kWindowSamples);
    slice.audio.resize(kWindowSamples);
    const std::size_t base = w * kWindowSamples;
    for (std::size_t i = 0; i < kWindowSamples; ++i) {
      const ImuSample& l = recording.imu_left.samples[base + i];
      const ImuSample& r = recording.imu_right.samples[base + i];
      for (int axis = 0; axis < 6; ++axis) {
        slice.imu[static_cast<std::size_t>(axis) * kWindowSamples + i] = axis_value(l, axis);
        slice.imu[static_cast<std::size_t>(axis + 6) * kWindowSamples + i] = axis_value(r, axis);
      }
      slice.audio[i] = recording.audio.samples[base + i];
    }
    if (labels) {
      const std::int64_t ws = slice.start_ns;
      const std::int64_t we = ws + kNanosPerSecond;
      std::int64_t covered = 0;
      for (const auto& iv : merged) {
        const std::int64_t lo = std::max(ws, iv.start_ns);
        const std::int64_t hi = std::min(we, iv.end_ns);
        if (hi > lo) {
          covered += hi - lo;
        }
      }
      slice.label = covered * 2 > kNanosPerSecond ? ActivityLabel::Ingestive : ActivityLabel::Other;
    }
  }
  return windows;
}

}  // namespace mealsense::ingest

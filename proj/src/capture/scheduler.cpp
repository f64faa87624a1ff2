#include "mealsense/capture/scheduler.h"

#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "mealsense/error.h"

namespace mealsense::capture {

using ingest::ActivityLabel;

namespace {

std::int64_t seconds_to_ns(double s) { return std::llround(s * 1e9); }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    fail(ErrorCode::InvalidArgument, "capture config: bad value for " + key);
  }
  require(used == text.size() && std::isfinite(v), ErrorCode::InvalidArgument, "capture config: bad value for " + key);
  return v;
}

void validate(const CaptureConfig& c) {
  require(c.burst_fps > 0 && c.burst_seconds > 0, ErrorCode::InvalidArgument, "burst_fps and burst_seconds must be positive");
  require(c.gap_tolerance_s >= 0 && c.min_session_s >= 0 && c.transition_window_s >= 0, ErrorCode::InvalidArgument,
          "durations must be non-negative");
  require(c.smoothing_windows >= 1, ErrorCode::InvalidArgument, "smoothing_windows must be >= 1");
}

}  // namespace

CaptureConfig parse_capture_config(std::istream& in) {
  CaptureConfig c;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::InvalidArgument, "capture config: expected key=value: " + line);
    const std::string key = trim(line.substr(0, eq));
    const double v = parse_number(key, trim(line.substr(eq + 1)));
    if (key == "pitch_threshold_deg") c.pitch_threshold_deg = v;
    else if (key == "burst_fps") c.burst_fps = static_cast<int>(v);
    else if (key == "burst_seconds") c.burst_seconds = v;
    else if (key == "transition_window_s") c.transition_window_s = v;
    else if (key == "gap_tolerance_s") c.gap_tolerance_s = v;
    else if (key == "min_session_s") c.min_session_s = v;
    else if (key == "smoothing_windows") c.smoothing_windows = static_cast<int>(v);
    else fail(ErrorCode::InvalidArgument, "capture config: unknown key " + key);
  }
  validate(c);
  return c;
}

double pitch_angle(double ax, double ay, double az) {
  require(std::isfinite(ax) && std::isfinite(ay) && std::isfinite(az), ErrorCode::InvalidSignal,
          "non-finite acceleration");
  require(ax != 0.0 || ay != 0.0 || az != 0.0, ErrorCode::UndefinedAttitude, "zero acceleration vector");
  // atan2 keeps the ay = az = 0 case at +/-90 degrees.
  return std::atan2(ax, std::hypot(ay, az)) * 180.0 / std::numbers::pi;
}

CaptureScheduler::CaptureScheduler(CaptureConfig config) : config_(config) { validate(config_); }

std::optional<CaptureBurst> CaptureScheduler::update(const PitchSample& sample, ActivityLabel window_prediction) {
  if (last_time_) {
    require(sample.timestamp_ns > *last_time_, ErrorCode::MalformedStream, "pitch samples must be strictly increasing");
  }
  last_time_ = sample.timestamp_ns;

  if (last_prediction_ && *last_prediction_ != window_prediction) {
    last_transition_ns_ = sample.timestamp_ns;
  }
  last_prediction_ = window_prediction;

  if (active_ && sample.timestamp_ns >= active_until_ns_) active_ = false;

  const bool crossed = last_pitch_ && *last_pitch_ <= config_.pitch_threshold_deg &&
                       sample.pitch_deg > config_.pitch_threshold_deg;
  last_pitch_ = sample.pitch_deg;

  const bool armed = last_transition_ns_ &&
                     sample.timestamp_ns - *last_transition_ns_ <= seconds_to_ns(config_.transition_window_s);
  if (!crossed || !armed || active_ || window_prediction != ActivityLabel::Ingestive) {
    return std::nullopt;
  }

  CaptureBurst burst;
  burst.trigger_ns = sample.timestamp_ns;
  const auto frames = static_cast<std::size_t>(std::llround(config_.burst_fps * config_.burst_seconds));
  const double spacing_ns = 1e9 / config_.burst_fps;
  burst.frame_times_ns.reserve(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    burst.frame_times_ns.push_back(sample.timestamp_ns + std::llround(spacing_ns * static_cast<double>(i)));
  }
  active_ = true;
  active_until_ns_ = sample.timestamp_ns + seconds_to_ns(config_.burst_seconds);
  return burst;
}

std::vector<ActivityLabel> smooth_predictions(std::span<const ActivityLabel> predictions, int width) {
  require(width >= 1, ErrorCode::InvalidArgument, "smoothing width must be >= 1");
  const auto n = predictions.size();
  const auto half = static_cast<std::size_t>(width / 2);
  std::vector<ActivityLabel> out(predictions.begin(), predictions.end());
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n, i + half + 1);
    std::size_t ingestive = 0;
    for (std::size_t j = lo; j < hi; ++j) ingestive += predictions[j] == ActivityLabel::Ingestive ? 1 : 0;
    const std::size_t other = (hi - lo) - ingestive;
    if (ingestive > other) out[i] = ActivityLabel::Ingestive;
    else if (other > ingestive) out[i] = ActivityLabel::Other;
  }
  return out;
}

std::vector<MealSessionBoundary> segment_sessions(std::span<const ActivityLabel> window_predictions,
                                                  const CaptureConfig& config, std::int64_t first_window_ns,
                                                  const std::string& id_prefix, std::int64_t window_ns) {
  validate(config);
  require(window_ns > 0, ErrorCode::InvalidArgument, "window length must be positive");
  const auto smoothed = smooth_predictions(window_predictions, config.smoothing_windows);

  struct Run {
    std::size_t first, last;  // inclusive window indices
    std::vector<std::size_t> windows;
  };
  std::vector<Run> runs;
  const auto gap_limit = seconds_to_ns(config.gap_tolerance_s);
  for (std::size_t w = 0; w < smoothed.size(); ++w) {
    if (smoothed[w] != ActivityLabel::Ingestive) continue;
    if (!runs.empty()) {
      const auto gap_windows = static_cast<std::int64_t>(w - runs.back().last - 1);
      if (gap_windows * window_ns <= gap_limit) {
        runs.back().last = w;
        runs.back().windows.push_back(w);
        continue;
      }
    }
    runs.push_back({w, w, {w}});
  }

  std::vector<MealSessionBoundary> out;
  const auto min_len = seconds_to_ns(config.min_session_s);
  for (auto& run : runs) {
    const std::int64_t start = first_window_ns + static_cast<std::int64_t>(run.first) * window_ns;
    const std::int64_t end = first_window_ns + static_cast<std::int64_t>(run.last + 1) * window_ns;
    if (end - start < min_len) continue;
    MealSessionBoundary s;
    s.session_id = id_prefix + "-" + std::to_string(out.size());
    s.start_ns = start;
    s.end_ns = end;
    s.window_indices = std::move(run.windows);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<CaptureBurst> schedule_recording(const ingest::SyncedRecording& recording,
                                             std::span<const ActivityLabel> window_predictions,
                                             const CaptureConfig& config, std::size_t stride) {
  require(stride >= 1, ErrorCode::InvalidArgument, "stride must be >= 1");
  const auto smoothed = smooth_predictions(window_predictions, config.smoothing_windows);
  CaptureScheduler scheduler(config);
  std::vector<CaptureBurst> bursts;
  const auto& samples = recording.imu_left.samples;
  const std::size_t usable = std::min(samples.size(), smoothed.size() * ingest::kWindowSamples);
  for (std::size_t i = 0; i < usable; i += stride) {
    const auto& s = samples[i];
    if (s.ax == 0.0 && s.ay == 0.0 && s.az == 0.0) continue;
    const PitchSample p{s.timestamp_ns, pitch_angle(s.ax, s.ay, s.az)};
    if (auto b = scheduler.update(p, smoothed[i / ingest::kWindowSamples])) bursts.push_back(std::move(*b));
  }
  return bursts;
}

void write_bursts(std::ostream& out, std::span<const CaptureBurst> bursts) {
  for (const auto& b : bursts) {
    out << b.trigger_ns;
    for (const auto t : b.frame_times_ns) out << ',' << t;
    out << '\n';
  }
}

std::vector<CaptureBurst> read_bursts(std::istream& in) {
  std::vector<CaptureBurst> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::int64_t> values;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      long long v = 0;
      try {
        v = std::stoll(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      require(used == cell.size() && !cell.empty(), ErrorCode::MalformedStream,
              "burst line " + std::to_string(line_no) + ": bad integer");
      values.push_back(v);
    }
    require(values.size() >= 2, ErrorCode::MalformedStream, "burst line " + std::to_string(line_no) + ": no frames");
    CaptureBurst b;
    b.trigger_ns = values.front();
    b.frame_times_ns.assign(values.begin() + 1, values.end());
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace mealsense::capture

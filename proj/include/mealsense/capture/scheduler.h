#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mealsense/ingest/streams.h"

namespace mealsense::capture {

struct PitchSample {
  std::int64_t timestamp_ns = 0;
  double pitch_deg = 0;
};

struct CaptureBurst {
  std::int64_t trigger_ns = 0;
  std::vector<std::int64_t> frame_times_ns;
};

struct MealSessionBoundary {
  std::string session_id;
  std::int64_t start_ns = 0;
  std::int64_t end_ns = 0;
  std::vector<std::size_t> window_indices;  // Ingestive windows only
};

struct CaptureConfig {
  double pitch_threshold_deg = 5.0;
  int burst_fps = 10;
  double burst_seconds = 3.0;
  double transition_window_s = 5.0;
  double gap_tolerance_s = 120.0;
  double min_session_s = 60.0;
  int smoothing_windows = 5;
};

// key=value lines; '#' starts a comment. Unknown keys are InvalidArgument.
CaptureConfig parse_capture_config(std::istream& in);

// Degrees, positive when the head tilts forward. All-zero vector: UndefinedAttitude.
double pitch_angle(double ax, double ay, double az);

// Streaming trigger. A burst starts when pitch crosses above the threshold
// while the prediction is Ingestive, a prediction change happened within the
// transition window, and no burst is in progress.
class CaptureScheduler {
 public:
  explicit CaptureScheduler(CaptureConfig config = {});

  std::optional<CaptureBurst> update(const PitchSample& sample, ingest::ActivityLabel window_prediction);

  const CaptureConfig& config() const { return config_; }

 private:
  CaptureConfig config_;
  std::optional<std::int64_t> last_time_;
  std::optional<double> last_pitch_;
  std::optional<ingest::ActivityLabel> last_prediction_;
  std::optional<std::int64_t> last_transition_ns_;
  std::int64_t active_until_ns_ = 0;
  bool active_ = false;
};

// Centered majority filter; ties keep the original label.
std::vector<ingest::ActivityLabel> smooth_predictions(std::span<const ingest::ActivityLabel> predictions,
                                                      int width);

// Smooth, merge Ingestive runs across short gaps, drop short sessions.
// Window w covers [first_window_ns + w*window_ns, first_window_ns + (w+1)*window_ns).
std::vector<MealSessionBoundary> segment_sessions(std::span<const ingest::ActivityLabel> window_predictions,
                                                  const CaptureConfig& config = {},
                                                  std::int64_t first_window_ns = 0,
                                                  const std::string& id_prefix = "session",
                                                  std::int64_t window_ns = ingest::kNanosPerSecond);

// Runs the scheduler over an un-normalized recording: pitch from the left
// accelerometer every `stride` samples, predictions from smoothed windows.
std::vector<CaptureBurst> schedule_recording(const ingest::SyncedRecording& recording,
                                             std::span<const ingest::ActivityLabel> window_predictions,
                                             const CaptureConfig& config = {}, std::size_t stride = 10);

// `trigger_ns,frame0_ns,...,frameN_ns` per line.
void write_bursts(std::ostream& out, std::span<const CaptureBurst> bursts);
std::vector<CaptureBurst> read_bursts(std::istream& in);

}  // namespace mealsense::capture

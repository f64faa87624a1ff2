#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "mealsense/ingest/streams.h"

namespace mealsense::synth {

// Two activity regimes. Ingestive: forward head tilts, chewing-rate jaw
// vibration and crunchy broadband audio bursts. Other: upright gait-like
// motion and voiced, harmonic audio.
struct Segment {
  double seconds = 0;
  ingest::ActivityLabel regime = ingest::ActivityLabel::Other;
};

struct RecordingSpec {
  std::string recording_id;
  std::string user_id;
  std::int64_t start_ns = 0;
  std::vector<Segment> segments;
  std::uint64_t seed = 1;
};

struct SyntheticRecording {
  ingest::RawRecording raw;
  std::vector<ingest::LabelInterval> ingestive;
};

double total_seconds(const RecordingSpec& spec);

// Device-rate streams: left IMU 800 Hz, right IMU 1000 Hz, audio 48 kHz.
SyntheticRecording synthesize(const RecordingSpec& spec);

// Alternating Other/Ingestive segments of random length summing to seconds.
std::vector<Segment> random_schedule(double seconds, std::uint64_t seed, double min_segment = 15.0,
                                     double max_segment = 40.0);

// {"recording_id", "user_id", "start_ns", "seed",
//  "segments": [{"seconds": 30, "regime": "Other" | "Ingestive"}]}
RecordingSpec spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RecordingSpec& spec);
RecordingSpec load_spec(const std::filesystem::path& path);

// Writes imu.csv, audio.wav (32-bit float) and labels.csv into dir.
void write_recording(const SyntheticRecording& recording, const std::filesystem::path& dir);

// One recording per user with a random alternating schedule.
std::vector<RecordingSpec> multi_user_specs(int users, double seconds_per_user, std::uint64_t seed);

}  // namespace mealsense::synth

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mealsense/ingest/streams.h"

namespace mealsense::ingest {

// Linear interpolation of the stream at an arbitrary time; the first/last
// segment is extended linearly outside the sampled span.
ImuSample interpolate_at(const ImuStream& stream, std::int64_t timestamp_ns);

// Upsample onto a uniform grid at target_hz starting at the first timestamp.
// Output length is round(n * target_hz / rate).
ImuStream resample_imu(const ImuStream& stream, int target_hz);

// Windowed-sinc low-pass (450 Hz cutoff for 1 kHz output) then decimation.
AudioStream downsample_audio(const AudioStream& stream, int target_hz);

// Resample/decimate to 1 kHz and trim every stream to the common interval.
SyncedRecording preprocess(const RawRecording& raw);

// Per-recording z-score for each IMU channel, peak normalization for audio.
SyncedRecording normalize(const SyncedRecording& recording);

// One-second non-overlapping windows; the trailing partial second is dropped.
// With labels, a window is Ingestive iff covered for more than half a second.
std::vector<WindowSlice> window(const SyncedRecording& recording,
                                std::optional<std::span<const LabelInterval>> labels = std::nullopt);

// Sorted, merged copy of the intervals (empty or inverted intervals dropped).
std::vector<LabelInterval> merge_intervals(std::span<const LabelInterval> intervals);

}  // namespace mealsense::ingest

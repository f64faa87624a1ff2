#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <utility>
#include <vector>

#include "mealsense/ingest/streams.h"

namespace mealsense::ingest {

// `timestamp_ns,sensor_id,ax,ay,az,gx,gy,gz` per line. sensor_id is
// "left"/"right" (or 0/1). Sample rate is inferred from the median spacing.
std::pair<ImuStream, ImuStream> read_imu_csv(std::istream& in);
std::pair<ImuStream, ImuStream> read_imu_csv(const std::filesystem::path& path);
void write_imu_csv(std::ostream& out, const ImuStream& left, const ImuStream& right);

// Mono PCM WAV, 16-bit integer or 32-bit float.
AudioStream read_wav(std::istream& in, std::int64_t start_ns = 0);
AudioStream read_wav(const std::filesystem::path& path, std::int64_t start_ns = 0);
void write_wav_float(std::ostream& out, const AudioStream& audio);
void write_wav_pcm16(std::ostream& out, const AudioStream& audio);

// `start_ns,end_ns` per line.
std::vector<LabelInterval> read_labels(std::istream& in);
std::vector<LabelInterval> read_labels(const std::filesystem::path& path);
void write_labels(std::ostream& out, const std::vector<LabelInterval>& labels);

}  // namespace mealsense::ingest

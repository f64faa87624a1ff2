#pragma once

#include <span>
#include <string>
#include <vector>

#include "mealsense/detector/train.h"
#include "mealsense/ingest/streams.h"

namespace mealsense::detector {

// preprocess -> normalize -> window (labelled) -> detector inputs.
std::vector<TrainingExample> examples_from_recording(const ingest::RawRecording& raw,
                                                     std::span<const ingest::LabelInterval> labels,
                                                     const std::string& user_id);

// Unlabelled windows of an already preprocessed recording.
std::vector<DetectorInput> inputs_from_recording(const ingest::SyncedRecording& synced);

}  // namespace mealsense::detector

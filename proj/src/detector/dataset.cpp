#include "mealsense/detector/dataset.h"

#include "mealsense/ingest/preprocess.h"

namespace mealsense::detector {

std::vector<TrainingExample> examples_from_recording(const ingest::RawRecording& raw,
                                                     std::span<const ingest::LabelInterval> labels,
                                                     const std::string& user_id) {
  const auto synced = ingest::normalize(ingest::preprocess(raw));
  const auto windows = ingest::window(synced, labels);
  std::vector<TrainingExample> out;
  out.reserve(windows.size());
  for (const auto& w : windows) {
    TrainingExample ex;
    ex.user_id = user_id;
    ex.input = make_detector_input(w);
    ex.label = w.label.value_or(ingest::ActivityLabel::Other);
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<DetectorInput> inputs_from_recording(const ingest::SyncedRecording& synced) {
  const auto windows = ingest::window(ingest::normalize(synced));
  std::vector<DetectorInput> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(make_detector_input(w));
  return out;
}

}  // namespace mealsense::detector

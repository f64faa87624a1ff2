#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mealsense/detector/model.h"
#include "mealsense/detector/train.h"
#include "mealsense/diet/analysis.h"
#include "mealsense/image/services.h"
#include "mealsense/rag/index.h"
#include "mealsense/service/config.h"
#include "mealsense/store/meal_log.h"
#include "mealsense/synth/scene.h"

namespace mealsense::service {

using Clock = std::function<std::int64_t()>;  // epoch nanoseconds
std::int64_t system_now_ns();

struct Upstreams {
  std::shared_ptr<image::SegmentationClient> segmentation;
  std::shared_ptr<image::EmbeddingClient> embedding;
  std::shared_ptr<diet::VlmClient> vlm;
  std::shared_ptr<rag::LlmClient> llm;
  std::shared_ptr<rag::TextEmbedder> text_embedder;
};

// Stub or HTTP clients per the config. Every client shares one in-flight
// limit; VLM, LLM and text-embedding calls also retry ServiceUnavailable
// (image calls are retried by the image pipeline itself).
Upstreams make_upstreams(const ServiceConfig& config);

// "http://host:port/path" -> endpoint. InvalidArgument without a scheme.
util::HttpEndpoint parse_endpoint(const std::string& url, int timeout_ms, const std::string& bearer_token);

struct RecordingUpload {
  std::string user_id;
  std::string recording_id;           // empty: derived from the content
  std::vector<std::string> imu_csv;   // one or more files; each sensor exactly once overall
  std::string wav;
  std::optional<std::int64_t> audio_start_ns;  // default: first IMU timestamp
  std::optional<std::string> labels_csv;       // scores the detector only
  std::vector<image::FrameImage> frames;       // camera frames with captured_ns
  std::optional<synth::SceneScript> scenes;    // synthetic camera when no frames are uploaded;
                                               // falls back to the configured scene_script
  int diners = 1;
};

struct RecordingResult {
  std::string recording_id;
  std::string user_id;
  std::vector<std::string> session_ids;
  std::size_t windows = 0;
  std::size_t ingestive_windows = 0;
  std::size_t bursts = 0;
  std::size_t frames = 0;
  std::vector<std::string> retry_queue;  // frames whose upstream calls never succeeded
  std::optional<detector::Prf> detection;
};

nlohmann::json to_json(const RecordingResult& result);

// Everything a request needs: config, clients, detector, knowledge index and
// store. The store's recompute hook points back here.
class Runtime {
 public:
  Runtime(ServiceConfig config, Upstreams upstreams, Clock clock = system_now_ns);
  ~Runtime();
  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  // make_upstreams, model from model_path when present, index from
  // index_path or knowledge_dir.
  static std::unique_ptr<Runtime> open(const ServiceConfig& config, Clock clock = system_now_ns);

  const ServiceConfig& config() const { return config_; }
  store::MealLogStore& store() { return *store_; }
  std::int64_t now() const { return clock_(); }

  void set_model(detector::ClassifierModel model);
  bool has_model() const;
  void set_index(rag::VectorIndex index);
  const rag::VectorIndex& index() const { return index_; }

  // Conflict without a model, knowledge, or on a repeated recording id;
  // InvalidArgument and the ingest errors for bad uploads.
  RecordingResult ingest(const RecordingUpload& upload);

  // Analysis of the record's items and suggestions over the user's meals in
  // the 7 days up to the record's end.
  store::Derived recompute(const store::MealRecord& record);

  // Live suggestions over the active window at now(). Conflict when no
  // analyzed meal falls in the window.
  diet::SuggestionSet suggestions(const std::string& user_id);

  // Records the user turn and the reply. InvalidArgument on an empty message.
  diet::ChatTurn chat(const std::string& user_id, const std::string& message);

  // Stored profile, or an empty one (version 0) for unknown users.
  diet::UserProfile profile(const std::string& user_id) const;

  std::size_t archive();
  // Periodic archive() every archive_interval_s until stop or destruction.
  void start_sweeper();
  void stop_sweeper();

  std::filesystem::path image_path(const std::string& image_id) const;

 private:
  diet::KnowledgeBase knowledge();
  std::vector<diet::MealSummary> meal_summaries(const std::vector<store::MealRecord>& records) const;

  ServiceConfig config_;
  Upstreams up_;
  Clock clock_;
  rag::VectorIndex index_;
  std::optional<synth::SceneScript> default_scenes_;  // config scene_script
  mutable std::mutex model_mutex_;
  std::shared_ptr<const detector::ClassifierModel> model_;
  std::mutex chat_mutex_;
  std::unique_ptr<store::MealLogStore> store_;

  std::mutex sweep_mutex_;
  std::condition_variable sweep_cv_;
  bool sweep_stop_ = false;
  std::thread sweeper_;
};

}  // namespace mealsense::service

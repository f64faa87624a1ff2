#pragma once

#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <string>

#include "mealsense/capture/scheduler.h"
#include "mealsense/image/pipeline.h"
#include "mealsense/rag/document.h"

namespace mealsense::service {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path data_dir = "mealsense-data";
  std::filesystem::path model_path;      // trained detector; required for POST /recordings
  std::filesystem::path knowledge_dir;   // *.txt knowledge documents
  std::filesystem::path index_path;      // prebuilt vector index; used instead of knowledge_dir when set

  // Stub mode replaces every upstream service with a local deterministic one.
  bool stub_services = true;
  std::filesystem::path stub_dishes;     // colour-key config for segmentation and VLM stubs
  std::filesystem::path scene_script;    // synthetic camera for recordings uploaded without frames

  std::string segmentation_url;
  std::string embedding_url;
  std::string vlm_url;
  std::string llm_url;
  std::string text_embedding_url;
  int upstream_timeout_ms = 30000;
  std::string upstream_api_key;          // sent as a bearer token upstream
  int max_in_flight = 4;                 // concurrent upstream calls
  int max_attempts = 3;

  std::string bearer_token;              // required on every request when non-empty
  double archive_interval_s = 3600;

  capture::CaptureConfig capture;
  image::ImageConfig image;
  rag::ChunkConfig chunking;
  std::size_t top_k = 6;
  std::size_t text_embedding_dim = 256;
};

// key = value lines, '#' comments, unknown keys InvalidArgument. Paths are
// taken relative to base_dir. Keys: host port data_dir model_path
// knowledge_dir index_path stub_services stub_dishes scene_script
// segmentation_url embedding_url vlm_url llm_url text_embedding_url
// upstream_timeout_ms upstream_api_key max_in_flight max_attempts
// bearer_token archive_interval_s pitch_threshold_deg burst_fps
// burst_seconds transition_window_s gap_tolerance_s min_session_s
// smoothing_windows dedup_threshold blur_sigma blur_kernel crop_padding
// chunk_size chunk_overlap top_k text_embedding_dim
ServiceConfig parse_service_config(std::istream& in, const std::filesystem::path& base_dir = ".");
ServiceConfig load_service_config(const std::filesystem::path& path);

// Sets one key; the same rules as the file parser.
void set_config_value(ServiceConfig& config, const std::string& key, const std::string& value,
                      const std::filesystem::path& base_dir = ".");

// MEALSENSE_<KEY> (upper case) overrides any key; meant for secrets such as
// MEALSENSE_BEARER_TOKEN and MEALSENSE_UPSTREAM_API_KEY. `getenv` is
// injectable for tests.
void apply_env_overrides(ServiceConfig& config,
                         const std::function<std::optional<std::string>(const std::string&)>& getenv);
void apply_env_overrides(ServiceConfig& config);

}  // namespace mealsense::service

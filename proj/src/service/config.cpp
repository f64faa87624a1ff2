#include "mealsense/service/config.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>

#include "mealsense/error.h"

namespace mealsense::service {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double number(const std::string& key, const std::string& v) {
  double out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  require(ec == std::errc() && p == v.data() + v.size() && std::isfinite(out), ErrorCode::InvalidArgument,
          "config: " + key + " needs a number, got '" + v + "'");
  return out;
}

int integer(const std::string& key, const std::string& v) {
  const double d = number(key, v);
  require(d == std::floor(d) && std::abs(d) < 1e9, ErrorCode::InvalidArgument, "config: " + key + " needs an integer");
  return static_cast<int>(d);
}

std::size_t count(const std::string& key, const std::string& v) {
  const int i = integer(key, v);
  require(i >= 0, ErrorCode::InvalidArgument, "config: " + key + " must not be negative");
  return static_cast<std::size_t>(i);
}

bool boolean(const std::string& key, std::string v) {
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  fail(ErrorCode::InvalidArgument, "config: " + key + " needs true/false, got '" + v + "'");
}

std::filesystem::path path_value(const std::string& v, const std::filesystem::path& base) {
  if (v.empty()) return {};
  const std::filesystem::path p(v);
  return p.is_absolute() ? p : base / p;
}

void validate(const ServiceConfig& c) {
  require(c.port >= 0 && c.port <= 65535, ErrorCode::InvalidArgument, "config: port out of range");
  require(c.max_in_flight >= 1, ErrorCode::InvalidArgument, "config: max_in_flight must be at least 1");
  require(c.max_attempts >= 1, ErrorCode::InvalidArgument, "config: max_attempts must be at least 1");
  require(c.top_k >= 1, ErrorCode::InvalidArgument, "config: top_k must be at least 1");
  require(c.text_embedding_dim >= 1, ErrorCode::InvalidArgument, "config: text_embedding_dim must be at least 1");
  require(c.chunking.overlap < c.chunking.chunk_size, ErrorCode::InvalidArgument,
          "config: chunk_overlap must be below chunk_size");
  require(c.image.blur_kernel > 0 && c.image.blur_kernel % 2 == 1, ErrorCode::InvalidArgument,
          "config: blur_kernel must be odd and positive");
  require(c.image.dedup_threshold >= -1 && c.image.dedup_threshold <= 1, ErrorCode::InvalidArgument,
          "config: dedup_threshold must lie in [-1, 1]");
  capture::CaptureScheduler check(c.capture);  // validates the capture thresholds
}

}  // namespace

void set_config_value(ServiceConfig& c, const std::string& key, const std::string& value,
                      const std::filesystem::path& base) {
  const std::string& v = value;
  if (key == "host") c.host = v;
  else if (key == "port") c.port = integer(key, v);
  else if (key == "data_dir") c.data_dir = path_value(v, base);
  else if (key == "model_path") c.model_path = path_value(v, base);
  else if (key == "knowledge_dir") c.knowledge_dir = path_value(v, base);
  else if (key == "index_path") c.index_path = path_value(v, base);
  else if (key == "stub_services") c.stub_services = boolean(key, v);
  else if (key == "stub_dishes") c.stub_dishes = path_value(v, base);
  else if (key == "scene_script") c.scene_script = path_value(v, base);
  else if (key == "segmentation_url") c.segmentation_url = v;
  else if (key == "embedding_url") c.embedding_url = v;
  else if (key == "vlm_url") c.vlm_url = v;
  else if (key == "llm_url") c.llm_url = v;
  else if (key == "text_embedding_url") c.text_embedding_url = v;
  else if (key == "upstream_timeout_ms") c.upstream_timeout_ms = integer(key, v);
  else if (key == "upstream_api_key") c.upstream_api_key = v;
  else if (key == "max_in_flight") c.max_in_flight = integer(key, v);
  else if (key == "max_attempts") c.max_attempts = c.image.max_attempts = integer(key, v);
  else if (key == "bearer_token") c.bearer_token = v;
  else if (key == "archive_interval_s") c.archive_interval_s = number(key, v);
  else if (key == "pitch_threshold_deg") c.capture.pitch_threshold_deg = number(key, v);
  else if (key == "burst_fps") c.capture.burst_fps = integer(key, v);
  else if (key == "burst_seconds") c.capture.burst_seconds = number(key, v);
  else if (key == "transition_window_s") c.capture.transition_window_s = number(key, v);
  else if (key == "gap_tolerance_s") c.capture.gap_tolerance_s = number(key, v);
  else if (key == "min_session_s") c.capture.min_session_s = number(key, v);
  else if (key == "smoothing_windows") c.capture.smoothing_windows = integer(key, v);
  else if (key == "dedup_threshold") c.image.dedup_threshold = number(key, v);
  else if (key == "blur_sigma") c.image.blur_sigma = number(key, v);
  else if (key == "blur_kernel") c.image.blur_kernel = integer(key, v);
  else if (key == "crop_padding") c.image.crop_padding = number(key, v);
  else if (key == "chunk_size") c.chunking.chunk_size = count(key, v);
  else if (key == "chunk_overlap") c.chunking.overlap = count(key, v);
  else if (key == "top_k") c.top_k = count(key, v);
  else if (key == "text_embedding_dim") c.text_embedding_dim = count(key, v);
  else fail(ErrorCode::InvalidArgument, "config: unknown key '" + key + "'");
}

ServiceConfig parse_service_config(std::istream& in, const std::filesystem::path& base_dir) {
  ServiceConfig c;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::InvalidArgument,
            "config line " + std::to_string(line_no) + ": expected key = value");
    set_config_value(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), base_dir);
  }
  validate(c);
  return c;
}

ServiceConfig load_service_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open config " + path.string());
  return parse_service_config(in, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

void apply_env_overrides(ServiceConfig& config,
                         const std::function<std::optional<std::string>(const std::string&)>& getenv) {
  static const char* kKeys[] = {
      "host", "port", "data_dir", "model_path", "knowledge_dir", "index_path", "stub_services", "stub_dishes",
      "scene_script", "segmentation_url", "embedding_url", "vlm_url", "llm_url", "text_embedding_url",
      "upstream_timeout_ms", "upstream_api_key", "max_in_flight", "max_attempts", "bearer_token",
      "archive_interval_s", "pitch_threshold_deg", "burst_fps", "burst_seconds", "transition_window_s",
      "gap_tolerance_s", "min_session_s", "smoothing_windows", "dedup_threshold", "blur_sigma", "blur_kernel",
      "crop_padding", "chunk_size", "chunk_overlap", "top_k", "text_embedding_dim"};
  for (const char* key : kKeys) {
    std::string name = "MEALSENSE_";
    for (const char* p = key; *p; ++p) name += static_cast<char>(std::toupper(static_cast<unsigned char>(*p)));
    if (const auto v = getenv(name)) set_config_value(config, key, *v, std::filesystem::current_path());
  }
  validate(config);
}

void apply_env_overrides(ServiceConfig& config) {
  apply_env_overrides(config, [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (!v) return std::nullopt;
    return std::string(v);
  });
}

}  // namespace mealsense::service

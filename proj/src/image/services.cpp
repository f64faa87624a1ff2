#include "mealsense/image/services.h"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "mealsense/error.h"
#include "mealsense/util/hash.h"

namespace mealsense::image {

namespace {

std::vector<double> unit(std::vector<double> v) {
  double norm = 0;
  for (double x : v) {
    require(std::isfinite(x), ErrorCode::ProtocolError, "embedding has non-finite values");
    norm += x * x;
  }
  norm = std::sqrt(norm);
  require(norm > 0, ErrorCode::ProtocolError, "embedding is the zero vector");
  for (double& x : v) x /= norm;
  return v;
}

std::string image_base64(const FrameImage& frame) {
  const auto bytes = encode_ppm(frame);
  return util::base64_encode(bytes);
}

}  // namespace

const std::vector<std::string>& default_class_prompt() {
  static const std::vector<std::string> labels{"food",  "dish", "drink",    "beverage", "cup",
                                               "bowl",  "plate", "cutlery", "tableware"};
  return labels;
}

StubImageConfig StubImageConfig::from_json(const nlohmann::json& j) {
  try {
    StubImageConfig c;
    c.fail_first = j.value("fail_first", 0);
    if (j.contains("frames")) {
      for (const auto& [id, entry] : j.at("frames").items()) {
        if (entry.contains("masks")) {
          auto& list = c.masks[id];
          for (const auto& m : entry.at("masks")) {
            CannedMask cm;
            cm.label = m.at("label").get<std::string>();
            cm.confidence = m.value("confidence", 1.0);
            if (m.contains("rect")) {
              cm.rect = m.at("rect").get<std::vector<int>>();
              require(cm.rect.size() == 4, ErrorCode::InvalidArgument, "stub rect needs 4 values");
            } else {
              cm.rle = m.at("rle").at("counts").get<std::vector<std::uint32_t>>();
            }
            list.push_back(std::move(cm));
          }
        }
        if (entry.contains("embedding")) c.embeddings[id] = entry.at("embedding").get<std::vector<double>>();
      }
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidArgument, std::string("stub image config: ") + e.what());
  }
}

StubImageConfig StubImageConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::InvalidArgument, "stub image config " + path.string() + ": " + e.what());
  }
}

StubSegmentationClient::StubSegmentationClient(StubImageConfig config) : config_(std::move(config)) {}

std::vector<SegmentMask> StubSegmentationClient::segment(const FrameImage& frame, std::span<const std::string> labels) {
  validate(frame);
  if (calls_.fetch_add(1) < config_.fail_first) {
    fail(ErrorCode::ServiceUnavailable, "stub segmentation: injected outage");
  }
  std::vector<SegmentMask> out;
  const auto it = config_.masks.find(frame.frame_id);
  if (it == config_.masks.end()) return out;
  for (const auto& cm : it->second) {
    if (std::find(labels.begin(), labels.end(), cm.label) == labels.end()) continue;
    SegmentMask m;
    m.class_label = cm.label;
    m.confidence = cm.confidence;
    m.mask = cm.rect.empty() ? rle_decode(frame.width, frame.height, cm.rle)
                             : rect_mask(frame.width, frame.height, cm.rect[0], cm.rect[1], cm.rect[2], cm.rect[3]);
    out.push_back(std::move(m));
  }
  return out;
}

ColorKeyConfig ColorKeyConfig::from_json(const nlohmann::json& j) {
  ColorKeyConfig c;
  c.min_pixels = j.value("min_pixels", std::size_t{20});
  c.fail_first = j.value("fail_first", 0);
  for (const auto& d : j.value("dishes", nlohmann::json::array())) {
    ColorKey k;
    k.label = d.at("label").get<std::string>();
    const auto rgb = d.at("rgb").get<std::vector<int>>();
    require(rgb.size() == 3, ErrorCode::InvalidArgument, "key colour needs 3 channels");
    for (std::size_t i = 0; i < 3; ++i) k.rgb[i] = static_cast<std::uint8_t>(std::clamp(rgb[i], 0, 255));
    c.keys.push_back(std::move(k));
  }
  return c;
}

Bitmap color_key_mask(const FrameImage& frame, const std::array<std::uint8_t, 3>& rgb) {
  validate(frame);
  auto mask = Bitmap::zeros(frame.width, frame.height);
  for (int y = 0; y < frame.height; ++y)
    for (int x = 0; x < frame.width; ++x)
      if (frame.at(x, y, 0) == rgb[0] && frame.at(x, y, 1) == rgb[1] && frame.at(x, y, 2) == rgb[2]) mask.set(x, y, true);
  return mask;
}

ColorKeySegmentationClient::ColorKeySegmentationClient(ColorKeyConfig config) : config_(std::move(config)) {}

std::vector<SegmentMask> ColorKeySegmentationClient::segment(const FrameImage& frame,
                                                             std::span<const std::string> labels) {
  validate(frame);
  if (calls_.fetch_add(1) < config_.fail_first) fail(ErrorCode::ServiceUnavailable, "stub segmentation: injected outage");
  std::vector<SegmentMask> out;
  for (const auto& key : config_.keys) {
    if (std::find(labels.begin(), labels.end(), key.label) == labels.end()) continue;
    auto mask = color_key_mask(frame, key.rgb);
    if (mask.count() < config_.min_pixels) continue;
    out.push_back({key.label, std::move(mask), 1.0});
  }
  return out;
}

StubEmbeddingClient::StubEmbeddingClient(StubImageConfig config) : config_(std::move(config)) {}

std::vector<double> StubEmbeddingClient::embed(const FrameImage& image) {
  validate(image);
  if (const auto it = config_.embeddings.find(image.frame_id); it != config_.embeddings.end()) {
    return unit(it->second);
  }
  return color_histogram_embedding(image);
}

std::vector<double> color_histogram_embedding(const FrameImage& image) {
  validate(image);
  std::vector<double> hist(64, 0.0);
  for (std::size_t i = 0; i < image.pixels.size(); i += 3) {
    const int r = image.pixels[i] >> 6, g = image.pixels[i + 1] >> 6, b = image.pixels[i + 2] >> 6;
    hist[static_cast<std::size_t>(r * 16 + g * 4 + b)] += 1.0;
  }
  return unit(std::move(hist));
}

HttpSegmentationClient::HttpSegmentationClient(util::HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

std::vector<SegmentMask> HttpSegmentationClient::segment(const FrameImage& frame, std::span<const std::string> labels) {
  validate(frame);
  if (labels.empty()) return {};
  const nlohmann::json request{{"image_ppm_base64", image_base64(frame)},
                               {"labels", std::vector<std::string>(labels.begin(), labels.end())}};
  const auto reply = util::post_json(endpoint_, request);
  require(reply.is_object() && reply.contains("masks") && reply["masks"].is_array(), ErrorCode::ProtocolError,
          "segmentation reply lacks a masks array");
  std::vector<SegmentMask> out;
  for (const auto& j : reply["masks"]) {
    auto m = mask_from_json(j);
    require(m.mask.width == frame.width && m.mask.height == frame.height, ErrorCode::ProtocolError,
            "mask dimensions do not match the frame");
    require(std::find(labels.begin(), labels.end(), m.class_label) != labels.end(), ErrorCode::ProtocolError,
            "mask label was not prompted: " + m.class_label);
    out.push_back(std::move(m));
  }
  return out;
}

HttpEmbeddingClient::HttpEmbeddingClient(util::HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

std::vector<double> HttpEmbeddingClient::embed(const FrameImage& image) {
  validate(image);
  const auto reply = util::post_json(endpoint_, {{"image_ppm_base64", image_base64(image)}});
  try {
    return unit(reply.at("embedding").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ProtocolError, std::string("embedding reply: ") + e.what());
  }
}

RetryingSegmentationClient::RetryingSegmentationClient(std::shared_ptr<SegmentationClient> inner, int max_attempts)
    : inner_(std::move(inner)), max_attempts_(std::max(1, max_attempts)) {}

std::vector<SegmentMask> RetryingSegmentationClient::segment(const FrameImage& frame,
                                                             std::span<const std::string> labels) {
  return with_retries(max_attempts_, [&] { return inner_->segment(frame, labels); });
}

RetryingEmbeddingClient::RetryingEmbeddingClient(std::shared_ptr<EmbeddingClient> inner, int max_attempts)
    : inner_(std::move(inner)), max_attempts_(std::max(1, max_attempts)) {}

std::vector<double> RetryingEmbeddingClient::embed(const FrameImage& image) {
  return with_retries(max_attempts_, [&] { return inner_->embed(image); });
}

}  // namespace mealsense::image

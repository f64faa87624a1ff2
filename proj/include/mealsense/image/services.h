#pragma once

#include <array>
#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "mealsense/error.h"
#include "mealsense/image/frame.h"
#include "mealsense/util/http_json.h"

namespace mealsense::image {

const std::vector<std::string>& default_class_prompt();

// Calls fn until it succeeds, rethrowing anything but ServiceUnavailable and
// the last ServiceUnavailable after max_attempts calls.
template <typename Fn>
auto with_retries(int max_attempts, Fn&& fn) -> decltype(fn()) {
  for (int attempt = 1;; ++attempt) {
    try {
      return fn();
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ServiceUnavailable || attempt >= max_attempts) throw;
    }
  }
}

class SegmentationClient {
 public:
  virtual ~SegmentationClient() = default;
  // Masks for the prompted labels only. ServiceUnavailable or ProtocolError on failure.
  virtual std::vector<SegmentMask> segment(const FrameImage& frame, std::span<const std::string> labels) = 0;
};

class EmbeddingClient {
 public:
  virtual ~EmbeddingClient() = default;
  virtual std::vector<double> embed(const FrameImage& image) = 0;
};

// Canned responses keyed by frame id, loaded from a JSON stub file:
// {"fail_first": 0,
//  "frames": {"<frame_id>": {"masks": [{"label": "bowl", "rect": [x0, y0, x1, y1], "confidence": 0.9}],
//                            "embedding": [...]}}}
// Masks may also be given in wire form ("rle"). Unknown frames get no masks.
struct StubImageConfig {
  struct CannedMask {
    std::string label;
    std::vector<int> rect;  // x0 y0 x1 y1, or empty when rle is used
    std::vector<std::uint32_t> rle;
    double confidence = 1.0;
  };
  std::map<std::string, std::vector<CannedMask>> masks;
  std::map<std::string, std::vector<double>> embeddings;
  int fail_first = 0;  // first N calls raise ServiceUnavailable

  static StubImageConfig from_json(const nlohmann::json& j);
  static StubImageConfig load(const std::filesystem::path& path);
};

class StubSegmentationClient : public SegmentationClient {
 public:
  explicit StubSegmentationClient(StubImageConfig config);
  std::vector<SegmentMask> segment(const FrameImage& frame, std::span<const std::string> labels) override;
  int calls() const { return calls_.load(); }

 private:
  StubImageConfig config_;
  std::atomic<int> calls_{0};
};

// Canned vector for known frame ids; otherwise a deterministic colour
// histogram (4x4x4 bins) of the image. Always unit-normalized.
class StubEmbeddingClient : public EmbeddingClient {
 public:
  explicit StubEmbeddingClient(StubImageConfig config = {});
  std::vector<double> embed(const FrameImage& image) override;

 private:
  StubImageConfig config_;
};

std::vector<double> color_histogram_embedding(const FrameImage& image);

// Content-driven stub for synthetic scenes: a label is present exactly where
// its key colour is. JSON: {"min_pixels": 20, "fail_first": 0,
// "dishes": [{"label": "bowl", "rgb": [r, g, b], ...}]}; other fields are ignored.
struct ColorKey {
  std::string label;
  std::array<std::uint8_t, 3> rgb{};
};

struct ColorKeyConfig {
  std::vector<ColorKey> keys;
  std::size_t min_pixels = 20;
  int fail_first = 0;

  static ColorKeyConfig from_json(const nlohmann::json& j);
};

// Pixels exactly equal to a key colour.
Bitmap color_key_mask(const FrameImage& frame, const std::array<std::uint8_t, 3>& rgb);

class ColorKeySegmentationClient : public SegmentationClient {
 public:
  explicit ColorKeySegmentationClient(ColorKeyConfig config);
  std::vector<SegmentMask> segment(const FrameImage& frame, std::span<const std::string> labels) override;
  int calls() const { return calls_.load(); }

 private:
  ColorKeyConfig config_;
  std::atomic<int> calls_{0};
};

// Request {"image_ppm_base64", "labels"}; reply {"masks": [wire masks]}.
class HttpSegmentationClient : public SegmentationClient {
 public:
  explicit HttpSegmentationClient(util::HttpEndpoint endpoint);
  std::vector<SegmentMask> segment(const FrameImage& frame, std::span<const std::string> labels) override;

 private:
  util::HttpEndpoint endpoint_;
};

// Request {"image_ppm_base64"}; reply {"embedding": [...]}.
class HttpEmbeddingClient : public EmbeddingClient {
 public:
  explicit HttpEmbeddingClient(util::HttpEndpoint endpoint);
  std::vector<double> embed(const FrameImage& image) override;

 private:
  util::HttpEndpoint endpoint_;
};

// Retries ServiceUnavailable up to max_attempts calls in total.
class RetryingSegmentationClient : public SegmentationClient {
 public:
  RetryingSegmentationClient(std::shared_ptr<SegmentationClient> inner, int max_attempts);
  std::vector<SegmentMask> segment(const FrameImage& frame, std::span<const std::string> labels) override;

 private:
  std::shared_ptr<SegmentationClient> inner_;
  int max_attempts_;
};

class RetryingEmbeddingClient : public EmbeddingClient {
 public:
  RetryingEmbeddingClient(std::shared_ptr<EmbeddingClient> inner, int max_attempts);
  std::vector<double> embed(const FrameImage& image) override;

 private:
  std::shared_ptr<EmbeddingClient> inner_;
  int max_attempts_;
};

}  // namespace mealsense::image

#include "mealsense/image/pipeline.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "mealsense/error.h"

namespace mealsense::image {

RowRange crop_roi(const FrameImage& frame) {
  validate(frame);
  require(frame.height >= 3, ErrorCode::InvalidImage, "region of interest needs height >= 3");
  return {(2 * frame.height) / 3, frame.height - 1};
}

namespace {

std::vector<double> gaussian_kernel(double sigma, int size) {
  require(size >= 1 && size % 2 == 1, ErrorCode::InvalidArgument, "blur kernel size must be odd");
  require(sigma > 0, ErrorCode::InvalidArgument, "blur sigma must be positive");
  const int r = size / 2;
  std::vector<double> k(static_cast<std::size_t>(size));
  double sum = 0;
  for (int i = -r; i <= r; ++i) {
    k[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += k[static_cast<std::size_t>(i + r)];
  }
  for (double& v : k) v /= sum;
  return k;
}

}  // namespace

FrameImage gaussian_blur(const FrameImage& frame, double sigma, int kernel) {
  validate(frame);
  const auto k = gaussian_kernel(sigma, kernel);
  const int r = kernel / 2;
  const int w = frame.width, h = frame.height;
  std::vector<double> tmp(frame.pixels.size());
  auto idx = [w](int x, int y, int c) { return (static_cast<std::size_t>(y) * w + x) * 3 + c; };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0;
        for (int i = -r; i <= r; ++i) acc += k[static_cast<std::size_t>(i + r)] * frame.pixels[idx(std::clamp(x + i, 0, w - 1), y, c)];
        tmp[idx(x, y, c)] = acc;
      }
  FrameImage out = frame;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0;
        for (int i = -r; i <= r; ++i) acc += k[static_cast<std::size_t>(i + r)] * tmp[idx(x, std::clamp(y + i, 0, h - 1), c)];
        out.pixels[idx(x, y, c)] = static_cast<std::uint8_t>(std::clamp(std::lround(acc), 0L, 255L));
      }
  return out;
}

ProcessedMealImage blur_and_crop(const FrameImage& frame, std::span<const SegmentMask> masks, const ImageConfig& config) {
  const RowRange roi = crop_roi(frame);
  Bitmap composite = Bitmap::zeros(frame.width, frame.height);
  std::set<std::string> labels;
  for (const auto& m : masks) {
    require(m.mask.width == frame.width && m.mask.height == frame.height, ErrorCode::InvalidImage,
            "mask dimensions do not match the frame");
    bool in_roi = false;
    for (int y = roi.first; y <= roi.last && !in_roi; ++y)
      for (int x = 0; x < frame.width && !in_roi; ++x) in_roi = m.mask.get(x, y);
    if (!in_roi) continue;
    labels.insert(m.class_label);
    for (std::size_t i = 0; i < composite.bits.size(); ++i) composite.bits[i] |= m.mask.bits[i];
  }
  require(!labels.empty(), ErrorCode::NoMealContent, "no mask intersects the region of interest in " + frame.frame_id);

  int x0 = frame.width, y0 = frame.height, x1 = -1, y1 = -1;
  for (int y = 0; y < frame.height; ++y)
    for (int x = 0; x < frame.width; ++x)
      if (composite.get(x, y)) {
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
  const int pad_x = static_cast<int>(std::ceil(config.crop_padding * (x1 - x0 + 1)));
  const int pad_y = static_cast<int>(std::ceil(config.crop_padding * (y1 - y0 + 1)));
  x0 = std::max(0, x0 - pad_x);
  y0 = std::max(0, y0 - pad_y);
  x1 = std::min(frame.width - 1, x1 + pad_x);
  y1 = std::min(frame.height - 1, y1 + pad_y);

  // Blur the full frame so the crop border sees real neighbours.
  const FrameImage blurred = gaussian_blur(frame, config.blur_sigma, config.blur_kernel);

  ProcessedMealImage out;
  out.source_frame_id = frame.frame_id;
  out.captured_ns = frame.captured_ns;
  out.labels.assign(labels.begin(), labels.end());
  out.crop_x = x0;
  out.crop_y = y0;
  out.pixels.frame_id = frame.frame_id;
  out.pixels.captured_ns = frame.captured_ns;
  out.pixels.width = x1 - x0 + 1;
  out.pixels.height = y1 - y0 + 1;
  out.pixels.pixels.resize(3ULL * static_cast<std::size_t>(out.pixels.width) * static_cast<std::size_t>(out.pixels.height));
  out.composite_mask = Bitmap::zeros(out.pixels.width, out.pixels.height);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const bool keep = composite.get(x, y);
      out.composite_mask.set(x - x0, y - y0, keep);
      const FrameImage& src = keep ? frame : blurred;
      for (int c = 0; c < 3; ++c) out.pixels.at(x - x0, y - y0, c) = src.at(x, y, c);
    }
  return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size() && !a.empty(), ErrorCode::DimensionError, "cosine similarity needs equal, non-empty vectors");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  require(na > 0 && nb > 0, ErrorCode::DimensionError, "cosine similarity of a zero vector");
  return dot / std::sqrt(na * nb);
}

std::vector<std::size_t> dedup_indices(std::span<const std::vector<double>> embeddings, double threshold) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    const bool duplicate = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return cosine_similarity(embeddings[i], embeddings[k]) > threshold;
    });
    if (!duplicate) kept.push_back(i);
  }
  return kept;
}

std::vector<ProcessedMealImage> dedup(std::vector<ProcessedMealImage> images, double threshold) {
  std::vector<std::vector<double>> embeddings;
  embeddings.reserve(images.size());
  for (const auto& im : images) embeddings.push_back(im.embedding);
  std::vector<ProcessedMealImage> out;
  for (auto i : dedup_indices(embeddings, threshold)) out.push_back(std::move(images[i]));
  return out;
}

PipelineResult process_frames(std::span<const FrameImage> frames, SegmentationClient& segmenter,
                              EmbeddingClient& embedder, const ImageConfig& config) {
  PipelineResult result;
  std::vector<ProcessedMealImage> candidates;
  for (const auto& frame : frames) {
    try {
      const auto masks = with_retries(config.max_attempts, [&] { return segmenter.segment(frame, config.class_prompt); });
      auto processed = blur_and_crop(frame, masks, config);
      processed.embedding = with_retries(config.max_attempts, [&] { return embedder.embed(processed.pixels); });
      candidates.push_back(std::move(processed));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::NoMealContent) {
        result.no_meal_content.push_back(frame.frame_id);
      } else if (e.code() == ErrorCode::ServiceUnavailable) {
        result.retry_queue.push_back(frame.frame_id);
      } else {
        throw;
      }
    }
  }
  std::vector<std::vector<double>> embeddings;
  for (const auto& c : candidates) embeddings.push_back(c.embedding);
  const auto kept = dedup_indices(embeddings, config.dedup_threshold);
  std::size_t next = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (next < kept.size() && kept[next] == i) {
      result.kept.push_back(std::move(candidates[i]));
      ++next;
    } else {
      result.duplicates.push_back(candidates[i].source_frame_id);
    }
  }
  return result;
}

}  // namespace mealsense::image

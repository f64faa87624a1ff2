#pragma once

#include <span>
#include <string>
#include <vector>

#include "mealsense/image/frame.h"
#include "mealsense/image/services.h"

namespace mealsense::image {

struct ImageConfig {
  double blur_sigma = 8.0;
  int blur_kernel = 25;  // odd
  double crop_padding = 0.05;
  double dedup_threshold = 0.75;
  int max_attempts = 3;
  std::vector<std::string> class_prompt = default_class_prompt();
};

struct RowRange {
  int first = 0;  // inclusive
  int last = 0;   // inclusive
};

// Rows floor(2h/3) .. h-1. InvalidImage when height < 3 or the frame is malformed.
RowRange crop_roi(const FrameImage& frame);

// Clamped-edge separable Gaussian blur, rounded to the nearest integer.
FrameImage gaussian_blur(const FrameImage& frame, double sigma, int kernel);

struct ProcessedMealImage {
  std::string source_frame_id;
  std::int64_t captured_ns = 0;
  int crop_x = 0;  // crop origin in the source frame
  int crop_y = 0;
  Bitmap composite_mask;  // in cropped coordinates
  FrameImage pixels;      // blurred outside the mask, cropped
  std::vector<double> embedding;
  std::vector<std::string> labels;  // distinct labels of the qualifying masks
};

// Masks with at least one pixel inside the ROI qualify; their union stays
// sharp, everything else is blurred; output is cropped to the union's
// bounding box grown by the padding fraction. NoMealContent if none qualify.
ProcessedMealImage blur_and_crop(const FrameImage& frame, std::span<const SegmentMask> masks,
                                 const ImageConfig& config = {});

double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Greedy keep-first: index i is dropped iff cos(i, kept) > threshold for some kept image.
std::vector<std::size_t> dedup_indices(std::span<const std::vector<double>> embeddings, double threshold = 0.75);
std::vector<ProcessedMealImage> dedup(std::vector<ProcessedMealImage> images, double threshold = 0.75);

struct PipelineResult {
  std::vector<ProcessedMealImage> kept;
  std::vector<std::string> no_meal_content;  // dropped frame ids
  std::vector<std::string> duplicates;       // dropped frame ids
  std::vector<std::string> retry_queue;      // service still unavailable
};

// Frames are processed in capture order; dedup runs over the survivors.
PipelineResult process_frames(std::span<const FrameImage> frames, SegmentationClient& segmenter,
                              EmbeddingClient& embedder, const ImageConfig& config = {});

}  // namespace mealsense::image

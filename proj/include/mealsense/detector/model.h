#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mealsense/features/audio_features.h"
#include "mealsense/features/feature_vector.h"
#include "mealsense/ingest/streams.h"

namespace mealsense::detector {

// Everything the classifier sees for one window.
struct DetectorInput {
  features::FeatureVector features;
  std::vector<double> raw_imu;  // 12 x 1000, channel-major
  features::MelSpectrogram raw_mel;
};

DetectorInput make_detector_input(const ingest::WindowSlice& window);

struct ModelConfig {
  int imu_filters = 8;
  int imu_kernel = 10;
  int imu_stride = 10;
  int mel_filters = 8;
  int mel_kernel = 3;
  int stats_units = 16;
  int hidden_units = 16;
};

// Standardisation fitted on the training split and carried with the model.
struct InputNormalizer {
  std::vector<double> stats_mean;
  std::vector<double> stats_scale;
  std::vector<double> mel_mean;   // per band, on log power
  std::vector<double> mel_scale;

  static InputNormalizer fit(std::span<const DetectorInput> inputs);
  static InputNormalizer identity(std::size_t stats_length, std::size_t mel_bands);
};

struct LayerShape {
  std::string name;
  std::vector<int> dims;
};

// Two convolutional encoders (raw IMU, log-mel) and a dense branch over the
// standardised statistical features, concatenated into a two-layer head with
// a sigmoid output. All parameters live in one flat vector.
class ClassifierModel {
 public:
  ClassifierModel() = default;
  ClassifierModel(const ModelConfig& config, InputNormalizer normalizer, int mel_frames,
                  std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const InputNormalizer& normalizer() const { return normalizer_; }
  int layout_version() const { return layout_version_; }
  int mel_frames() const { return mel_frames_; }
  std::vector<LayerShape> layer_shapes() const;

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  std::uint64_t training_config_digest() const { return training_config_digest_; }
  void set_training_config_digest(std::uint64_t d) { training_config_digest_ = d; }

  // Logit of P(Ingestive).
  double logit(const DetectorInput& input) const;
  double predict_proba(const DetectorInput& input) const;

  // Weighted binary cross-entropy of one example; adds d(loss)/d(params) into
  // grad when non-null (grad must have parameters().size() entries).
  double loss_and_gradient(const DetectorInput& input, double target, double weight,
                           std::span<double> grad) const;

  // Digest of layout, shapes, normalizer and weights.
  std::uint64_t digest() const;

  void save(std::ostream& out) const;
  static ClassifierModel load(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static ClassifierModel load(const std::filesystem::path& path);

 private:
  struct Offsets {
    std::size_t w_imu, b_imu, w_mel, b_mel, w_stats, b_stats, w_hidden, b_hidden, w_out, b_out, total;
  };
  struct Prepared;

  void compute_offsets();
  int imu_positions() const;
  int mel_positions() const;
  std::size_t head_inputs() const;
  Prepared prepare(const DetectorInput& input) const;
  double forward_backward(const Prepared& x, double target, double weight, std::span<double> grad,
                          bool want_grad) const;

  ModelConfig config_{};
  InputNormalizer normalizer_{};
  int layout_version_ = features::kLayoutVersion;
  int mel_frames_ = 0;
  std::uint64_t training_config_digest_ = 0;
  Offsets off_{};
  std::vector<double> params_;
};

}  // namespace mealsense::detector

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mealsense/detector/model.h"
#include "mealsense/ingest/streams.h"

namespace mealsense::detector {

struct TrainingExample {
  std::string user_id;
  DetectorInput input;
  ingest::ActivityLabel label = ingest::ActivityLabel::Other;
};

struct TrainConfig {
  ModelConfig model{};
  int epochs = 12;
  int batch_size = 16;
  double learning_rate = 0.05;
  double momentum = 0.9;
  // Inverse-frequency class weights; off by default.
  bool class_weighting = false;
  std::uint64_t seed = 42;
  // Folds of evaluate_louo run concurrently when true.
  bool parallel_folds = true;
};

std::uint64_t config_digest(const TrainConfig& config);

// Mini-batch gradient descent with momentum on weighted cross-entropy.
// Deterministic for a given dataset order and config.seed.
ClassifierModel train(std::span<const TrainingExample> dataset, const TrainConfig& config);

double predict(const ClassifierModel& model, const DetectorInput& input);

// Ties go to Other.
inline ingest::ActivityLabel decide(double probability) {
  return probability > 0.5 ? ingest::ActivityLabel::Ingestive : ingest::ActivityLabel::Other;
}

// Mean weighted loss over the batch; grad (resized to the parameter count)
// receives the mean gradient.
double batch_loss_and_gradient(const ClassifierModel& model, std::span<const TrainingExample> batch,
                               std::vector<double>& grad, double positive_weight = 1.0,
                               double negative_weight = 1.0);

struct GradientCheckResult {
  double max_relative_error = 0;
  std::size_t parameters_checked = 0;
};

// Analytic gradient vs central differences on `samples` randomly chosen
// parameters. Relative error is |a - n| / max(|a|, |n|, 1e-8).
GradientCheckResult gradient_check(const ClassifierModel& model, const TrainingExample& example,
                                   std::size_t samples = 20, double step = 1e-5, std::uint64_t seed = 1);

struct Prf {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

// With nothing to find and nothing claimed (tp = fp = fn = 0) all three are 1.
Prf prf_from_confusion(const Confusion& c);

struct FoldRecord {
  std::string held_out_user;
  std::vector<std::string> training_users;
  Confusion confusion;
};

struct EvalReport {
  std::map<std::string, Prf> per_user;
  Prf macro;
  std::vector<FoldRecord> folds;
};

// Leave-one-user-out: one fold per distinct user_id.
EvalReport evaluate_louo(std::span<const TrainingExample> dataset, const TrainConfig& config);

// LOUO with a caller-supplied trainer/predictor, used for oracle checks.
using FoldPredictor = std::function<std::vector<ingest::ActivityLabel>(
    std::span<const TrainingExample> train, std::span<const TrainingExample> test)>;
EvalReport evaluate_louo_with(std::span<const TrainingExample> dataset, const FoldPredictor& predictor,
                              bool parallel = false);

}  // namespace mealsense::detector

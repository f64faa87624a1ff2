#include "mealsense/detector/train.h"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <random>
#include <set>

#include "mealsense/error.h"
#include "mealsense/util/hash.h"

namespace mealsense::detector {

namespace {

double target_of(ingest::ActivityLabel label) { return label == ingest::ActivityLabel::Ingestive ? 1.0 : 0.0; }

void check_dataset(std::span<const TrainingExample> dataset) {
  require(!dataset.empty(), ErrorCode::DegenerateDataset, "empty training set");
  bool pos = false;
  bool neg = false;
  const auto& first = dataset.front().input;
  for (const auto& ex : dataset) {
    if (ex.input.features.layout_version != first.features.layout_version ||
        ex.input.features.values.size() != first.features.values.size() ||
        ex.input.raw_mel.bands != first.raw_mel.bands || ex.input.raw_mel.frames != first.raw_mel.frames) {
      fail(ErrorCode::LayoutError, "training examples use inconsistent layouts");
    }
    (ex.label == ingest::ActivityLabel::Ingestive ? pos : neg) = true;
  }
  require(pos && neg, ErrorCode::DegenerateDataset, "training set must contain both classes");
}

}  // namespace

std::uint64_t config_digest(const TrainConfig& c) {
  util::Fnv1a h;
  for (int v : {c.model.imu_filters, c.model.imu_kernel, c.model.imu_stride, c.model.mel_filters,
                c.model.mel_kernel, c.model.stats_units, c.model.hidden_units, c.epochs, c.batch_size}) {
    h.update_u64(static_cast<std::uint64_t>(v));
  }
  h.update_f64(c.learning_rate);
  h.update_f64(c.momentum);
  h.update_u64(c.class_weighting ? 1 : 0);
  h.update_u64(c.seed);
  return h.digest();
}

double batch_loss_and_gradient(const ClassifierModel& model, std::span<const TrainingExample> batch,
                               std::vector<double>& grad, double positive_weight, double negative_weight) {
  grad.assign(model.parameters().size(), 0.0);
  if (batch.empty()) {
    return 0.0;
  }
  double loss = 0.0;
  for (const auto& ex : batch) {
    const double w = ex.label == ingest::ActivityLabel::Ingestive ? positive_weight : negative_weight;
    loss += model.loss_and_gradient(ex.input, target_of(ex.label), w, grad);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (double& g : grad) g *= inv;
  return loss * inv;
}

ClassifierModel train(std::span<const TrainingExample> dataset, const TrainConfig& config) {
  check_dataset(dataset);
  require(config.epochs > 0 && config.batch_size > 0 && config.learning_rate > 0.0, ErrorCode::InvalidArgument,
          "epochs, batch size and learning rate must be positive");

  std::vector<DetectorInput> inputs;
  inputs.reserve(dataset.size());
  std::size_t positives = 0;
  for (const auto& ex : dataset) {
    inputs.push_back(ex.input);
    positives += ex.label == ingest::ActivityLabel::Ingestive ? 1 : 0;
  }
  ClassifierModel model(config.model, InputNormalizer::fit(inputs), dataset.front().input.raw_mel.frames,
                        config.seed);
  model.set_training_config_digest(config_digest(config));

  double pos_w = 1.0;
  double neg_w = 1.0;
  if (config.class_weighting) {
    const auto n = static_cast<double>(dataset.size());
    pos_w = n / (2.0 * static_cast<double>(positives));
    neg_w = n / (2.0 * static_cast<double>(dataset.size() - positives));
  }

  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> velocity(model.parameters().size(), 0.0);
  std::vector<double> grad;
  std::vector<TrainingExample> batch;
  const auto bs = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Fisher-Yates with our own index draw keeps the order platform-stable.
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng() % i]);
    }
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      grad.assign(model.parameters().size(), 0.0);
      for (std::size_t i = start; i < end; ++i) {
        const auto& ex = dataset[order[i]];
        const double w = ex.label == ingest::ActivityLabel::Ingestive ? pos_w : neg_w;
        model.loss_and_gradient(ex.input, target_of(ex.label), w, grad);
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      auto params = model.parameters();
      for (std::size_t p = 0; p < params.size(); ++p) {
        velocity[p] = config.momentum * velocity[p] - config.learning_rate * grad[p] * inv;
        params[p] += velocity[p];
      }
    }
  }
  return model;
}

double predict(const ClassifierModel& model, const DetectorInput& input) { return model.predict_proba(input); }

GradientCheckResult gradient_check(const ClassifierModel& model, const TrainingExample& example,
                                   std::size_t samples, double step, std::uint64_t seed) {
  const double target = target_of(example.label);
  std::vector<double> analytic(model.parameters().size(), 0.0);
  model.loss_and_gradient(example.input, target, 1.0, analytic);

  ClassifierModel probe = model;
  auto params = probe.parameters();
  std::mt19937_64 rng(seed);
  GradientCheckResult result;
  const std::size_t n = std::min(samples, params.size());
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t idx = samples >= params.size() ? s : static_cast<std::size_t>(rng() % params.size());
    const double saved = params[idx];
    params[idx] = saved + step;
    const double up = probe.loss_and_gradient(example.input, target, 1.0, {});
    params[idx] = saved - step;
    const double down = probe.loss_and_gradient(example.input, target, 1.0, {});
    params[idx] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max({std::abs(analytic[idx]), std::abs(numeric), 1e-8});
    result.max_relative_error = std::max(result.max_relative_error, std::abs(analytic[idx] - numeric) / denom);
    ++result.parameters_checked;
  }
  return result;
}

Prf prf_from_confusion(const Confusion& c) {
  if (c.tp + c.fp + c.fn == 0) {
    return {1.0, 1.0, 1.0};
  }
  Prf out;
  out.precision = c.tp + c.fp ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  out.recall = c.tp + c.fn ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  out.f1 = out.precision + out.recall > 0.0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

EvalReport evaluate_louo_with(std::span<const TrainingExample> dataset, const FoldPredictor& predictor,
                              bool parallel) {
  std::set<std::string> users;
  for (const auto& ex : dataset) users.insert(ex.user_id);
  require(users.size() >= 2, ErrorCode::InsufficientUsers, "leave-one-user-out needs at least two users");

  auto run_fold = [&dataset, &predictor](const std::string& held_out) {
    std::vector<TrainingExample> train_set;
    std::vector<TrainingExample> test_set;
    std::set<std::string> train_users;
    for (const auto& ex : dataset) {
      if (ex.user_id == held_out) {
        test_set.push_back(ex);
      } else {
        train_set.push_back(ex);
        train_users.insert(ex.user_id);
      }
    }
    const auto predicted = predictor(train_set, test_set);
    require(predicted.size() == test_set.size(), ErrorCode::InvalidArgument, "predictor returned wrong count");
    FoldRecord fold;
    fold.held_out_user = held_out;
    fold.training_users.assign(train_users.begin(), train_users.end());
    for (std::size_t i = 0; i < test_set.size(); ++i) {
      const bool truth = test_set[i].label == ingest::ActivityLabel::Ingestive;
      const bool guess = predicted[i] == ingest::ActivityLabel::Ingestive;
      if (truth && guess) ++fold.confusion.tp;
      else if (!truth && guess) ++fold.confusion.fp;
      else if (truth && !guess) ++fold.confusion.fn;
      else ++fold.confusion.tn;
    }
    return fold;
  };

  EvalReport report;
  if (parallel) {
    std::vector<std::future<FoldRecord>> pending;
    for (const auto& u : users) pending.push_back(std::async(std::launch::async, run_fold, u));
    for (auto& f : pending) report.folds.push_back(f.get());
  } else {
    for (const auto& u : users) report.folds.push_back(run_fold(u));
  }
  for (const auto& fold : report.folds) {
    const Prf m = prf_from_confusion(fold.confusion);
    report.per_user[fold.held_out_user] = m;
    report.macro.precision += m.precision;
    report.macro.recall += m.recall;
    report.macro.f1 += m.f1;
  }
  const auto n = static_cast<double>(report.folds.size());
  report.macro.precision /= n;
  report.macro.recall /= n;
  report.macro.f1 /= n;
  return report;
}

EvalReport evaluate_louo(std::span<const TrainingExample> dataset, const TrainConfig& config) {
  return evaluate_louo_with(
      dataset,
      [&config](std::span<const TrainingExample> train_set, std::span<const TrainingExample> test_set) {
        const ClassifierModel model = train(train_set, config);
        std::vector<ingest::ActivityLabel> out;
        out.reserve(test_set.size());
        for (const auto& ex : test_set) out.push_back(decide(predict(model, ex.input)));
        return out;
      },
      config.parallel_folds);
}

}  // namespace mealsense::detector

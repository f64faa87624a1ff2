#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mealsense/detector/train.h"
#include "mealsense/eval/metrics.h"

namespace mealsense::eval {

struct RejectedLabel {
  std::string meal_id;
  std::string worker_id;
  std::string reason;
};

struct CrowdSummary {
  std::size_t total = 0;
  std::size_t qualified = 0;
  std::vector<RejectedLabel> rejected;
  std::vector<MealPrf> meals;
  Prf corpus;
};

struct NutrientAgreement {
  std::string nutrient;
  std::optional<MapeResult> mape;
  std::vector<std::string> mape_meals;           // meal ids in MapeResult index order
  std::vector<std::string> missing_system;       // expert meals without a system value
  std::optional<IccResult> icc;
  std::optional<std::string> icc_error;          // why ICC could not be computed
};

struct EvalSummary {
  std::optional<CrowdSummary> crowd;
  std::vector<NutrientAgreement> nutrients;      // sorted by nutrient key
  std::optional<detector::EvalReport> detection;
};

CrowdSummary summarize_crowd(const std::vector<CrowdLabel>& labels);

// MAPE compares the system value to each meal's mean expert estimate; ICC
// measures the experts' agreement among themselves.
std::vector<NutrientAgreement> summarize_agreement(
    const std::map<std::string, ExpertEstimateMatrix>& experts,
    const std::map<std::string, std::map<std::string, double>>& system);

nlohmann::json to_json(const EvalSummary& summary);
std::string to_text(const EvalSummary& summary);

}  // namespace mealsense::eval

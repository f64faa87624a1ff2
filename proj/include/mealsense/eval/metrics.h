#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mealsense::eval {

// One crowd worker's description of one meal. C: items both in the image
// and the text, I: items in the image, T: items in the text.
struct CrowdLabel {
  std::string meal_id;
  std::string worker_id;
  std::int64_t correct = 0;
  std::int64_t image_items = 0;
  std::int64_t text_items = 0;
  double completion_seconds = 0;
  std::int64_t text_item_split_count = 0;
  bool operator==(const CrowdLabel&) const = default;
};

inline constexpr double kMinCompletionSeconds = 60.0;

// Empty when the label passes; otherwise the first failed rule.
std::optional<std::string> rejection_reason(const CrowdLabel& label);

// Qualified labels, input order preserved.
std::vector<CrowdLabel> filter_crowd(std::span<const CrowdLabel> labels);

struct Prf {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

// P = C/T, R = C/I, F1 their harmonic mean (0 when both are 0).
// InvalidArgument for an unqualified label.
Prf prf(const CrowdLabel& label);

struct MealPrf {
  std::string meal_id;
  std::size_t workers = 0;
  Prf mean;
};

// Per meal, the unweighted mean over its qualified labels, sorted by meal id;
// unqualified labels are skipped.
std::vector<MealPrf> meal_prf(std::span<const CrowdLabel> labels);
// Unweighted mean over meals.
Prf corpus_prf(std::span<const MealPrf> meals);

struct MapeResult {
  double percent = 0;
  std::size_t used = 0;
  std::vector<std::size_t> excluded;  // indices whose expert average is 0
};

// (1/N) sum |(E - S)/E| * 100 over meals with E != 0. InvalidArgument on
// length mismatch or when no meal is usable.
MapeResult mape(std::span<const double> expert_avg, std::span<const double> system);

// Meals x raters; a missing cell excludes its meal from ICC.
struct ExpertEstimateMatrix {
  std::vector<std::string> meal_ids;
  std::vector<std::string> rater_ids;
  std::vector<std::vector<std::optional<double>>> values;  // [meal][rater]

  // Mean over the present cells of each meal; absent when a meal has none.
  std::vector<std::optional<double>> meal_means() const;
};

struct IccResult {
  double value = 0;
  std::size_t meals_used = 0;
  std::vector<std::string> excluded_meals;
  double msr = 0;
  double msc = 0;
  double mse = 0;
};

// ICC(2,k): two-way random effects, absolute agreement, average of k raters.
// (MSR - MSE) / (MSR + (MSC - MSE)/n). InvalidArgument with fewer than 2
// raters or fewer than 2 complete meals; when every mean square is zero the
// raters agree exactly and the value is 1; InvalidArgument when the
// denominator vanishes otherwise.
IccResult icc2k(const ExpertEstimateMatrix& matrix);

// CSV inputs, each with a header line.
// labels: meal_id,worker_id,correct,image_items,text_items,completion_seconds,text_item_split_count
std::vector<CrowdLabel> read_crowd_csv(std::istream& in);
// experts: meal_id,rater_id,nutrient,value (empty value = missing cell)
std::map<std::string, ExpertEstimateMatrix> read_expert_csv(std::istream& in);
// system: meal_id,nutrient,value; keyed nutrient -> meal -> value
std::map<std::string, std::map<std::string, double>> read_system_csv(std::istream& in);

}  // namespace mealsense::eval

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace mealsense::diet {

struct UserProfile {
  std::string user_id;
  std::string gender;
  double age_years = 0;
  double height_cm = 0;
  double weight_kg = 0;
  std::vector<std::string> goals;
  std::vector<std::string> habits;
};

// InvalidArgument unless age, height and weight are positive.
void validate(const UserProfile& profile);

enum class AmountUnit { g, ml, piece, bowl, cup };
enum class ItemOrigin { Inferred, UserAdded, UserCorrected };

std::string to_string(AmountUnit u);
AmountUnit parse_amount_unit(std::string_view s);
std::string to_string(ItemOrigin o);
ItemOrigin parse_item_origin(std::string_view s);

struct DietItem {
  std::string description;
  double amount_value = 0;
  AmountUnit amount_unit = AmountUnit::g;
  ItemOrigin origin = ItemOrigin::Inferred;

  bool operator==(const DietItem&) const = default;
};

// InvalidArgument unless the description is non-empty and the amount positive and finite.
void validate(const DietItem& item);

enum class Nutrient {
  EnergyKcal,
  ProteinG,
  TotalFatG,
  TransFatG,
  SaturatedFatG,
  CarbohydrateG,
  SugarsG,
  DietaryFibreG,
  CholesterolMg,
  SodiumMg,
  CalciumMg,
  IronMg,
  ZincMg,
  CopperMg,
  MagnesiumMg,
  ManganeseMg,
  PhosphorusMg,
  PotassiumMg,
  VitaminCMg,
};

inline constexpr std::size_t kNutrientCount = 19;
const std::array<Nutrient, kNutrientCount>& all_nutrients();
// Wire key such as "energy_kcal", and the unit ("kcal", "g", "mg").
std::string nutrient_key(Nutrient n);
std::string nutrient_unit(Nutrient n);
std::optional<Nutrient> nutrient_from_key(std::string_view key);

// A nutrient the source did not report is absent, never zero.
struct NutrientProfile {
  std::array<std::optional<double>, kNutrientCount> values{};

  std::optional<double>& operator[](Nutrient n) { return values[static_cast<std::size_t>(n)]; }
  const std::optional<double>& operator[](Nutrient n) const { return values[static_cast<std::size_t>(n)]; }
  bool operator==(const NutrientProfile&) const = default;
};

// Elementwise sum; a nutrient missing from any profile is missing from the total.
NutrientProfile sum_profiles(const std::vector<NutrientProfile>& profiles);

enum class AssessmentStatus { TooLow, Reasonable, TooHigh, Unknown };
std::string to_string(AssessmentStatus s);
AssessmentStatus parse_assessment_status(std::string_view s);

// Closed interval: low <= value <= high is Reasonable. Unknown when either
// the value or the range is missing.
AssessmentStatus assess(std::optional<double> value, std::optional<double> low, std::optional<double> high);

struct NutrientAssessment {
  Nutrient nutrient = Nutrient::EnergyKcal;
  AssessmentStatus status = AssessmentStatus::Unknown;
  std::optional<double> value;
  std::optional<double> reference_low;
  std::optional<double> reference_high;
  std::vector<std::string> source_chunk_ids;
  bool operator==(const NutrientAssessment&) const = default;
};

struct ItemNutrition {
  DietItem item;
  NutrientProfile profile;
  std::vector<std::string> source_chunk_ids;
  bool operator==(const ItemNutrition&) const = default;
};

struct NutritionAnalysis {
  std::vector<ItemNutrition> items;
  NutrientProfile total;
  std::vector<NutrientAssessment> assessments;  // one per nutrient, schema order
  bool operator==(const NutritionAnalysis&) const = default;
};

struct Suggestion {
  std::string text;
  std::optional<std::string> goal;  // set for personalized suggestions
  std::vector<std::string> source_chunk_ids;
  bool operator==(const Suggestion&) const = default;
};

inline constexpr std::size_t kMaxSuggestions = 7;

struct SuggestionSet {
  std::vector<Suggestion> general;
  std::vector<Suggestion> personalized;
  bool operator==(const SuggestionSet&) const = default;
};

enum class ChatRole { User, Assistant };

struct ChatTurn {
  ChatRole role = ChatRole::User;
  std::string text;
  std::optional<std::vector<std::string>> cited_chunk_ids;
  std::int64_t timestamp_ns = 0;
  bool operator==(const ChatTurn&) const = default;
};

// Inputs to suggestion and chat prompts: one analyzed meal.
struct MealSummary {
  std::string session_id;
  std::int64_t start_ns = 0;
  std::vector<DietItem> items;
  std::optional<NutritionAnalysis> analysis;
};

void to_json(nlohmann::json& j, const UserProfile& v);
void from_json(const nlohmann::json& j, UserProfile& v);
void to_json(nlohmann::json& j, const DietItem& v);
void from_json(const nlohmann::json& j, DietItem& v);
void to_json(nlohmann::json& j, const NutrientProfile& v);
void from_json(const nlohmann::json& j, NutrientProfile& v);
void to_json(nlohmann::json& j, const NutrientAssessment& v);
void from_json(const nlohmann::json& j, NutrientAssessment& v);
void to_json(nlohmann::json& j, const ItemNutrition& v);
void from_json(const nlohmann::json& j, ItemNutrition& v);
void to_json(nlohmann::json& j, const NutritionAnalysis& v);
void from_json(const nlohmann::json& j, NutritionAnalysis& v);
void to_json(nlohmann::json& j, const Suggestion& v);
void from_json(const nlohmann::json& j, Suggestion& v);
void to_json(nlohmann::json& j, const SuggestionSet& v);
void from_json(const nlohmann::json& j, SuggestionSet& v);
void to_json(nlohmann::json& j, const ChatTurn& v);
void from_json(const nlohmann::json& j, ChatTurn& v);

}  // namespace mealsense::diet

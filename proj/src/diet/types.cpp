#include "mealsense/diet/types.h"

#include <cmath>

#include "mealsense/error.h"

namespace mealsense::diet {

namespace {

template <typename T>
nlohmann::json opt(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

template <typename T>
std::optional<T> get_opt(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

void validate(const UserProfile& p) {
  require(!p.user_id.empty(), ErrorCode::InvalidArgument, "profile needs a user_id");
  require(p.age_years > 0 && p.height_cm > 0 && p.weight_kg > 0 && std::isfinite(p.age_years) &&
              std::isfinite(p.height_cm) && std::isfinite(p.weight_kg),
          ErrorCode::InvalidArgument, "age, height and weight must be positive");
}

std::string to_string(AmountUnit u) {
  switch (u) {
    case AmountUnit::g: return "g";
    case AmountUnit::ml: return "ml";
    case AmountUnit::piece: return "piece";
    case AmountUnit::bowl: return "bowl";
    case AmountUnit::cup: return "cup";
  }
  return "?";
}

AmountUnit parse_amount_unit(std::string_view s) {
  for (auto u : {AmountUnit::g, AmountUnit::ml, AmountUnit::piece, AmountUnit::bowl, AmountUnit::cup})
    if (to_string(u) == s) return u;
  fail(ErrorCode::InvalidArgument, "unknown amount unit: " + std::string(s));
}

std::string to_string(ItemOrigin o) {
  switch (o) {
    case ItemOrigin::Inferred: return "Inferred";
    case ItemOrigin::UserAdded: return "UserAdded";
    case ItemOrigin::UserCorrected: return "UserCorrected";
  }
  return "?";
}

ItemOrigin parse_item_origin(std::string_view s) {
  for (auto o : {ItemOrigin::Inferred, ItemOrigin::UserAdded, ItemOrigin::UserCorrected})
    if (to_string(o) == s) return o;
  fail(ErrorCode::InvalidArgument, "unknown item origin: " + std::string(s));
}

void validate(const DietItem& item) {
  require(!item.description.empty(), ErrorCode::InvalidArgument, "item description is empty");
  require(std::isfinite(item.amount_value) && item.amount_value > 0, ErrorCode::InvalidArgument,
          "item amount must be positive: " + item.description);
}

const std::array<Nutrient, kNutrientCount>& all_nutrients() {
  static const std::array<Nutrient, kNutrientCount> all = [] {
    std::array<Nutrient, kNutrientCount> a{};
    for (std::size_t i = 0; i < kNutrientCount; ++i) a[i] = static_cast<Nutrient>(i);
    return a;
  }();
  return all;
}

std::string nutrient_key(Nutrient n) {
  static const std::array<const char*, kNutrientCount> keys{
      "energy_kcal", "protein_g",     "total_fat_g", "trans_fat_g", "saturated_fat_g", "carbohydrate_g", "sugars_g",
      "dietary_fibre_g", "cholesterol_mg", "sodium_mg", "calcium_mg", "iron_mg", "zinc_mg", "copper_mg",
      "magnesium_mg", "manganese_mg", "phosphorus_mg", "potassium_mg", "vitamin_c_mg"};
  return keys[static_cast<std::size_t>(n)];
}

std::string nutrient_unit(Nutrient n) {
  const std::string key = nutrient_key(n);
  return key.substr(key.rfind('_') + 1);
}

std::optional<Nutrient> nutrient_from_key(std::string_view key) {
  for (auto n : all_nutrients())
    if (nutrient_key(n) == key) return n;
  return std::nullopt;
}

NutrientProfile sum_profiles(const std::vector<NutrientProfile>& profiles) {
  NutrientProfile total;
  if (profiles.empty()) return total;
  for (auto n : all_nutrients()) {
    double sum = 0;
    bool complete = true;
    for (const auto& p : profiles) {
      if (!p[n]) {
        complete = false;
        break;
      }
      sum += *p[n];
    }
    if (complete) total[n] = sum;
  }
  return total;
}

std::string to_string(AssessmentStatus s) {
  switch (s) {
    case AssessmentStatus::TooLow: return "TooLow";
    case AssessmentStatus::Reasonable: return "Reasonable";
    case AssessmentStatus::TooHigh: return "TooHigh";
    case AssessmentStatus::Unknown: return "Unknown";
  }
  return "?";
}

AssessmentStatus parse_assessment_status(std::string_view s) {
  for (auto v : {AssessmentStatus::TooLow, AssessmentStatus::Reasonable, AssessmentStatus::TooHigh,
                 AssessmentStatus::Unknown})
    if (to_string(v) == s) return v;
  fail(ErrorCode::InvalidArgument, "unknown assessment status: " + std::string(s));
}

AssessmentStatus assess(std::optional<double> value, std::optional<double> low, std::optional<double> high) {
  if (!value || !low || !high) return AssessmentStatus::Unknown;
  if (*value < *low) return AssessmentStatus::TooLow;
  if (*value > *high) return AssessmentStatus::TooHigh;
  return AssessmentStatus::Reasonable;
}

void to_json(nlohmann::json& j, const UserProfile& v) {
  j = {{"user_id", v.user_id}, {"gender", v.gender},   {"age", v.age_years},  {"height_cm", v.height_cm},
       {"weight_kg", v.weight_kg}, {"goals", v.goals}, {"habits", v.habits}};
}

void from_json(const nlohmann::json& j, UserProfile& v) {
  v.user_id = j.at("user_id").get<std::string>();
  v.gender = j.value("gender", std::string{});
  v.age_years = j.at("age").get<double>();
  v.height_cm = j.at("height_cm").get<double>();
  v.weight_kg = j.at("weight_kg").get<double>();
  v.goals = j.value("goals", std::vector<std::string>{});
  v.habits = j.value("habits", std::vector<std::string>{});
}

void to_json(nlohmann::json& j, const DietItem& v) {
  j = {{"description", v.description},
       {"amount_value", v.amount_value},
       {"amount_unit", to_string(v.amount_unit)},
       {"origin", to_string(v.origin)}};
}

void from_json(const nlohmann::json& j, DietItem& v) {
  v.description = j.at("description").get<std::string>();
  v.amount_value = j.at("amount_value").get<double>();
  v.amount_unit = parse_amount_unit(j.at("amount_unit").get<std::string>());
  v.origin = j.contains("origin") ? parse_item_origin(j.at("origin").get<std::string>()) : ItemOrigin::Inferred;
}

void to_json(nlohmann::json& j, const NutrientProfile& v) {
  j = nlohmann::json::object();
  for (auto n : all_nutrients()) j[nutrient_key(n)] = opt(v[n]);
}

void from_json(const nlohmann::json& j, NutrientProfile& v) {
  v = {};
  for (auto n : all_nutrients()) v[n] = get_opt<double>(j, nutrient_key(n).c_str());
}

void to_json(nlohmann::json& j, const NutrientAssessment& v) {
  j = {{"nutrient", nutrient_key(v.nutrient)},
       {"unit", nutrient_unit(v.nutrient)},
       {"status", to_string(v.status)},
       {"value", opt(v.value)},
       {"reference_low", opt(v.reference_low)},
       {"reference_high", opt(v.reference_high)},
       {"source_chunk_ids", v.source_chunk_ids}};
}

void from_json(const nlohmann::json& j, NutrientAssessment& v) {
  const auto key = j.at("nutrient").get<std::string>();
  const auto n = nutrient_from_key(key);
  require(n.has_value(), ErrorCode::InvalidArgument, "unknown nutrient " + key);
  v.nutrient = *n;
  v.status = parse_assessment_status(j.at("status").get<std::string>());
  v.value = get_opt<double>(j, "value");
  v.reference_low = get_opt<double>(j, "reference_low");
  v.reference_high = get_opt<double>(j, "reference_high");
  v.source_chunk_ids = j.value("source_chunk_ids", std::vector<std::string>{});
}

void to_json(nlohmann::json& j, const ItemNutrition& v) {
  j = {{"item", v.item}, {"profile", v.profile}, {"source_chunk_ids", v.source_chunk_ids}};
}

void from_json(const nlohmann::json& j, ItemNutrition& v) {
  v.item = j.at("item").get<DietItem>();
  v.profile = j.at("profile").get<NutrientProfile>();
  v.source_chunk_ids = j.value("source_chunk_ids", std::vector<std::string>{});
}

void to_json(nlohmann::json& j, const NutritionAnalysis& v) {
  j = {{"items", v.items}, {"total", v.total}, {"assessments", v.assessments}};
}

void from_json(const nlohmann::json& j, NutritionAnalysis& v) {
  v.items = j.at("items").get<std::vector<ItemNutrition>>();
  v.total = j.at("total").get<NutrientProfile>();
  v.assessments = j.at("assessments").get<std::vector<NutrientAssessment>>();
}

void to_json(nlohmann::json& j, const Suggestion& v) {
  j = {{"text", v.text}, {"goal", opt(v.goal)}, {"source_chunk_ids", v.source_chunk_ids}};
}

void from_json(const nlohmann::json& j, Suggestion& v) {
  v.text = j.at("text").get<std::string>();
  v.goal = get_opt<std::string>(j, "goal");
  v.source_chunk_ids = j.value("source_chunk_ids", std::vector<std::string>{});
}

void to_json(nlohmann::json& j, const SuggestionSet& v) {
  j = {{"general", v.general}, {"personalized", v.personalized}};
}

void from_json(const nlohmann::json& j, SuggestionSet& v) {
  v.general = j.at("general").get<std::vector<Suggestion>>();
  v.personalized = j.at("personalized").get<std::vector<Suggestion>>();
}

void to_json(nlohmann::json& j, const ChatTurn& v) {
  j = {{"role", v.role == ChatRole::User ? "user" : "assistant"},
       {"text", v.text},
       {"cited_chunk_ids", opt(v.cited_chunk_ids)},
       {"timestamp_ns", v.timestamp_ns}};
}

void from_json(const nlohmann::json& j, ChatTurn& v) {
  const auto role = j.at("role").get<std::string>();
  require(role == "user" || role == "assistant", ErrorCode::InvalidArgument, "unknown chat role " + role);
  v.role = role == "user" ? ChatRole::User : ChatRole::Assistant;
  v.text = j.at("text").get<std::string>();
  v.cited_chunk_ids = get_opt<std::vector<std::string>>(j, "cited_chunk_ids");
  v.timestamp_ns = j.at("timestamp_ns").get<std::int64_t>();
}

}  // namespace mealsense::diet

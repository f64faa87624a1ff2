#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mealsense/diet/clients.h"
#include "mealsense/diet/types.h"
#include "mealsense/image/pipeline.h"
#include "mealsense/rag/grounded.h"

namespace mealsense::diet {

struct KnowledgeBase {
  const rag::VectorIndex& index;
  rag::TextEmbedder& embedder;
  std::size_t k = rag::kDefaultTopK;
};

// Sends the processed images (base64 PPM) with the profile and habit hints.
// One repair re-ask on an unparseable reply, then ProtocolError.
std::vector<DietItem> identify_diet(std::span<const image::ProcessedMealImage> images, const UserProfile& profile,
                                    VlmClient& vlm);

// Equal shares: every amount divided by diner_count (>= 1).
std::vector<DietItem> adjust_shared_portions(std::vector<DietItem> items, int diner_count);

// Per-item profiles from grounded completions, their sum, and a per-meal
// assessment of every nutrient against a retrieved reference range.
NutritionAnalysis analyze_nutrition(const std::vector<DietItem>& items, const KnowledgeBase& kb, rag::LlmClient& llm);

// At most kMaxSuggestions per list, each citing at least one retrieved chunk.
// Profiles without goals get "balanced diet" suggestions. InvalidArgument
// without an analyzed meal; NoKnowledge on an empty index.
SuggestionSet suggest(const UserProfile& profile, std::span<const MealSummary> recent_meals, const KnowledgeBase& kb,
                      rag::LlmClient& llm);

inline constexpr const char* kBalancedDietGoal = "balanced diet";

// The assistant reply to `message` given the full prior conversation. The
// caller records the user turn at now_ns; the reply is stamped now_ns + 1.
// now_ns must be later than every turn in the history.
ChatTurn chat(std::span<const ChatTurn> history, const std::string& message, const UserProfile& profile,
              std::span<const MealSummary> recent_meals, const KnowledgeBase& kb, rag::LlmClient& llm,
              std::int64_t now_ns);

const std::vector<std::string>& common_questions();

// Parses a completion answer as a JSON object; one repair re-ask, then
// ProtocolError with the raw reply logged.
nlohmann::json complete_json(rag::LlmClient& llm, const rag::CompletionRequest& request, rag::Completion* out = nullptr);

}  // namespace mealsense::diet

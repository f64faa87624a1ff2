#pragma once

#include <array>
#include <atomic>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mealsense/diet/types.h"
#include "mealsense/rag/llm.h"
#include "mealsense/util/http_json.h"

namespace mealsense::diet {

struct VlmImage {
  std::string image_id;
  std::string ppm_base64;
};

struct VlmRequest {
  std::vector<VlmImage> images;
  UserProfile profile;
  std::vector<std::string> habits;
  std::optional<std::string> repair_note;  // set on the single re-ask
};

// `{images:[{image_id, ppm_base64}], profile:{...}, habits:[...]}`.
nlohmann::json to_json(const VlmRequest& request);

class VlmClient {
 public:
  virtual ~VlmClient() = default;
  // Raw reply; expected `{items:[{description, amount_value, amount_unit}]}`.
  virtual std::string identify(const VlmRequest& request) = 0;
};

// Canned items per image id, concatenated in request order. Keeps a log of
// request payloads. The first `garbage_replies` calls return unparseable text.
class StubVlmClient : public VlmClient {
 public:
  explicit StubVlmClient(std::map<std::string, std::vector<DietItem>> items = {}, int garbage_replies = 0);
  static StubVlmClient from_json(const nlohmann::json& j);  // {"images": {"id": [items]}, "garbage_replies": 0}
  std::string identify(const VlmRequest& request) override;
  std::vector<nlohmann::json> request_log() const;

 private:
  std::map<std::string, std::vector<DietItem>> items_;
  std::atomic<int> garbage_left_;
  mutable std::mutex mu_;
  std::vector<nlohmann::json> log_;
};

// Content-driven stub for synthetic scenes: reports a dish's item when its
// key colour covers at least min_pixels of some image. Same JSON as
// image::ColorKeyConfig, with an "item" per dish. A dish seen in several
// images is reported once.
class ColorKeyVlmClient : public VlmClient {
 public:
  struct Key {
    std::array<std::uint8_t, 3> rgb{};
    DietItem item;
  };
  ColorKeyVlmClient(std::vector<Key> keys, std::size_t min_pixels, int garbage_replies = 0);
  static ColorKeyVlmClient from_json(const nlohmann::json& j);
  std::string identify(const VlmRequest& request) override;

 private:
  std::vector<Key> keys_;
  std::size_t min_pixels_;
  std::atomic<int> garbage_left_;
};

class HttpVlmClient : public VlmClient {
 public:
  explicit HttpVlmClient(util::HttpEndpoint endpoint);
  std::string identify(const VlmRequest& request) override;

 private:
  util::HttpEndpoint endpoint_;
};

// Line conventions shared by the prompt builders and the fixture LLM.
namespace prompt_tags {
inline constexpr const char* kTask = "TASK: ";
inline constexpr const char* kItem = "ITEM: ";
inline constexpr const char* kAmount = "AMOUNT: ";
inline constexpr const char* kNutrient = "NUTRIENT: ";
inline constexpr const char* kGoal = "GOAL: ";
inline constexpr const char* kFlag = "FLAG: ";
inline constexpr const char* kRepair = "REPAIR: ";
}  // namespace prompt_tags

// Rule-based completion service over a fixture corpus. Reads the TASK line
// and answers from the supplied context chunks:
//   FOOD <name> | per <qty> <unit> | key=value ...     item_nutrients
//   REFERENCE <nutrient_key> <low>-<high> per meal     reference_range
//   GUIDELINE <topic>: <text>                          general_suggestions
//   GOALTIP <goal>: <text>                             personalized_suggestions
// Unknown tasks and chat echo the prompt body and cite every chunk.
class FixtureLlmClient : public rag::LlmClient {
 public:
  explicit FixtureLlmClient(int garbage_replies = 0);
  rag::Completion complete(const rag::CompletionRequest& request) override;

 private:
  std::atomic<int> garbage_left_;
};

// Nominal sizes used to compare unlike units (1 g == 1 ml).
double nominal_grams(AmountUnit unit);

}  // namespace mealsense::diet

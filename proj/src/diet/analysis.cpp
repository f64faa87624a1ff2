#include "mealsense/diet/analysis.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "mealsense/error.h"
#include "mealsense/util/hash.h"
#include "mealsense/util/log.h"

namespace mealsense::diet {

namespace {

using namespace prompt_tags;

constexpr const char* kRepairNote = "previous reply was not a valid JSON object; reply with JSON only";

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// "saturated_fat_g" -> "saturated fat"
std::string plain_name(Nutrient n) {
  std::string key = nutrient_key(n);
  const auto cut = key.rfind('_');
  if (cut != std::string::npos) key.resize(cut);
  std::replace(key.begin(), key.end(), '_', ' ');
  return key;
}

std::string describe(const DietItem& item) {
  return item.description + " (" + fmt(item.amount_value) + " " + to_string(item.amount_unit) + ")";
}

std::string describe(const UserProfile& p) {
  std::string s = "gender " + (p.gender.empty() ? std::string("unspecified") : p.gender) + ", age " + fmt(p.age_years) +
                  ", height " + fmt(p.height_cm) + " cm, weight " + fmt(p.weight_kg) + " kg";
  if (!p.goals.empty()) {
    s += ", goals:";
    for (const auto& g : p.goals) s += " " + g + ";";
  }
  if (!p.habits.empty()) {
    s += " habits:";
    for (const auto& h : p.habits) s += " " + h + ";";
  }
  return s;
}

std::string describe(const MealSummary& meal) {
  std::string s = "meal " + meal.session_id + ":";
  for (const auto& item : meal.items) s += " " + describe(item) + ";";
  if (meal.analysis) {
    if (const auto& e = meal.analysis->total[Nutrient::EnergyKcal]) s += " energy " + fmt(*e) + " kcal;";
    for (const auto& a : meal.analysis->assessments)
      if (a.status == AssessmentStatus::TooLow || a.status == AssessmentStatus::TooHigh)
        s += " " + nutrient_key(a.nutrient) + " " + to_string(a.status) + ";";
  }
  return s;
}

std::string task_prompt(const std::string& task, const std::string& instructions, const std::vector<std::string>& tags,
                        const std::vector<rag::ContextChunk>& chunks, const std::string& question) {
  std::string head = std::string(kTask) + task + "\n" + instructions;
  for (const auto& t : tags) head += "\n" + t;
  return rag::build_prompt(head, chunks, question);
}

std::vector<Suggestion> parse_suggestions(const nlohmann::json& answer, const std::vector<rag::ContextChunk>& supplied,
                                          const std::optional<std::string>& goal) {
  std::set<std::string> allowed;
  for (const auto& c : supplied) allowed.insert(c.chunk_id);
  std::vector<Suggestion> out;
  if (!answer.contains("suggestions") || !answer["suggestions"].is_array()) {
    fail(ErrorCode::ProtocolError, "suggestion reply lacks a suggestions array");
  }
  for (const auto& s : answer["suggestions"]) {
    if (!s.is_object() || !s.contains("text") || !s["text"].is_string()) continue;
    Suggestion sg;
    sg.text = s["text"].get<std::string>();
    sg.goal = goal;
    if (s.contains("cited") && s["cited"].is_array())
      for (const auto& id : s["cited"])
        if (id.is_string() && allowed.count(id.get<std::string>()) != 0) sg.source_chunk_ids.push_back(id.get<std::string>());
    // Ungrounded suggestions are dropped rather than shown without sources.
    if (sg.text.empty() || sg.source_chunk_ids.empty()) continue;
    out.push_back(std::move(sg));
  }
  return out;
}

}  // namespace

nlohmann::json complete_json(rag::LlmClient& llm, const rag::CompletionRequest& request, rag::Completion* out) {
  rag::CompletionRequest current = request;
  for (int attempt = 0; attempt < 2; ++attempt) {
    auto completion = llm.complete(current);
    try {
      auto j = nlohmann::json::parse(completion.answer);
      if (j.is_object()) {
        if (out) *out = std::move(completion);
        return j;
      }
    } catch (const nlohmann::json::parse_error&) {
    }
    util::log(util::LogLevel::Warn, "unparseable completion (attempt " + std::to_string(attempt + 1) +
                                        "): " + completion.answer.substr(0, 500));
    current.prompt = request.prompt + "\n" + kRepair + kRepairNote + "\n";
  }
  fail(ErrorCode::ProtocolError, "completion reply is not a JSON object after one repair attempt");
}

std::vector<DietItem> identify_diet(std::span<const image::ProcessedMealImage> images, const UserProfile& profile,
                                    VlmClient& vlm) {
  require(!images.empty(), ErrorCode::InvalidArgument, "identify_diet needs at least one image");
  VlmRequest request;
  for (const auto& im : images) {
    const auto ppm = image::encode_ppm(im.pixels);
    request.images.push_back({im.source_frame_id, util::base64_encode(ppm)});
  }
  request.profile = profile;
  request.habits = profile.habits;
  for (int attempt = 0; attempt < 2; ++attempt) {
    const std::string raw = vlm.identify(request);
    try {
      const auto j = nlohmann::json::parse(raw);
      std::vector<DietItem> items;
      for (const auto& entry : j.at("items")) {
        DietItem item;
        item.description = entry.at("description").get<std::string>();
        item.amount_value = entry.at("amount_value").get<double>();
        item.amount_unit = parse_amount_unit(entry.at("amount_unit").get<std::string>());
        item.origin = ItemOrigin::Inferred;
        validate(item);
        items.push_back(std::move(item));
      }
      return items;
    } catch (const nlohmann::json::exception&) {
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InvalidArgument) throw;
    }
    util::log(util::LogLevel::Warn, "unparseable VLM reply (attempt " + std::to_string(attempt + 1) + "): " +
                                        raw.substr(0, 500));
    request.repair_note = kRepairNote;
  }
  fail(ErrorCode::ProtocolError, "VLM reply is not a valid item list after one repair attempt");
}

std::vector<DietItem> adjust_shared_portions(std::vector<DietItem> items, int diner_count) {
  require(diner_count >= 1, ErrorCode::InvalidArgument, "diner_count must be >= 1");
  for (auto& item : items) item.amount_value /= diner_count;
  return items;
}

NutritionAnalysis analyze_nutrition(const std::vector<DietItem>& items, const KnowledgeBase& kb, rag::LlmClient& llm) {
  require(!items.empty(), ErrorCode::InvalidArgument, "analyze_nutrition needs at least one item");
  for (const auto& item : items) validate(item);
  NutritionAnalysis analysis;
  std::vector<NutrientProfile> profiles;
  for (const auto& item : items) {
    const std::string question = "Nutrient content of " + describe(item);
    const auto ctx = rag::retrieve(question, kb.k, kb.index, kb.embedder);
    const auto prompt = task_prompt(
        "item_nutrients",
        "Estimate the nutrients of the item for the stated amount. Reply with JSON {\"nutrients\": {key: value}} "
        "using only these keys and omit any you cannot ground in the sources.",
        {std::string(kItem) + item.description,
         std::string(kAmount) + fmt(item.amount_value) + " " + to_string(item.amount_unit)},
        ctx.chunks, question);
    rag::Completion completion;
    const auto answer = complete_json(llm, {prompt, ctx.chunks}, &completion);
    ItemNutrition in;
    in.item = item;
    if (answer.contains("nutrients") && answer["nutrients"].is_object()) {
      for (const auto& [key, value] : answer["nutrients"].items()) {
        const auto n = nutrient_from_key(key);
        if (!n || !value.is_number()) continue;
        const double v = value.get<double>();
        require(std::isfinite(v) && v >= 0, ErrorCode::ProtocolError, "negative or non-finite nutrient " + key);
        in.profile[*n] = v;
      }
    }
    if (std::any_of(in.profile.values.begin(), in.profile.values.end(), [](const auto& v) { return v.has_value(); })) {
      in.source_chunk_ids = rag::validate_citations(completion, ctx.chunks);
    }
    profiles.push_back(in.profile);
    analysis.items.push_back(std::move(in));
  }
  analysis.total = sum_profiles(profiles);

  for (auto n : all_nutrients()) {
    NutrientAssessment a;
    a.nutrient = n;
    a.value = analysis.total[n];
    const std::string question = "Recommended intake per meal of " + nutrient_key(n);
    const auto ctx = rag::retrieve(question, kb.k, kb.index, kb.embedder);
    const auto prompt = task_prompt("reference_range",
                                    "Give the reference range for one meal. Reply with JSON {\"low\": x, \"high\": y} "
                                    "or {} when the sources do not state it.",
                                    {std::string(kNutrient) + nutrient_key(n)}, ctx.chunks, question);
    rag::Completion completion;
    const auto answer = complete_json(llm, {prompt, ctx.chunks}, &completion);
    if (answer.contains("low") && answer.contains("high") && answer["low"].is_number() && answer["high"].is_number()) {
      const double lo = answer["low"].get<double>(), hi = answer["high"].get<double>();
      require(std::isfinite(lo) && std::isfinite(hi) && lo <= hi, ErrorCode::ProtocolError,
              "invalid reference range for " + nutrient_key(n));
      a.reference_low = lo;
      a.reference_high = hi;
      a.source_chunk_ids = rag::validate_citations(completion, ctx.chunks);
    }
    a.status = assess(a.value, a.reference_low, a.reference_high);
    analysis.assessments.push_back(std::move(a));
  }
  return analysis;
}

SuggestionSet suggest(const UserProfile& profile, std::span<const MealSummary> recent_meals, const KnowledgeBase& kb,
                      rag::LlmClient& llm) {
  require(std::any_of(recent_meals.begin(), recent_meals.end(), [](const auto& m) { return m.analysis.has_value(); }),
          ErrorCode::InvalidArgument, "suggestions need at least one analyzed meal in the recent window");
  require(!kb.index.empty(), ErrorCode::NoKnowledge, "knowledge index is empty");

  std::vector<std::string> meal_lines;
  // flags are listed most severe first; severity is how far outside the range the value lies, relative to the bound
  struct Flag {
    double severity;
    std::string tag, topic;
  };
  std::vector<Flag> flags;
  for (const auto& meal : recent_meals) {
    meal_lines.push_back("MEAL: " + describe(meal));
    if (!meal.analysis) continue;
    for (const auto& a : meal.analysis->assessments) {
      double severity = 0;
      if (a.status == AssessmentStatus::TooHigh)
        severity = *a.value / std::max(*a.reference_high, 1e-12);
      else if (a.status == AssessmentStatus::TooLow)
        severity = *a.reference_low / std::max(*a.value, 1e-12);
      else
        continue;
      const std::string tag = nutrient_key(a.nutrient) + " " + to_string(a.status);
      auto it = std::find_if(flags.begin(), flags.end(), [&](const Flag& f) { return f.tag == tag; });
      if (it == flags.end())
        flags.push_back({severity, tag, plain_name(a.nutrient)});
      else
        it->severity = std::max(it->severity, severity);
    }
  }
  std::sort(flags.begin(), flags.end(),
            [](const Flag& x, const Flag& y) { return x.severity != y.severity ? x.severity > y.severity : x.tag < y.tag; });
  std::vector<std::string> topics;
  for (const auto& f : flags)
    if (std::find(topics.begin(), topics.end(), f.topic) == topics.end()) topics.push_back(f.topic);

  SuggestionSet out;
  {
    std::string question = "Dietary guidance on general";
    for (const auto& t : topics) question += "; dietary guidance on " + t;
    std::vector<std::string> tags = meal_lines;
    for (const auto& f : flags) tags.push_back(std::string(kFlag) + f.tag);
    // one broad query, then the best chunk for each flagged topic so no flag is crowded out
    auto ctx = rag::retrieve(question, kb.k, kb.index, kb.embedder);
    for (const auto& t : topics) {
      auto extra = rag::retrieve("Dietary guidance on " + t, 1, kb.index, kb.embedder);
      for (std::size_t i = 0; i < extra.chunks.size(); ++i) {
        const auto& id = extra.chunks[i].chunk_id;
        if (std::none_of(ctx.chunks.begin(), ctx.chunks.end(), [&](const auto& c) { return c.chunk_id == id; })) {
          ctx.chunks.push_back(extra.chunks[i]);
          ctx.hits.push_back(extra.hits[i]);
        }
      }
    }
    const auto prompt = task_prompt("general_suggestions",
                                    "Write general dietary suggestions for the recent meals. Reply with JSON "
                                    "{\"suggestions\": [{\"text\": ..., \"cited\": [chunk ids]}]}.",
                                    tags, ctx.chunks, question);
    out.general = parse_suggestions(complete_json(llm, {prompt, ctx.chunks}), ctx.chunks, std::nullopt);
    if (out.general.size() > kMaxSuggestions) out.general.resize(kMaxSuggestions);
  }

  std::vector<std::string> goals = profile.goals;
  if (goals.empty()) goals.push_back(kBalancedDietGoal);
  for (const auto& goal : goals) {
    if (out.personalized.size() >= kMaxSuggestions) break;
    const std::string question = "Dietary advice for the goal: " + goal;
    std::vector<std::string> tags{std::string(kGoal) + goal, "PROFILE: " + describe(profile)};
    tags.insert(tags.end(), meal_lines.begin(), meal_lines.end());
    const auto ctx = rag::retrieve(question, kb.k, kb.index, kb.embedder);
    const auto prompt = task_prompt("personalized_suggestions",
                                    "Write suggestions that help this user reach the goal. Reply with JSON "
                                    "{\"suggestions\": [{\"text\": ..., \"cited\": [chunk ids]}]}.",
                                    tags, ctx.chunks, question);
    for (auto& s : parse_suggestions(complete_json(llm, {prompt, ctx.chunks}), ctx.chunks, goal)) {
      if (out.personalized.size() >= kMaxSuggestions) break;
      out.personalized.push_back(std::move(s));
    }
  }
  return out;
}

ChatTurn chat(std::span<const ChatTurn> history, const std::string& message, const UserProfile& profile,
              std::span<const MealSummary> recent_meals, const KnowledgeBase& kb, rag::LlmClient& llm,
              std::int64_t now_ns) {
  require(!message.empty(), ErrorCode::InvalidArgument, "chat message is empty");
  for (const auto& turn : history)
    require(turn.timestamp_ns < now_ns, ErrorCode::InvalidArgument, "chat turns must be time-ordered");

  std::vector<std::string> tags{"PROFILE: " + describe(profile)};
  for (const auto& meal : recent_meals) tags.push_back("MEAL: " + describe(meal));
  tags.push_back("CONVERSATION:");
  for (const auto& turn : history) tags.push_back((turn.role == ChatRole::User ? "User: " : "Assistant: ") + turn.text);

  rag::RetrievedContext ctx;
  if (!kb.index.empty()) ctx = rag::retrieve(message, kb.k, kb.index, kb.embedder);
  const auto prompt = task_prompt("chat",
                                  "You are a friendly dietitian. Use the profile, the meals of the last seven days, "
                                  "the conversation so far and the sources. Cite sources by id.",
                                  tags, ctx.chunks, message);
  const auto completion = llm.complete({prompt, ctx.chunks});
  ChatTurn reply;
  reply.role = ChatRole::Assistant;
  reply.text = completion.answer;
  reply.timestamp_ns = now_ns + 1;
  if (!ctx.chunks.empty()) {
    std::set<std::string> allowed;
    for (const auto& c : ctx.chunks) allowed.insert(c.chunk_id);
    std::vector<std::string> cited;
    for (const auto& id : completion.cited)
      if (allowed.count(id) != 0 && std::find(cited.begin(), cited.end(), id) == cited.end()) cited.push_back(id);
    reply.cited_chunk_ids = std::move(cited);
  }
  return reply;
}

const std::vector<std::string>& common_questions() {
  static const std::vector<std::string> questions{
      "Was my last meal balanced?",
      "How can I eat less sodium?",
      "What could I add to get more dietary fibre?",
      "Which of my recent meals had the most energy?",
      "What is a healthy snack for the afternoon?",
      "How much protein should I eat per meal?",
  };
  return questions;
}

}  // namespace mealsense::diet

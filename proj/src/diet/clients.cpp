#include "mealsense/diet/clients.h"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "mealsense/error.h"
#include "mealsense/image/frame.h"
#include "mealsense/image/services.h"
#include "mealsense/util/hash.h"

namespace mealsense::diet {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::string> words(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

std::optional<std::string> tagged(const std::string& prompt, const char* tag) {
  for (const auto& line : lines(prompt))
    if (line.rfind(tag, 0) == 0) return trim(std::string_view(line).substr(std::char_traits<char>::length(tag)));
  return std::nullopt;
}

std::vector<std::string> all_tagged(const std::string& prompt, const char* tag) {
  std::vector<std::string> out;
  for (const auto& line : lines(prompt))
    if (line.rfind(tag, 0) == 0) out.push_back(trim(std::string_view(line).substr(std::char_traits<char>::length(tag))));
  return out;
}

double parse_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  require(used == s.size(), ErrorCode::InvalidArgument, "bad number " + s);
  return v;
}

struct FoodLine {
  std::string name;
  double basis_qty = 0;
  AmountUnit basis_unit = AmountUnit::g;
  std::vector<std::pair<std::string, double>> nutrients;
};

std::optional<FoodLine> parse_food(const std::string& line) {
  if (line.rfind("FOOD ", 0) != 0) return std::nullopt;
  std::vector<std::string> parts;
  std::stringstream ss(line.substr(5));
  std::string part;
  while (std::getline(ss, part, '|')) parts.push_back(trim(part));
  if (parts.size() != 3) return std::nullopt;
  try {
    FoodLine f;
    f.name = parts[0];
    std::istringstream basis(parts[1]);
    std::string per, qty, unit;
    basis >> per >> qty >> unit;
    if (per != "per") return std::nullopt;
    f.basis_qty = parse_double(qty);
    f.basis_unit = parse_amount_unit(unit);
    std::istringstream kv(parts[2]);
    std::string tok;
    while (kv >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) return std::nullopt;
      f.nutrients.emplace_back(tok.substr(0, eq), parse_double(tok.substr(eq + 1)));
    }
    return f;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}


rag::Completion json_completion(const nlohmann::json& answer, std::vector<std::string> cited) {
  return {answer.dump(), std::move(cited)};
}

rag::Completion item_nutrients(const rag::CompletionRequest& req) {
  const auto desc = tagged(req.prompt, prompt_tags::kItem).value_or("");
  const auto amount = tagged(req.prompt, prompt_tags::kAmount).value_or("");
  std::istringstream a(amount);
  double value = 0;
  std::string unit_text;
  a >> value >> unit_text;
  const AmountUnit unit = unit_text.empty() ? AmountUnit::g : parse_amount_unit(unit_text);

  const auto dw = words(desc);
  const std::set<std::string> dset(dw.begin(), dw.end());
  int best_score = 0;
  std::optional<FoodLine> best;
  std::string best_chunk;
  for (const auto& chunk : req.context_chunks) {
    for (const auto& line : lines(chunk.text)) {
      auto food = parse_food(line);
      if (!food) continue;
      const auto nw = words(food->name);
      if (nw.empty() || !std::all_of(nw.begin(), nw.end(), [&](const auto& w) { return dset.count(w) != 0; })) continue;
      const int score = static_cast<int>(nw.size()) + (std::set<std::string>(nw.begin(), nw.end()) == dset ? 1000 : 0);
      if (score > best_score) {
        best_score = score;
        best = std::move(food);
        best_chunk = chunk.chunk_id;
      }
    }
  }
  nlohmann::json nutrients = nlohmann::json::object();
  if (!best) return json_completion(nlohmann::json::object({{"nutrients", nutrients}}), {});
  const double scale = unit == best->basis_unit
                           ? value / best->basis_qty
                           : value * nominal_grams(unit) / (best->basis_qty * nominal_grams(best->basis_unit));
  for (const auto& [key, v] : best->nutrients) nutrients[key] = v * scale;
  return json_completion({{"nutrients", nutrients}, {"matched_food", best->name}}, {best_chunk});
}

rag::Completion reference_range(const rag::CompletionRequest& req) {
  const auto key = tagged(req.prompt, prompt_tags::kNutrient).value_or("");
  for (const auto& chunk : req.context_chunks) {
    for (const auto& line : lines(chunk.text)) {
      std::istringstream in(line);
      std::string tag, k, range;
      in >> tag >> k >> range;
      if (tag != "REFERENCE" || k != key) continue;
      const auto dash = range.find('-');
      if (dash == std::string::npos) continue;
      try {
        return json_completion({{"low", parse_double(range.substr(0, dash))}, {"high", parse_double(range.substr(dash + 1))}},
                               {chunk.chunk_id});
      } catch (const std::exception&) {
        continue;
      }
    }
  }
  return json_completion(nlohmann::json::object(), {});
}

// Lines "<TAG> <topic>: <text>" for the listed topics. Answers take one line per topic in list order, then
// come back for the second line of each, so a capped reader still sees every topic.
rag::Completion topical(const rag::CompletionRequest& req, const std::string& tag,
                        const std::vector<std::string>& topics) {
  struct Tip {
    std::string text, chunk_id;
  };
  std::vector<std::vector<Tip>> by_topic(topics.size());
  std::set<std::string> seen;
  for (const auto& chunk : req.context_chunks) {
    for (const auto& line : lines(chunk.text)) {
      if (line.rfind(tag + " ", 0) != 0) continue;
      const auto colon = line.find(':');
      if (colon == std::string::npos) continue;
      const std::string topic = lower(trim(std::string_view(line).substr(tag.size() + 1, colon - tag.size() - 1)));
      const std::string text = trim(std::string_view(line).substr(colon + 1));
      const auto slot = std::find(topics.begin(), topics.end(), topic);
      if (slot == topics.end() || !seen.insert(text).second) continue;
      by_topic[static_cast<std::size_t>(slot - topics.begin())].push_back({text, chunk.chunk_id});
    }
  }
  nlohmann::json list = nlohmann::json::array();
  std::vector<std::string> cited;
  for (std::size_t round = 0, added = 1; added != 0; ++round) {
    added = 0;
    for (const auto& tips : by_topic) {
      if (round >= tips.size()) continue;
      const auto& tip = tips[round];
      nlohmann::json entry = nlohmann::json::object();
      entry["text"] = tip.text;
      entry["cited"] = nlohmann::json::array({tip.chunk_id});
      list.push_back(std::move(entry));
      if (std::find(cited.begin(), cited.end(), tip.chunk_id) == cited.end()) cited.push_back(tip.chunk_id);
      ++added;
    }
  }
  nlohmann::json answer = nlohmann::json::object();
  answer["suggestions"] = std::move(list);
  return json_completion(answer, cited);
}

rag::Completion echo(const rag::CompletionRequest& req, const std::string& heading) {
  rag::Completion c;
  c.answer = heading;
  for (const auto& line : lines(req.prompt))
    if (line.rfind(prompt_tags::kTask, 0) != 0) c.answer += "\n" + line;
  for (const auto& chunk : req.context_chunks) c.cited.push_back(chunk.chunk_id);
  return c;
}

}  // namespace

nlohmann::json to_json(const VlmRequest& request) {
  nlohmann::json images = nlohmann::json::array();
  for (const auto& im : request.images) images.push_back({{"image_id", im.image_id}, {"ppm_base64", im.ppm_base64}});
  nlohmann::json j{{"images", images}, {"profile", request.profile}, {"habits", request.habits}};
  if (request.repair_note) j["repair"] = *request.repair_note;
  return j;
}

StubVlmClient::StubVlmClient(std::map<std::string, std::vector<DietItem>> items, int garbage_replies)
    : items_(std::move(items)), garbage_left_(garbage_replies) {}

StubVlmClient StubVlmClient::from_json(const nlohmann::json& j) {
  std::map<std::string, std::vector<DietItem>> items;
  try {
    if (j.contains("images"))
      for (const auto& [id, list] : j.at("images").items()) items[id] = list.get<std::vector<DietItem>>();
    return StubVlmClient(std::move(items), j.value("garbage_replies", 0));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidArgument, std::string("stub vlm config: ") + e.what());
  }
}

std::string StubVlmClient::identify(const VlmRequest& request) {
  {
    std::lock_guard lock(mu_);
    log_.push_back(to_json(request));
  }
  if (garbage_left_.fetch_sub(1) > 0) return "I see a lovely meal!";
  nlohmann::json items = nlohmann::json::array();
  for (const auto& im : request.images) {
    const auto it = items_.find(im.image_id);
    if (it == items_.end()) continue;
    for (const auto& item : it->second)
      items.push_back({{"description", item.description},
                       {"amount_value", item.amount_value},
                       {"amount_unit", to_string(item.amount_unit)}});
  }
  return nlohmann::json{{"items", items}}.dump();
}

std::vector<nlohmann::json> StubVlmClient::request_log() const {
  std::lock_guard lock(mu_);
  return log_;
}

ColorKeyVlmClient::ColorKeyVlmClient(std::vector<Key> keys, std::size_t min_pixels, int garbage_replies)
    : keys_(std::move(keys)), min_pixels_(min_pixels), garbage_left_(garbage_replies) {}

ColorKeyVlmClient ColorKeyVlmClient::from_json(const nlohmann::json& j) {
  std::vector<Key> keys;
  for (const auto& d : j.value("dishes", nlohmann::json::array())) {
    Key k;
    const auto rgb = d.at("rgb").get<std::vector<int>>();
    require(rgb.size() == 3, ErrorCode::InvalidArgument, "key colour needs 3 channels");
    for (std::size_t i = 0; i < 3; ++i) k.rgb[i] = static_cast<std::uint8_t>(std::clamp(rgb[i], 0, 255));
    k.item = d.at("item").get<DietItem>();
    validate(k.item);
    keys.push_back(std::move(k));
  }
  return ColorKeyVlmClient(std::move(keys), j.value("min_pixels", std::size_t{20}), j.value("vlm_garbage_replies", 0));
}

std::string ColorKeyVlmClient::identify(const VlmRequest& request) {
  if (garbage_left_.fetch_sub(1) > 0) return "I see a lovely meal!";
  std::vector<bool> seen(keys_.size(), false);
  for (const auto& im : request.images) {
    const auto frame = image::decode_ppm(util::base64_decode(im.ppm_base64), im.image_id);
    for (std::size_t k = 0; k < keys_.size(); ++k)
      if (!seen[k] && image::color_key_mask(frame, keys_[k].rgb).count() >= min_pixels_) seen[k] = true;
  }
  nlohmann::json items = nlohmann::json::array();
  std::set<std::string> described;
  for (std::size_t k = 0; k < keys_.size(); ++k) {
    if (!seen[k] || !described.insert(keys_[k].item.description).second) continue;
    nlohmann::json item = nlohmann::json::object();
    item["description"] = keys_[k].item.description;
    item["amount_value"] = keys_[k].item.amount_value;
    item["amount_unit"] = to_string(keys_[k].item.amount_unit);
    items.push_back(std::move(item));
  }
  nlohmann::json reply = nlohmann::json::object();
  reply["items"] = std::move(items);
  return reply.dump();
}

HttpVlmClient::HttpVlmClient(util::HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

std::string HttpVlmClient::identify(const VlmRequest& request) { return util::post_raw(endpoint_, to_json(request)); }

FixtureLlmClient::FixtureLlmClient(int garbage_replies) : garbage_left_(garbage_replies) {}

rag::Completion FixtureLlmClient::complete(const rag::CompletionRequest& request) {
  const auto task = tagged(request.prompt, prompt_tags::kTask).value_or("");
  const bool structured = task == "item_nutrients" || task == "reference_range" || task == "general_suggestions" ||
                          task == "personalized_suggestions";
  if (structured && garbage_left_.fetch_sub(1) > 0) return {"Happy to help with that!", {}};
  if (task == "item_nutrients") return item_nutrients(request);
  if (task == "reference_range") return reference_range(request);
  if (task == "general_suggestions") {
    std::vector<std::string> topics;
    for (const auto& flag : all_tagged(request.prompt, prompt_tags::kFlag)) topics.push_back(lower(flag));
    topics.push_back("general");
    return topical(request, "GUIDELINE", topics);
  }
  if (task == "personalized_suggestions") {
    const auto goal = lower(tagged(request.prompt, prompt_tags::kGoal).value_or(""));
    return topical(request, "GOALTIP", {goal});
  }
  if (task == "chat") return echo(request, "Based on your profile, recent meals and the sources:");
  return echo(request, "According to the supplied sources:");
}

double nominal_grams(AmountUnit unit) {
  switch (unit) {
    case AmountUnit::g:
    case AmountUnit::ml: return 1.0;
    case AmountUnit::piece: return 100.0;
    case AmountUnit::bowl: return 300.0;
    case AmountUnit::cup: return 240.0;
  }
  return 1.0;
}

}  // namespace mealsense::diet

#include "mealsense/store/meal_log.h"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mealsense/error.h"
#include "mealsense/util/log.h"

namespace mealsense::store {

namespace {

constexpr const char* kJournal = "journal.jsonl";

template <typename T>
void put_optional(nlohmann::json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

template <typename T>
std::optional<T> get_optional(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

bool same_item(const diet::DietItem& a, const diet::DietItem& b) {
  return a.description == b.description && a.amount_value == b.amount_value && a.amount_unit == b.amount_unit;
}

std::string item_line(const diet::DietItem& item) {
  std::ostringstream os;
  os.precision(17);
  os << item.description << " | " << item.amount_value << ' ' << diet::to_string(item.amount_unit) << " | "
     << diet::to_string(item.origin);
  return os.str();
}

}  // namespace

bool MealRecord::stale() const {
  return analysis_items_version != items_version || suggestions_items_version != items_version;
}

void validate(const MealRecord& record) {
  require(!record.session_id.empty(), ErrorCode::InvalidArgument, "record needs a session id");
  require(!record.user_id.empty(), ErrorCode::InvalidArgument, "record needs a user id");
  require(record.end_ns >= record.start_ns, ErrorCode::InvalidArgument, "record ends before it starts");
  require(record.items_version >= 1 && record.version >= 1, ErrorCode::InvalidArgument, "versions start at 1");
  require(record.analysis_items_version <= record.items_version &&
              record.suggestions_items_version <= record.items_version,
          ErrorCode::InvalidArgument, "derived data newer than the items");
  for (const auto& item : record.items) diet::validate(item);
}

void to_json(nlohmann::json& j, const ImageRef& v) {
  j = nlohmann::json::object();
  j["image_id"] = v.image_id;
  j["captured_ns"] = v.captured_ns;
  j["uri"] = v.uri;
  j["digest"] = v.digest;
  j["labels"] = v.labels;
}

void from_json(const nlohmann::json& j, ImageRef& v) {
  v.image_id = j.at("image_id").get<std::string>();
  v.captured_ns = j.at("captured_ns").get<std::int64_t>();
  v.uri = j.value("uri", "");
  v.digest = j.value("digest", "");
  v.labels = j.value("labels", std::vector<std::string>{});
}

void to_json(nlohmann::json& j, const MealRecord& v) {
  j = nlohmann::json::object();
  j["session_id"] = v.session_id;
  j["user_id"] = v.user_id;
  j["start_ns"] = v.start_ns;
  j["end_ns"] = v.end_ns;
  j["images"] = v.images;
  j["items"] = v.items;
  j["items_version"] = v.items_version;
  j["profile_version"] = v.profile_version;
  put_optional(j, "analysis", v.analysis);
  j["analysis_items_version"] = v.analysis_items_version;
  put_optional(j, "suggestions", v.suggestions);
  j["suggestions_items_version"] = v.suggestions_items_version;
  j["version"] = v.version;
  j["archived"] = v.archived;
  j["stale"] = v.stale();
}

void from_json(const nlohmann::json& j, MealRecord& v) {
  v.session_id = j.at("session_id").get<std::string>();
  v.user_id = j.at("user_id").get<std::string>();
  v.start_ns = j.at("start_ns").get<std::int64_t>();
  v.end_ns = j.at("end_ns").get<std::int64_t>();
  v.images = j.value("images", std::vector<ImageRef>{});
  v.items = j.at("items").get<std::vector<diet::DietItem>>();
  v.items_version = j.value("items_version", std::uint64_t{1});
  v.profile_version = j.value("profile_version", std::uint64_t{0});
  v.analysis = get_optional<diet::NutritionAnalysis>(j, "analysis");
  v.analysis_items_version = j.value("analysis_items_version", std::uint64_t{0});
  v.suggestions = get_optional<diet::SuggestionSet>(j, "suggestions");
  v.suggestions_items_version = j.value("suggestions_items_version", std::uint64_t{0});
  v.version = j.value("version", std::uint64_t{1});
  v.archived = j.value("archived", false);
}

void to_json(nlohmann::json& j, const CorrectionEvent& v) {
  j = nlohmann::json::object();
  j["event_id"] = v.event_id;
  j["session_id"] = v.session_id;
  j["before_items"] = v.before_items;
  j["after_items"] = v.after_items;
  j["actor"] = v.actor;
  j["timestamp_ns"] = v.timestamp_ns;
}

void from_json(const nlohmann::json& j, CorrectionEvent& v) {
  v.event_id = j.at("event_id").get<std::string>();
  v.session_id = j.at("session_id").get<std::string>();
  v.before_items = j.at("before_items").get<std::vector<diet::DietItem>>();
  v.after_items = j.at("after_items").get<std::vector<diet::DietItem>>();
  v.actor = j.at("actor").get<std::string>();
  v.timestamp_ns = j.at("timestamp_ns").get<std::int64_t>();
}

std::vector<diet::DietItem> mark_corrections(const std::vector<diet::DietItem>& before,
                                             std::vector<diet::DietItem> after) {
  std::vector<bool> used(before.size(), false);
  std::vector<bool> matched(after.size(), false);
  for (std::size_t i = 0; i < after.size(); ++i) {
    for (std::size_t k = 0; k < before.size(); ++k) {
      if (used[k] || !same_item(after[i], before[k])) continue;
      used[k] = true;
      matched[i] = true;
      after[i].origin = before[k].origin;
      break;
    }
  }
  // an amount edit keeps the description; a rename keeps the position
  for (std::size_t i = 0; i < after.size(); ++i) {
    if (matched[i]) continue;
    for (std::size_t k = 0; k < before.size(); ++k) {
      if (used[k] || before[k].description != after[i].description) continue;
      used[k] = true;
      matched[i] = true;
      after[i].origin = diet::ItemOrigin::UserCorrected;
      break;
    }
  }
  for (std::size_t i = 0; i < after.size(); ++i) {
    if (matched[i]) continue;
    const bool replaces = i < before.size() && !used[i];
    if (replaces) used[i] = true;
    after[i].origin = replaces ? diet::ItemOrigin::UserCorrected : diet::ItemOrigin::UserAdded;
  }
  return after;
}

MealLogStore::MealLogStore(std::filesystem::path directory) : dir_(std::move(directory)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  require(!ec, ErrorCode::Io, "cannot create store directory " + dir_.string() + ": " + ec.message());
  replay();
  fd_ = ::open((dir_ / kJournal).c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  require(fd_ >= 0, ErrorCode::Io, "cannot open journal: " + std::string(std::strerror(errno)));
  worker_ = std::thread([this] { worker_loop(); });
}

MealLogStore::~MealLogStore() {
  {
    std::lock_guard lock(queue_mutex_);
    stopping_ = true;
  }
  queue_cv_.notify_all();
  if (worker_.joinable()) worker_.join();
  if (fd_ >= 0) ::close(fd_);
}

void MealLogStore::replay() {
  const auto path = dir_ / kJournal;
  std::ifstream in(path, std::ios::binary);
  if (!in) return;
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();

  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < data.size()) {
    const auto nl = data.find('\n', pos);
    if (nl == std::string::npos) {
      util::log(util::LogLevel::Warn, "dropping torn journal tail of " + std::to_string(data.size() - pos) + " bytes");
      std::filesystem::resize_file(path, pos);
      break;
    }
    ++line_no;
    const std::string_view line(data.data() + pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    nlohmann::json entry;
    try {
      entry = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::LayoutError, "journal line " + std::to_string(line_no) + " is corrupt: " + e.what());
    }
    apply(entry);
  }
}

void MealLogStore::append(const nlohmann::json& entry) {
  const std::string line = entry.dump() + "\n";
  std::size_t written = 0;
  while (written < line.size()) {
    const auto n = ::write(fd_, line.data() + written, line.size() - written);
    if (n < 0 && errno == EINTR) continue;
    require(n > 0, ErrorCode::Io, "journal write failed: " + std::string(std::strerror(errno)));
    written += static_cast<std::size_t>(n);
  }
  require(::fsync(fd_) == 0, ErrorCode::Io, "journal fsync failed: " + std::string(std::strerror(errno)));
}

// Shared by live mutations and replay, so both produce the same state.
void MealLogStore::apply(const nlohmann::json& entry) {
  const auto op = entry.at("op").get<std::string>();
  if (op == "persist") {
    Session s;
    s.record = entry.at("record").get<MealRecord>();
    s.initial_items = s.record.items;
    sessions_.emplace(s.record.session_id, std::move(s));
  } else if (op == "correct") {
    auto event = entry.at("event").get<CorrectionEvent>();
    auto& s = sessions_.at(event.session_id);
    s.record.items = event.after_items;
    ++s.record.items_version;
    ++s.record.version;
    s.events.push_back(std::move(event));
  } else if (op == "derived") {
    auto& r = sessions_.at(entry.at("session_id").get<std::string>()).record;
    const auto items_version = entry.at("items_version").get<std::uint64_t>();
    r.analysis = get_optional<diet::NutritionAnalysis>(entry, "analysis");
    r.analysis_items_version = items_version;
    r.suggestions = get_optional<diet::SuggestionSet>(entry, "suggestions");
    r.suggestions_items_version = items_version;
    ++r.version;
  } else if (op == "archive") {
    for (const auto& id : entry.at("session_ids")) {
      auto& r = sessions_.at(id.get<std::string>()).record;
      r.archived = true;
      ++r.version;
    }
  } else if (op == "profile") {
    auto profile = entry.at("profile").get<diet::UserProfile>();
    auto& slot = profiles_[profile.user_id];
    slot = {std::move(profile), slot.second + 1};
  } else if (op == "chat") {
    auto& history = chats_[entry.at("user_id").get<std::string>()];
    for (const auto& t : entry.at("turns")) history.push_back(t.get<diet::ChatTurn>());
  } else if (op == "recording") {
    RecordingEntry r;
    r.recording_id = entry.at("recording_id").get<std::string>();
    r.user_id = entry.at("user_id").get<std::string>();
    r.session_ids = entry.at("session_ids").get<std::vector<std::string>>();
    recordings_.emplace(r.recording_id, std::move(r));
  } else {
    fail(ErrorCode::LayoutError, "unknown journal op '" + op + "'");
  }
}

std::string MealLogStore::persist(MealRecord record) {
  validate(record);
  std::unique_lock lock(mutex_);
  require(!sessions_.count(record.session_id), ErrorCode::Conflict,
          "session '" + record.session_id + "' already exists");
  nlohmann::json entry = nlohmann::json::object();
  entry["op"] = "persist";
  entry["record"] = record;
  append(entry);
  apply(entry);
  return record.session_id;
}

std::optional<MealRecord> MealLogStore::get(const std::string& session_id) const {
  std::shared_lock lock(mutex_);
  const auto it = sessions_.find(session_id);
  if (it == sessions_.end()) return std::nullopt;
  return it->second.record;
}

namespace {

void sort_chronologically(std::vector<MealRecord>& v) {
  std::sort(v.begin(), v.end(), [](const MealRecord& a, const MealRecord& b) {
    return a.start_ns != b.start_ns ? a.start_ns < b.start_ns : a.session_id < b.session_id;
  });
}

}  // namespace

std::vector<MealRecord> MealLogStore::timeline(const std::string& user_id, std::int64_t from_ns,
                                               std::int64_t to_ns) const {
  std::vector<MealRecord> out;
  if (from_ns > to_ns) return out;
  std::shared_lock lock(mutex_);
  for (const auto& [id, s] : sessions_) {
    const auto& r = s.record;
    if (r.user_id == user_id && r.start_ns <= to_ns && r.end_ns >= from_ns) out.push_back(r);
  }
  sort_chronologically(out);
  return out;
}

std::vector<MealRecord> MealLogStore::recent_window(const std::string& user_id, std::int64_t now_ns) const {
  std::vector<MealRecord> out;
  std::shared_lock lock(mutex_);
  for (const auto& [id, s] : sessions_) {
    const auto& r = s.record;
    if (r.user_id == user_id && !r.archived && !(r.end_ns < now_ns - kActiveWindowNs)) out.push_back(r);
  }
  sort_chronologically(out);
  return out;
}

std::uint64_t MealLogStore::apply_correction(const std::string& session_id, std::vector<diet::DietItem> after_items,
                                             const std::string& actor, std::int64_t timestamp_ns) {
  for (const auto& item : after_items) diet::validate(item);
  std::uint64_t version = 0;
  {
    std::unique_lock lock(mutex_);
    const auto it = sessions_.find(session_id);
    require(it != sessions_.end(), ErrorCode::NotFound, "unknown session '" + session_id + "'");
    const auto& s = it->second;
    require(!s.record.archived, ErrorCode::Conflict, "session '" + session_id + "' is archived and read-only");

    CorrectionEvent event;
    event.event_id = session_id + "/" + std::to_string(s.events.size() + 1);
    event.session_id = session_id;
    event.before_items = s.record.items;
    event.after_items = mark_corrections(s.record.items, std::move(after_items));
    event.actor = actor;
    event.timestamp_ns = timestamp_ns;
    nlohmann::json entry = nlohmann::json::object();
    entry["op"] = "correct";
    entry["event"] = event;
    append(entry);
    apply(entry);
    version = it->second.record.version;
  }
  enqueue(session_id);
  return version;
}

std::uint64_t MealLogStore::set_derived(const std::string& session_id, std::uint64_t items_version,
                                        const Derived& derived) {
  std::unique_lock lock(mutex_);
  const auto it = sessions_.find(session_id);
  require(it != sessions_.end(), ErrorCode::NotFound, "unknown session '" + session_id + "'");
  require(it->second.record.items_version == items_version, ErrorCode::Conflict,
          "derived data for items version " + std::to_string(items_version) + " but session is at " +
              std::to_string(it->second.record.items_version));
  nlohmann::json entry = nlohmann::json::object();
  entry["op"] = "derived";
  entry["session_id"] = session_id;
  entry["items_version"] = items_version;
  if (derived.analysis) entry["analysis"] = *derived.analysis;
  if (derived.suggestions) entry["suggestions"] = *derived.suggestions;
  append(entry);
  apply(entry);
  return it->second.record.version;
}

std::size_t MealLogStore::archive(std::int64_t now_ns) {
  std::unique_lock lock(mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, s] : sessions_)
    if (!s.record.archived && s.record.end_ns < now_ns - kActiveWindowNs) ids.push_back(id);
  if (ids.empty()) return 0;
  nlohmann::json entry = nlohmann::json::object();
  entry["op"] = "archive";
  entry["now_ns"] = now_ns;
  entry["session_ids"] = ids;
  append(entry);
  apply(entry);
  return ids.size();
}

std::vector<CorrectionEvent> MealLogStore::events(const std::string& session_id) const {
  std::shared_lock lock(mutex_);
  const auto it = sessions_.find(session_id);
  require(it != sessions_.end(), ErrorCode::NotFound, "unknown session '" + session_id + "'");
  return it->second.events;
}

std::vector<diet::DietItem> MealLogStore::replay_items(const std::string& session_id) const {
  std::shared_lock lock(mutex_);
  const auto it = sessions_.find(session_id);
  require(it != sessions_.end(), ErrorCode::NotFound, "unknown session '" + session_id + "'");
  auto items = it->second.initial_items;
  for (const auto& e : it->second.events) {
    require(e.before_items == items, ErrorCode::LayoutError, "event " + e.event_id + " does not follow its predecessor");
    items = e.after_items;
  }
  return items;
}

std::uint64_t MealLogStore::put_profile(const diet::UserProfile& profile) {
  require(!profile.user_id.empty(), ErrorCode::InvalidArgument, "profile needs a user id");
  diet::validate(profile);
  std::unique_lock lock(mutex_);
  nlohmann::json entry = nlohmann::json::object();
  entry["op"] = "profile";
  entry["profile"] = profile;
  append(entry);
  apply(entry);
  return profiles_.at(profile.user_id).second;
}

std::optional<diet::UserProfile> MealLogStore::profile(const std::string& user_id) const {
  std::shared_lock lock(mutex_);
  const auto it = profiles_.find(user_id);
  if (it == profiles_.end()) return std::nullopt;
  return it->second.first;
}

std::uint64_t MealLogStore::profile_version(const std::string& user_id) const {
  std::shared_lock lock(mutex_);
  const auto it = profiles_.find(user_id);
  return it == profiles_.end() ? 0 : it->second.second;
}

void MealLogStore::append_chat(const std::string& user_id, const std::vector<diet::ChatTurn>& turns) {
  require(!user_id.empty(), ErrorCode::InvalidArgument, "chat needs a user id");
  if (turns.empty()) return;
  std::unique_lock lock(mutex_);
  nlohmann::json entry = nlohmann::json::object();
  entry["op"] = "chat";
  entry["user_id"] = user_id;
  entry["turns"] = turns;
  append(entry);
  apply(entry);
}

std::vector<diet::ChatTurn> MealLogStore::chat_history(const std::string& user_id) const {
  std::shared_lock lock(mutex_);
  const auto it = chats_.find(user_id);
  if (it == chats_.end()) return {};
  return it->second;
}

void MealLogStore::register_recording(const RecordingEntry& r) {
  require(!r.recording_id.empty(), ErrorCode::InvalidArgument, "recording needs an id");
  std::unique_lock lock(mutex_);
  require(!recordings_.count(r.recording_id), ErrorCode::Conflict,
          "recording '" + r.recording_id + "' was already ingested");
  nlohmann::json entry = nlohmann::json::object();
  entry["op"] = "recording";
  entry["recording_id"] = r.recording_id;
  entry["user_id"] = r.user_id;
  entry["session_ids"] = r.session_ids;
  append(entry);
  apply(entry);
}

std::optional<RecordingEntry> MealLogStore::recording(const std::string& recording_id) const {
  std::shared_lock lock(mutex_);
  const auto it = recordings_.find(recording_id);
  if (it == recordings_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> MealLogStore::users() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, s] : sessions_) out.push_back(s.record.user_id);
  for (const auto& [id, p] : profiles_) out.push_back(id);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void MealLogStore::set_recompute(RecomputeFn fn) {
  std::lock_guard lock(queue_mutex_);
  recompute_ = std::move(fn);
}

void MealLogStore::enqueue(const std::string& session_id) {
  {
    std::lock_guard lock(queue_mutex_);
    if (!recompute_) return;
    if (std::find(queue_.begin(), queue_.end(), session_id) == queue_.end()) queue_.push_back(session_id);
  }
  queue_cv_.notify_one();
}

void MealLogStore::drain() {
  std::unique_lock lock(queue_mutex_);
  idle_cv_.wait(lock, [&] { return queue_.empty() && !busy_; });
}

void MealLogStore::worker_loop() {
  for (;;) {
    std::string session_id;
    RecomputeFn fn;
    {
      std::unique_lock lock(queue_mutex_);
      queue_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      session_id = queue_.front();
      queue_.pop_front();
      fn = recompute_;
      busy_ = true;
    }
    // A correction landing mid-compute makes set_derived throw Conflict; that
    // correction queued the session again, so the newer items win.
    try {
      const auto snapshot = get(session_id);
      if (snapshot && fn && snapshot->stale()) set_derived(session_id, snapshot->items_version, fn(*snapshot));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Conflict)
        util::log(util::LogLevel::Warn, "recompute of " + session_id + " failed: " + e.what());
    } catch (const std::exception& e) {
      util::log(util::LogLevel::Warn, "recompute of " + session_id + " failed: " + e.what());
    }
    {
      std::lock_guard lock(queue_mutex_);
      busy_ = false;
    }
    idle_cv_.notify_all();
  }
}

void MealLogStore::export_user(const std::string& user_id, std::ostream& out) const {
  std::shared_lock lock(mutex_);
  std::vector<const Session*> mine;
  for (const auto& [id, s] : sessions_)
    if (s.record.user_id == user_id) mine.push_back(&s);
  std::sort(mine.begin(), mine.end(), [](const Session* a, const Session* b) {
    return a->record.start_ns != b->record.start_ns ? a->record.start_ns < b->record.start_ns
                                                    : a->record.session_id < b->record.session_id;
  });
  out << "USER " << user_id << '\n';
  for (const auto* s : mine) {
    const auto& r = s->record;
    out << "SESSION " << r.session_id << " start_ns=" << r.start_ns << " end_ns=" << r.end_ns
        << " version=" << r.version << " items_version=" << r.items_version << " archived=" << r.archived
        << " stale=" << r.stale() << '\n';
    for (const auto& item : r.items) out << "  ITEM " << item_line(item) << '\n';
    if (r.analysis)
      for (const auto& a : r.analysis->assessments) {
        out << "  NUTRIENT " << diet::nutrient_key(a.nutrient) << ' ';
        if (a.value)
          out << *a.value;
        else
          out << '-';
        out << ' ' << diet::to_string(a.status) << '\n';
      }
    for (const auto& e : s->events) {
      out << "  EVENT " << e.event_id << " actor=" << e.actor << " timestamp_ns=" << e.timestamp_ns << '\n';
      for (const auto& item : e.before_items) out << "    BEFORE " << item_line(item) << '\n';
      for (const auto& item : e.after_items) out << "    AFTER " << item_line(item) << '\n';
    }
  }
}

}  // namespace mealsense::store

#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "mealsense/diet/types.h"

namespace mealsense::store {

inline constexpr std::int64_t kActiveWindowNs = 7LL * 86400 * 1'000'000'000;

// A processed image kept outside the journal; `uri` is whatever the writer
// used to store the pixels (a path relative to the data directory).
struct ImageRef {
  std::string image_id;
  std::int64_t captured_ns = 0;
  std::string uri;
  std::string digest;
  std::vector<std::string> labels;
  bool operator==(const ImageRef&) const = default;
};

struct MealRecord {
  std::string session_id;
  std::string user_id;
  std::int64_t start_ns = 0;
  std::int64_t end_ns = 0;
  std::vector<ImageRef> images;
  std::vector<diet::DietItem> items;
  std::uint64_t items_version = 1;  // bumped by every correction
  std::uint64_t profile_version = 0;
  std::optional<diet::NutritionAnalysis> analysis;
  std::uint64_t analysis_items_version = 0;
  std::optional<diet::SuggestionSet> suggestions;
  std::uint64_t suggestions_items_version = 0;
  std::uint64_t version = 1;  // bumped by every mutation
  bool archived = false;

  // Derived data not yet computed for the current item list. A derived
  // value may be absent yet fresh (e.g. no suggestions without knowledge).
  bool stale() const;
  bool operator==(const MealRecord&) const = default;
};

// InvalidArgument on empty ids, end before start, or an invalid item.
void validate(const MealRecord& record);

struct CorrectionEvent {
  std::string event_id;  // "<session_id>/<n>", n counting from 1
  std::string session_id;
  std::vector<diet::DietItem> before_items;
  std::vector<diet::DietItem> after_items;
  std::string actor;
  std::int64_t timestamp_ns = 0;
  bool operator==(const CorrectionEvent&) const = default;
};

struct RecordingEntry {
  std::string recording_id;
  std::string user_id;
  std::vector<std::string> session_ids;
  bool operator==(const RecordingEntry&) const = default;
};

void to_json(nlohmann::json& j, const ImageRef& v);
void from_json(const nlohmann::json& j, ImageRef& v);
void to_json(nlohmann::json& j, const MealRecord& v);
void from_json(const nlohmann::json& j, MealRecord& v);
void to_json(nlohmann::json& j, const CorrectionEvent& v);
void from_json(const nlohmann::json& j, CorrectionEvent& v);

// Items after a correction: an entry equal to an unused old item (origin
// ignored) keeps that item's origin; otherwise it is UserCorrected when an
// unused old item has the same description or sits at the same position,
// else UserAdded.
std::vector<diet::DietItem> mark_corrections(const std::vector<diet::DietItem>& before,
                                             std::vector<diet::DietItem> after);

struct Derived {
  std::optional<diet::NutritionAnalysis> analysis;
  std::optional<diet::SuggestionSet> suggestions;
};

// Recomputes derived data for a record snapshot; runs on the store's worker
// thread without any store lock held.
using RecomputeFn = std::function<Derived(const MealRecord&)>;

// Single-directory embedded store. Every mutation is one JSON line appended
// to journal.jsonl and fsynced before the call returns; opening replays the
// journal. A torn final line (crash mid-append) is dropped and truncated.
class MealLogStore {
 public:
  explicit MealLogStore(std::filesystem::path directory);
  ~MealLogStore();
  MealLogStore(const MealLogStore&) = delete;
  MealLogStore& operator=(const MealLogStore&) = delete;

  const std::filesystem::path& directory() const { return dir_; }

  // Conflict on a duplicate session id. Returns the session id.
  std::string persist(MealRecord record);
  std::optional<MealRecord> get(const std::string& session_id) const;

  // Sessions intersecting [from_ns, to_ns], ascending by (start_ns, session_id),
  // archived ones included with archived = true. Empty when from > to.
  std::vector<MealRecord> timeline(const std::string& user_id, std::int64_t from_ns, std::int64_t to_ns) const;

  // Active sessions of the user with end_ns >= now - 7 days, ascending.
  // Archive state is checked by time too, so an un-run archive() can't leak old meals.
  std::vector<MealRecord> recent_window(const std::string& user_id, std::int64_t now_ns) const;

  // Replaces the items, logs the event, marks derived data stale and queues
  // a recompute. NotFound for unknown sessions, Conflict for archived ones.
  // Returns the new record version.
  std::uint64_t apply_correction(const std::string& session_id, std::vector<diet::DietItem> after_items,
                                 const std::string& actor, std::int64_t timestamp_ns);

  // Replaces both derived values (absent clears) as computed from
  // items_version. Conflict when the items changed since; NotFound for
  // unknown sessions.
  std::uint64_t set_derived(const std::string& session_id, std::uint64_t items_version, const Derived& derived);

  // Moves sessions with end_ns < now - 7 days to the archive tier.
  std::size_t archive(std::int64_t now_ns);

  std::vector<CorrectionEvent> events(const std::string& session_id) const;
  // Items as persisted, then every correction applied in order.
  std::vector<diet::DietItem> replay_items(const std::string& session_id) const;

  // Profiles carry their own version, bumped on every put.
  std::uint64_t put_profile(const diet::UserProfile& profile);
  std::optional<diet::UserProfile> profile(const std::string& user_id) const;
  std::uint64_t profile_version(const std::string& user_id) const;

  void append_chat(const std::string& user_id, const std::vector<diet::ChatTurn>& turns);
  std::vector<diet::ChatTurn> chat_history(const std::string& user_id) const;

  // Conflict when the recording id is already registered.
  void register_recording(const RecordingEntry& entry);
  std::optional<RecordingEntry> recording(const std::string& recording_id) const;

  std::vector<std::string> users() const;

  // Recompute hook for corrections; without one, corrections only mark stale.
  void set_recompute(RecomputeFn fn);
  // Blocks until no recompute is queued or running.
  void drain();

  // Structured text dump of one user's sessions, items and events.
  void export_user(const std::string& user_id, std::ostream& out) const;

 private:
  struct Session {
    MealRecord record;
    std::vector<diet::DietItem> initial_items;
    std::vector<CorrectionEvent> events;
  };

  void replay();
  void apply(const nlohmann::json& entry);
  void append(const nlohmann::json& entry);
  void worker_loop();
  void enqueue(const std::string& session_id);

  std::filesystem::path dir_;
  int fd_ = -1;
  mutable std::shared_mutex mutex_;
  std::map<std::string, Session> sessions_;
  std::map<std::string, std::pair<diet::UserProfile, std::uint64_t>> profiles_;
  std::map<std::string, std::vector<diet::ChatTurn>> chats_;
  std::map<std::string, RecordingEntry> recordings_;

  std::mutex queue_mutex_;
  std::condition_variable queue_cv_;
  std::condition_variable idle_cv_;
  std::deque<std::string> queue_;
  bool busy_ = false;
  bool stopping_ = false;
  RecomputeFn recompute_;
  std::thread worker_;
};

}  // namespace mealsense::store

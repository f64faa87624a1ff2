#include "mealsense/service/runtime.h"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <semaphore>
#include <sstream>

#include "mealsense/capture/scheduler.h"
#include "mealsense/detector/dataset.h"
#include "mealsense/error.h"
#include "mealsense/image/pipeline.h"
#include "mealsense/ingest/io.h"
#include "mealsense/ingest/preprocess.h"
#include "mealsense/rag/document.h"
#include "mealsense/util/hash.h"
#include "mealsense/util/log.h"

namespace mealsense::service {

namespace {

constexpr std::int64_t kFrameMatchNs = 50'000'000;

class Limiter {
 public:
  explicit Limiter(int n) : sem_(n) {}
  template <typename Fn>
  auto run(Fn&& fn) -> decltype(fn()) {
    sem_.acquire();
    struct Release {
      std::counting_semaphore<>& s;
      ~Release() { s.release(); }
    } release{sem_};
    return fn();
  }

 private:
  std::counting_semaphore<> sem_;
};

class LimitedSegmentation : public image::SegmentationClient {
 public:
  LimitedSegmentation(std::shared_ptr<image::SegmentationClient> inner, std::shared_ptr<Limiter> limit)
      : inner_(std::move(inner)), limit_(std::move(limit)) {}
  std::vector<image::SegmentMask> segment(const image::FrameImage& frame, std::span<const std::string> labels) override {
    return limit_->run([&] { return inner_->segment(frame, labels); });
  }

 private:
  std::shared_ptr<image::SegmentationClient> inner_;
  std::shared_ptr<Limiter> limit_;
};

class LimitedEmbedding : public image::EmbeddingClient {
 public:
  LimitedEmbedding(std::shared_ptr<image::EmbeddingClient> inner, std::shared_ptr<Limiter> limit)
      : inner_(std::move(inner)), limit_(std::move(limit)) {}
  std::vector<double> embed(const image::FrameImage& image) override {
    return limit_->run([&] { return inner_->embed(image); });
  }

 private:
  std::shared_ptr<image::EmbeddingClient> inner_;
  std::shared_ptr<Limiter> limit_;
};

class LimitedVlm : public diet::VlmClient {
 public:
  LimitedVlm(std::shared_ptr<diet::VlmClient> inner, std::shared_ptr<Limiter> limit, int attempts)
      : inner_(std::move(inner)), limit_(std::move(limit)), attempts_(attempts) {}
  std::string identify(const diet::VlmRequest& request) override {
    return image::with_retries(attempts_, [&] { return limit_->run([&] { return inner_->identify(request); }); });
  }

 private:
  std::shared_ptr<diet::VlmClient> inner_;
  std::shared_ptr<Limiter> limit_;
  int attempts_;
};

class LimitedLlm : public rag::LlmClient {
 public:
  LimitedLlm(std::shared_ptr<rag::LlmClient> inner, std::shared_ptr<Limiter> limit, int attempts)
      : inner_(std::move(inner)), limit_(std::move(limit)), attempts_(attempts) {}
  rag::Completion complete(const rag::CompletionRequest& request) override {
    return image::with_retries(attempts_, [&] { return limit_->run([&] { return inner_->complete(request); }); });
  }

 private:
  std::shared_ptr<rag::LlmClient> inner_;
  std::shared_ptr<Limiter> limit_;
  int attempts_;
};

class LimitedTextEmbedder : public rag::TextEmbedder {
 public:
  LimitedTextEmbedder(std::shared_ptr<rag::TextEmbedder> inner, std::shared_ptr<Limiter> limit, int attempts)
      : inner_(std::move(inner)), limit_(std::move(limit)), attempts_(attempts) {}
  std::vector<std::vector<double>> embed(std::span<const std::string> texts) override {
    return image::with_retries(attempts_, [&] { return limit_->run([&] { return inner_->embed(texts); }); });
  }

 private:
  std::shared_ptr<rag::TextEmbedder> inner_;
  std::shared_ptr<Limiter> limit_;
  int attempts_;
};

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidArgument, "bad JSON in " + path.string() + ": " + e.what());
  }
}

std::string require_url(const std::string& url, const char* key) {
  require(!url.empty(), ErrorCode::InvalidArgument, std::string("config: ") + key + " is required without stub_services");
  return url;
}

std::string recording_digest(const RecordingUpload& u) {
  util::Fnv1a h;
  h.update(u.user_id);
  for (const auto& part : u.imu_csv) {
    h.update_u64(part.size());
    h.update(part);
  }
  h.update_u64(u.wav.size());
  h.update(u.wav);
  return "rec-" + util::to_hex(h.digest());
}

bool in_window(const store::MealRecord& r, std::int64_t end_ns) {
  return r.end_ns <= end_ns && r.end_ns >= end_ns - store::kActiveWindowNs;
}

}  // namespace

std::int64_t system_now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

util::HttpEndpoint parse_endpoint(const std::string& url, int timeout_ms, const std::string& bearer_token) {
  const auto scheme = url.find("://");
  require(scheme != std::string::npos, ErrorCode::InvalidArgument, "URL needs a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  util::HttpEndpoint e;
  e.base_url = slash == std::string::npos ? url : url.substr(0, slash);
  e.path = slash == std::string::npos ? "/" : url.substr(slash);
  e.timeout_ms = timeout_ms;
  e.bearer_token = bearer_token;
  return e;
}

Upstreams make_upstreams(const ServiceConfig& c) {
  Upstreams raw;
  if (c.stub_services) {
    nlohmann::json dishes = nlohmann::json::object();
    if (!c.stub_dishes.empty()) dishes = read_json_file(c.stub_dishes);
    raw.segmentation = std::make_shared<image::ColorKeySegmentationClient>(image::ColorKeyConfig::from_json(dishes));
    raw.embedding = std::make_shared<image::StubEmbeddingClient>();
    raw.vlm = std::shared_ptr<diet::VlmClient>(new diet::ColorKeyVlmClient(diet::ColorKeyVlmClient::from_json(dishes)));
    raw.llm = std::make_shared<diet::FixtureLlmClient>();
    raw.text_embedder = std::make_shared<rag::HashingTextEmbedder>(c.text_embedding_dim);
  } else {
    const auto ep = [&](const std::string& url, const char* key) {
      return parse_endpoint(require_url(url, key), c.upstream_timeout_ms, c.upstream_api_key);
    };
    raw.segmentation = std::make_shared<image::HttpSegmentationClient>(ep(c.segmentation_url, "segmentation_url"));
    raw.embedding = std::make_shared<image::HttpEmbeddingClient>(ep(c.embedding_url, "embedding_url"));
    raw.vlm = std::make_shared<diet::HttpVlmClient>(ep(c.vlm_url, "vlm_url"));
    raw.llm = std::make_shared<rag::HttpLlmClient>(ep(c.llm_url, "llm_url"));
    if (c.text_embedding_url.empty())
      raw.text_embedder = std::make_shared<rag::HashingTextEmbedder>(c.text_embedding_dim);
    else
      raw.text_embedder = std::make_shared<rag::HttpTextEmbedder>(ep(c.text_embedding_url, "text_embedding_url"));
  }
  const auto limit = std::make_shared<Limiter>(c.max_in_flight);
  Upstreams out;
  out.segmentation = std::make_shared<LimitedSegmentation>(raw.segmentation, limit);
  out.embedding = std::make_shared<LimitedEmbedding>(raw.embedding, limit);
  out.vlm = std::make_shared<LimitedVlm>(raw.vlm, limit, c.max_attempts);
  out.llm = std::make_shared<LimitedLlm>(raw.llm, limit, c.max_attempts);
  out.text_embedder = std::make_shared<LimitedTextEmbedder>(raw.text_embedder, limit, c.max_attempts);
  return out;
}

nlohmann::json to_json(const RecordingResult& r) {
  nlohmann::json j = nlohmann::json::object();
  j["recording_id"] = r.recording_id;
  j["user_id"] = r.user_id;
  j["session_ids"] = r.session_ids;
  j["windows"] = r.windows;
  j["ingestive_windows"] = r.ingestive_windows;
  j["bursts"] = r.bursts;
  j["frames"] = r.frames;
  j["retry_queue"] = r.retry_queue;
  if (r.detection) {
    nlohmann::json d = nlohmann::json::object();
    d["precision"] = r.detection->precision;
    d["recall"] = r.detection->recall;
    d["f1"] = r.detection->f1;
    j["detection"] = std::move(d);
  } else {
    j["detection"] = nullptr;
  }
  return j;
}

Runtime::Runtime(ServiceConfig config, Upstreams upstreams, Clock clock)
    : config_(std::move(config)), up_(std::move(upstreams)), clock_(std::move(clock)) {
  if (!config_.scene_script.empty()) default_scenes_ = synth::SceneScript::load(config_.scene_script);
  std::filesystem::create_directories(config_.data_dir / "images");
  store_ = std::make_unique<store::MealLogStore>(config_.data_dir / "store");
  store_->set_recompute([this](const store::MealRecord& r) { return recompute(r); });
}

Runtime::~Runtime() {
  stop_sweeper();
  // The worker calls back into this object; finish it before members go away.
  store_->drain();
  store_.reset();
}

std::unique_ptr<Runtime> Runtime::open(const ServiceConfig& config, Clock clock) {
  auto rt = std::make_unique<Runtime>(config, make_upstreams(config), std::move(clock));
  if (!config.model_path.empty() && std::filesystem::exists(config.model_path)) {
    rt->set_model(detector::ClassifierModel::load(config.model_path));
  } else if (!config.model_path.empty()) {
    util::log(util::LogLevel::Warn, "detector model " + config.model_path.string() + " not found; uploads will be refused");
  }
  if (!config.index_path.empty() && std::filesystem::exists(config.index_path)) {
    rt->set_index(rag::VectorIndex::load(config.index_path));
  } else if (!config.knowledge_dir.empty()) {
    const auto docs = rag::load_documents(config.knowledge_dir);
    rt->set_index(rag::build_index(docs, *rt->up_.text_embedder, config.chunking));
  }
  return rt;
}

void Runtime::set_model(detector::ClassifierModel model) {
  std::lock_guard lock(model_mutex_);
  model_ = std::make_shared<const detector::ClassifierModel>(std::move(model));
}

bool Runtime::has_model() const {
  std::lock_guard lock(model_mutex_);
  return model_ != nullptr;
}

void Runtime::set_index(rag::VectorIndex index) { index_ = std::move(index); }

diet::KnowledgeBase Runtime::knowledge() { return diet::KnowledgeBase{index_, *up_.text_embedder, config_.top_k}; }

diet::UserProfile Runtime::profile(const std::string& user_id) const {
  if (auto p = store_->profile(user_id)) return *p;
  diet::UserProfile p;
  p.user_id = user_id;
  return p;
}

std::vector<diet::MealSummary> Runtime::meal_summaries(const std::vector<store::MealRecord>& records) const {
  std::vector<diet::MealSummary> out;
  for (const auto& r : records) out.push_back(diet::MealSummary{r.session_id, r.start_ns, r.items, r.analysis});
  return out;
}

namespace {

// Records of the user whose end falls in the 7 days up to `record`'s end,
// with `record` itself and not-yet-persisted records taking precedence.
std::vector<store::MealRecord> window_for(store::MealLogStore& store, const store::MealRecord& record,
                                          const std::vector<store::MealRecord>& pending) {
  std::map<std::string, store::MealRecord> by_id;
  for (auto& r : store.timeline(record.user_id, record.end_ns - store::kActiveWindowNs, record.end_ns))
    if (in_window(r, record.end_ns)) by_id[r.session_id] = std::move(r);
  for (const auto& r : pending)
    if (r.user_id == record.user_id && in_window(r, record.end_ns)) by_id[r.session_id] = r;
  by_id[record.session_id] = record;
  std::vector<store::MealRecord> out;
  for (auto& [id, r] : by_id) out.push_back(std::move(r));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.start_ns != b.start_ns ? a.start_ns < b.start_ns : a.session_id < b.session_id;
  });
  return out;
}

}  // namespace

store::Derived Runtime::recompute(const store::MealRecord& record) {
  store::Derived d;
  if (index_.empty()) return d;
  auto kb = knowledge();
  if (!record.items.empty()) d.analysis = diet::analyze_nutrition(record.items, kb, *up_.llm);
  auto current = record;
  current.analysis = d.analysis;
  const auto meals = meal_summaries(window_for(*store_, current, {}));
  if (std::any_of(meals.begin(), meals.end(), [](const auto& m) { return m.analysis.has_value(); }))
    d.suggestions = diet::suggest(profile(record.user_id), meals, kb, *up_.llm);
  return d;
}

RecordingResult Runtime::ingest(const RecordingUpload& u) {
  require(!u.user_id.empty(), ErrorCode::InvalidArgument, "user_id is required");
  require(!u.imu_csv.empty(), ErrorCode::InvalidArgument, "at least one IMU file is required");
  require(!u.wav.empty(), ErrorCode::InvalidArgument, "an audio file is required");
  require(u.diners >= 1, ErrorCode::InvalidArgument, "diners must be >= 1");
  std::shared_ptr<const detector::ClassifierModel> model;
  {
    std::lock_guard lock(model_mutex_);
    model = model_;
  }
  require(model != nullptr, ErrorCode::Conflict, "no detector model is loaded");
  require(!index_.empty(), ErrorCode::Conflict, "no knowledge index is loaded");

  RecordingResult result;
  result.user_id = u.user_id;
  result.recording_id = u.recording_id.empty() ? recording_digest(u) : u.recording_id;
  require(!store_->recording(result.recording_id), ErrorCode::Conflict,
          "recording " + result.recording_id + " was already uploaded");

  ingest::RawRecording raw;
  raw.recording_id = result.recording_id;
  bool have_left = false, have_right = false;
  for (const auto& part : u.imu_csv) {
    std::istringstream in(part);
    auto [left, right] = ingest::read_imu_csv(in);
    if (!left.samples.empty()) {
      require(!have_left, ErrorCode::InvalidArgument, "left IMU samples appear in more than one file");
      raw.imu_left = std::move(left);
      have_left = true;
    }
    if (!right.samples.empty()) {
      require(!have_right, ErrorCode::InvalidArgument, "right IMU samples appear in more than one file");
      raw.imu_right = std::move(right);
      have_right = true;
    }
  }
  require(have_left && have_right, ErrorCode::EmptyStream, "both left and right IMU streams are required");
  const std::int64_t audio_start =
      u.audio_start_ns.value_or(std::min(raw.imu_left.samples.front().timestamp_ns, raw.imu_right.samples.front().timestamp_ns));
  {
    std::istringstream in(u.wav);
    raw.audio = ingest::read_wav(in, audio_start);
  }
  const auto synced = ingest::preprocess(raw);

  // detect
  const auto inputs = detector::inputs_from_recording(synced);
  std::vector<ingest::ActivityLabel> preds;
  preds.reserve(inputs.size());
  for (const auto& in : inputs) preds.push_back(detector::decide(detector::predict(*model, in)));
  result.windows = preds.size();
  result.ingestive_windows =
      static_cast<std::size_t>(std::count(preds.begin(), preds.end(), ingest::ActivityLabel::Ingestive));
  if (u.labels_csv) {
    std::istringstream in(*u.labels_csv);
    const auto labels = ingest::read_labels(in);
    const auto windows = ingest::window(synced, labels);
    detector::Confusion c;
    for (std::size_t i = 0; i < windows.size() && i < preds.size(); ++i) {
      const bool truth = windows[i].label == ingest::ActivityLabel::Ingestive;
      const bool said = preds[i] == ingest::ActivityLabel::Ingestive;
      if (truth && said) ++c.tp;
      else if (said) ++c.fp;
      else if (truth) ++c.fn;
      else ++c.tn;
    }
    result.detection = detector::prf_from_confusion(c);
  }

  // sessions and capture replay
  const auto& cap = config_.capture;
  const auto sessions = capture::segment_sessions(preds, cap, synced.start_epoch_ns, result.recording_id);
  const auto bursts = capture::schedule_recording(synced, preds, cap);
  result.bursts = bursts.size();

  std::vector<image::FrameImage> uploaded = u.frames;
  std::stable_sort(uploaded.begin(), uploaded.end(),
                   [](const auto& a, const auto& b) { return a.captured_ns < b.captured_ns; });
  std::vector<bool> used(uploaded.size(), false);
  const auto& scenes = u.scenes ? u.scenes : default_scenes_;
  const auto frame_at = [&](std::int64_t t) -> std::optional<image::FrameImage> {
    if (!uploaded.empty()) {
      std::optional<std::size_t> best;
      for (std::size_t i = 0; i < uploaded.size(); ++i) {
        if (used[i]) continue;
        const auto d = std::llabs(uploaded[i].captured_ns - t);
        if (d <= kFrameMatchNs && (!best || d < std::llabs(uploaded[*best].captured_ns - t))) best = i;
      }
      if (!best) return std::nullopt;
      used[*best] = true;
      return uploaded[*best];
    }
    if (scenes) return synth::render_frame(*scenes, t, result.recording_id + "@" + std::to_string(t));
    return std::nullopt;
  };

  const auto tw = static_cast<std::int64_t>(cap.transition_window_s * 1e9);
  const auto user_profile = profile(u.user_id);
  const auto profile_version = store_->profile_version(u.user_id);
  auto kb = knowledge();
  std::vector<store::MealRecord> records;
  std::vector<std::pair<std::string, image::FrameImage>> images_to_write;
  for (const auto& s : sessions) {
    std::vector<image::FrameImage> frames;
    for (const auto& b : bursts) {
      if (b.trigger_ns < s.start_ns - tw || b.trigger_ns > s.end_ns + tw) continue;
      for (const auto t : b.frame_times_ns)
        if (auto f = frame_at(t)) frames.push_back(std::move(*f));
    }
    result.frames += frames.size();
    auto processed = image::process_frames(frames, *up_.segmentation, *up_.embedding, config_.image);
    result.retry_queue.insert(result.retry_queue.end(), processed.retry_queue.begin(), processed.retry_queue.end());

    store::MealRecord rec;
    rec.session_id = s.session_id;
    rec.user_id = u.user_id;
    rec.start_ns = s.start_ns;
    rec.end_ns = s.end_ns;
    rec.profile_version = profile_version;
    if (!processed.kept.empty()) {
      rec.items = diet::identify_diet(processed.kept, user_profile, *up_.vlm);
      if (u.diners > 1) rec.items = diet::adjust_shared_portions(std::move(rec.items), u.diners);
    }
    for (std::size_t i = 0; i < processed.kept.size(); ++i) {
      const auto& img = processed.kept[i];
      store::ImageRef ref;
      ref.image_id = s.session_id + "-img" + std::to_string(i + 1);
      ref.captured_ns = img.captured_ns;
      ref.uri = "images/" + ref.image_id + ".ppm";
      const auto bytes = image::encode_ppm(img.pixels);
      ref.digest = util::to_hex(util::fnv1a(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size())));
      ref.labels = img.labels;
      rec.images.push_back(std::move(ref));
      images_to_write.emplace_back(rec.images.back().image_id, img.pixels);
    }
    // derived values, with the earlier sessions of this upload visible
    if (!rec.items.empty()) rec.analysis = diet::analyze_nutrition(rec.items, kb, *up_.llm);
    const auto meals = meal_summaries(window_for(*store_, rec, records));
    if (std::any_of(meals.begin(), meals.end(), [](const auto& m) { return m.analysis.has_value(); }))
      rec.suggestions = diet::suggest(user_profile, meals, kb, *up_.llm);
    rec.analysis_items_version = rec.suggestions_items_version = rec.items_version;
    store::validate(rec);
    records.push_back(std::move(rec));
  }

  store::RecordingEntry entry{result.recording_id, u.user_id, {}};
  for (const auto& r : records) entry.session_ids.push_back(r.session_id);
  store_->register_recording(entry);
  for (const auto& [id, pixels] : images_to_write) image::write_ppm(image_path(id), pixels);
  for (auto& r : records) {
    result.session_ids.push_back(r.session_id);
    store_->persist(std::move(r));
  }
  util::log(util::LogLevel::Info, "recording " + result.recording_id + ": " + std::to_string(result.session_ids.size()) +
                                      " sessions, " + std::to_string(result.bursts) + " bursts");
  return result;
}

diet::SuggestionSet Runtime::suggestions(const std::string& user_id) {
  const auto recent = store_->recent_window(user_id, now());
  const auto meals = meal_summaries(recent);
  require(std::any_of(meals.begin(), meals.end(), [](const auto& m) { return m.analysis.has_value(); }),
          ErrorCode::Conflict, "no analyzed meals for " + user_id + " in the last 7 days");
  return diet::suggest(profile(user_id), meals, knowledge(), *up_.llm);
}

diet::ChatTurn Runtime::chat(const std::string& user_id, const std::string& message) {
  require(!message.empty(), ErrorCode::InvalidArgument, "chat message is empty");
  std::lock_guard lock(chat_mutex_);
  const auto history = store_->chat_history(user_id);
  std::int64_t t = now();
  if (!history.empty()) t = std::max(t, history.back().timestamp_ns + 1);
  const auto meals = meal_summaries(store_->recent_window(user_id, t));
  auto reply = diet::chat(history, message, profile(user_id), meals, knowledge(), *up_.llm, t);
  diet::ChatTurn user_turn{diet::ChatRole::User, message, std::nullopt, t};
  store_->append_chat(user_id, {user_turn, reply});
  return reply;
}

std::size_t Runtime::archive() { return store_->archive(now()); }

void Runtime::start_sweeper() {
  if (sweeper_.joinable() || config_.archive_interval_s <= 0) return;
  sweep_stop_ = false;
  sweeper_ = std::thread([this] {
    const auto interval = std::chrono::duration<double>(config_.archive_interval_s);
    std::unique_lock lock(sweep_mutex_);
    while (!sweep_cv_.wait_for(lock, interval, [this] { return sweep_stop_; })) {
      try {
        const auto n = archive();
        if (n > 0) util::log(util::LogLevel::Info, "archived " + std::to_string(n) + " sessions");
      } catch (const std::exception& e) {
        util::log(util::LogLevel::Error, std::string("archive sweep failed: ") + e.what());
      }
    }
  });
}

void Runtime::stop_sweeper() {
  {
    std::lock_guard lock(sweep_mutex_);
    sweep_stop_ = true;
  }
  sweep_cv_.notify_all();
  if (sweeper_.joinable()) sweeper_.join();
}

std::filesystem::path Runtime::image_path(const std::string& image_id) const {
  return config_.data_dir / "images" / (image_id + ".ppm");
}

}  // namespace mealsense::service

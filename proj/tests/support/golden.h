#pragma once

// The golden recording: two synthetic meals, a scripted camera and
// colour-key stub services. Shared by the service tests and the acceptance
// suite. Expects MEALSENSE_FIXTURE_DIR.

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <mutex>
#include <sstream>
#include <string>

#include "mealsense/detector/model.h"
#include "mealsense/ingest/io.h"
#include "mealsense/rag/index.h"
#include "mealsense/service/api.h"
#include "mealsense/service/runtime.h"
#include "mealsense/synth/synthetic.h"

namespace mealsense::testing {

inline std::filesystem::path golden_dir() { return std::filesystem::path(MEALSENSE_FIXTURE_DIR) / "golden"; }

struct GoldenFiles {
  synth::RecordingSpec spec;
  std::string imu_csv;
  std::string wav;
  std::string labels_csv;
};

// Synthesized once per process.
inline const GoldenFiles& golden_files() {
  static const GoldenFiles files = [] {
    GoldenFiles f;
    f.spec = synth::load_spec(golden_dir() / "recording.json");
    const auto rec = synth::synthesize(f.spec);
    std::ostringstream imu, wav, labels;
    ingest::write_imu_csv(imu, rec.raw.imu_left, rec.raw.imu_right);
    ingest::write_wav_float(wav, rec.raw.audio);
    ingest::write_labels(labels, rec.ingestive);
    f.imu_csv = imu.str();
    f.wav = wav.str();
    f.labels_csv = labels.str();
    return f;
  }();
  return files;
}

inline service::ServiceConfig golden_config(const std::filesystem::path& data_dir) {
  auto c = service::load_service_config(golden_dir() / "service.conf");
  c.data_dir = data_dir;
  return c;
}

inline service::RecordingUpload golden_upload() {
  const auto& f = golden_files();
  service::RecordingUpload u;
  u.user_id = f.spec.user_id;
  u.recording_id = f.spec.recording_id;
  u.imu_csv = {f.imu_csv};
  u.wav = f.wav;
  u.labels_csv = f.labels_csv;
  return u;
}

inline service::ApiRequest golden_post() {
  const auto& f = golden_files();
  service::ApiRequest r;
  r.method = "POST";
  r.path = "/recordings";
  r.parts = {{"user_id", "", "text/plain", f.spec.user_id},
             {"recording_id", "", "text/plain", f.spec.recording_id},
             {"imu", "imu.csv", "text/csv", f.imu_csv},
             {"audio", "audio.wav", "audio/wav", f.wav},
             {"labels", "labels.csv", "text/csv", f.labels_csv}};
  return r;
}

// Settable clock for runtimes under test.
struct TestClock {
  std::atomic<std::int64_t> now{0};
  service::Clock fn() {
    return [this] { return now.load(); };
  }
};

// LLM wrapper that blocks while closed, to observe stale derived data.
class GatedLlm : public rag::LlmClient {
 public:
  explicit GatedLlm(std::shared_ptr<rag::LlmClient> inner) : inner_(std::move(inner)) {}
  rag::Completion complete(const rag::CompletionRequest& request) override {
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [this] { return open_; });
    }
    return inner_->complete(request);
  }
  void set_open(bool open) {
    {
      std::lock_guard lock(mu_);
      open_ = open;
    }
    cv_.notify_all();
  }

 private:
  std::shared_ptr<rag::LlmClient> inner_;
  std::mutex mu_;
  std::condition_variable cv_;
  bool open_ = true;
};

// End of the second golden meal.
inline constexpr std::int64_t kGoldenLastEndNs = 1'700'000'285'000'000'000;

// A runtime over the golden config with model and index loaded; the LLM is
// optionally routed through a gate.
inline std::unique_ptr<service::Runtime> golden_runtime(const std::filesystem::path& data_dir, service::Clock clock,
                                                        std::shared_ptr<GatedLlm>* gate = nullptr,
                                                        bool with_model = true) {
  auto cfg = golden_config(data_dir);
  auto up = service::make_upstreams(cfg);
  if (gate) {
    *gate = std::make_shared<GatedLlm>(up.llm);
    up.llm = *gate;
  }
  auto rt = std::make_unique<service::Runtime>(cfg, up, std::move(clock));
  if (with_model) rt->set_model(detector::ClassifierModel::load(cfg.model_path));
  rag::HashingTextEmbedder embedder(cfg.text_embedding_dim);
  rt->set_index(rag::build_index(rag::load_documents(cfg.knowledge_dir), embedder, cfg.chunking));
  return rt;
}

}  // namespace mealsense::testing

// mealsense command-line front end: batch versions of the service operations.

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "mealsense/detector/dataset.h"
#include "mealsense/detector/train.h"
#include "mealsense/diet/analysis.h"
#include "mealsense/error.h"
#include "mealsense/eval/report.h"
#include "mealsense/image/frame.h"
#include "mealsense/ingest/io.h"
#include "mealsense/rag/index.h"
#include "mealsense/service/runtime.h"
#include "mealsense/service/server.h"
#include "mealsense/synth/scene.h"
#include "mealsense/synth/synthetic.h"
#include "mealsense/util/log.h"

namespace fs = std::filesystem;
using namespace mealsense;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(slurp(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidArgument, "bad JSON in " + path.string() + ": " + e.what());
  }
}

service::ServiceConfig load_config(const std::string& path) {
  service::ServiceConfig c = path.empty() ? service::ServiceConfig{} : service::load_service_config(path);
  service::apply_env_overrides(c);
  return c;
}

// A dataset directory holds one sub-directory per recording with imu.csv,
// audio.wav and labels.csv; the user id is read from user.txt, or else the
// sub-directory name.
std::vector<detector::TrainingExample> load_dataset(const fs::path& dir) {
  std::vector<fs::path> subdirs;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) subdirs.push_back(e.path());
  std::sort(subdirs.begin(), subdirs.end());
  require(!subdirs.empty(), ErrorCode::InvalidArgument, "no recordings under " + dir.string());
  std::vector<detector::TrainingExample> out;
  for (const auto& sub : subdirs) {
    std::string user = sub.filename().string();
    if (fs::exists(sub / "user.txt")) {
      std::istringstream in(slurp(sub / "user.txt"));
      in >> user;
    }
    ingest::RawRecording raw;
    raw.recording_id = sub.filename().string();
    std::tie(raw.imu_left, raw.imu_right) = ingest::read_imu_csv(sub / "imu.csv");
    raw.audio = ingest::read_wav(sub / "audio.wav", std::min(raw.imu_left.samples.front().timestamp_ns,
                                                            raw.imu_right.samples.front().timestamp_ns));
    const auto labels = ingest::read_labels(sub / "labels.csv");
    auto ex = detector::examples_from_recording(raw, labels, user);
    out.insert(out.end(), std::make_move_iterator(ex.begin()), std::make_move_iterator(ex.end()));
  }
  return out;
}

std::vector<detector::TrainingExample> synthetic_dataset(int users, double seconds, std::uint64_t seed) {
  std::vector<detector::TrainingExample> out;
  for (const auto& spec : synth::multi_user_specs(users, seconds, seed)) {
    const auto rec = synth::synthesize(spec);
    auto ex = detector::examples_from_recording(rec.raw, rec.ingestive, spec.user_id);
    out.insert(out.end(), std::make_move_iterator(ex.begin()), std::make_move_iterator(ex.end()));
  }
  return out;
}

struct DatasetArgs {
  std::string data_dir;
  int synthetic_users = 0;
  double seconds = 600;
  std::uint64_t seed = 7;

  void add(CLI::App* app) {
    app->add_option("--data", data_dir, "dataset directory (one sub-directory per recording)");
    app->add_option("--synthetic-users", synthetic_users, "generate a synthetic dataset with this many users instead");
    app->add_option("--seconds", seconds, "seconds per synthetic user")->capture_default_str();
    app->add_option("--seed", seed, "synthetic dataset seed")->capture_default_str();
  }
  std::vector<detector::TrainingExample> load() const {
    require(!data_dir.empty() || synthetic_users > 0, ErrorCode::InvalidArgument,
            "give --data or --synthetic-users");
    return data_dir.empty() ? synthetic_dataset(synthetic_users, seconds, seed) : load_dataset(data_dir);
  }
};

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mealsense: eating detection, meal capture and diet analysis"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic recording (imu.csv, audio.wav, labels.csv)");
  std::string synth_spec, synth_out;
  int synth_users = 0;
  double synth_seconds = 600;
  std::uint64_t synth_seed = 7;
  synth_cmd->add_option("--spec", synth_spec, "recording spec JSON");
  synth_cmd->add_option("--users", synth_users, "write a multi-user dataset instead, one sub-directory per user");
  synth_cmd->add_option("--seconds", synth_seconds, "seconds per user")->capture_default_str();
  synth_cmd->add_option("--seed", synth_seed, "dataset seed")->capture_default_str();
  synth_cmd->add_option("--out", synth_out, "output directory")->required();

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "run the full pipeline on one recording and store the sessions");
  std::string config_path, user_id, audio_path, labels_path, scenes_path, frames_dir, recording_id;
  std::vector<std::string> imu_paths;
  int diners = 1;
  ingest_cmd->add_option("--config", config_path, "service config file");
  ingest_cmd->add_option("--user", user_id, "user id")->required();
  ingest_cmd->add_option("--imu", imu_paths, "IMU CSV (repeatable)")->required();
  ingest_cmd->add_option("--audio", audio_path, "mono WAV")->required();
  ingest_cmd->add_option("--labels", labels_path, "ground-truth intervals, scores the detector");
  ingest_cmd->add_option("--scenes", scenes_path, "synthetic camera script");
  ingest_cmd->add_option("--frames", frames_dir, "directory of <captured_ns>.ppm frames");
  ingest_cmd->add_option("--recording-id", recording_id, "default: content digest");
  ingest_cmd->add_option("--diners", diners, "people sharing the dishes")->capture_default_str();

  // train
  auto* train_cmd = app.add_subcommand("train", "train the eating detector");
  DatasetArgs train_data;
  train_data.add(train_cmd);
  std::string model_out;
  int epochs = detector::TrainConfig{}.epochs;
  train_cmd->add_option("--out", model_out, "model file")->required();
  train_cmd->add_option("--epochs", epochs, "training epochs")->capture_default_str();

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "LOUO detection and crowd/expert agreement metrics");
  DatasetArgs eval_data;
  eval_data.add(eval_cmd);
  std::string crowd_csv, expert_csv, system_csv;
  bool eval_json = false;
  eval_cmd->add_option("--crowd", crowd_csv, "crowd labels CSV");
  eval_cmd->add_option("--expert", expert_csv, "expert estimates CSV");
  eval_cmd->add_option("--system", system_csv, "system estimates CSV");
  eval_cmd->add_flag("--json", eval_json, "JSON instead of text");

  // index
  auto* index_cmd = app.add_subcommand("index", "chunk, embed and index a knowledge directory");
  std::string knowledge_dir, index_out;
  rag::ChunkConfig chunking;
  std::size_t dim = 256;
  index_cmd->add_option("--knowledge", knowledge_dir, "directory of knowledge documents")->required();
  index_cmd->add_option("--out", index_out, "index file")->required();
  index_cmd->add_option("--chunk-size", chunking.chunk_size)->capture_default_str();
  index_cmd->add_option("--overlap", chunking.overlap)->capture_default_str();
  index_cmd->add_option("--dim", dim, "hashing embedder dimension")->capture_default_str();

  // analyze
  auto* analyze_cmd = app.add_subcommand("analyze", "nutrition analysis of an item list, or suggestions for a user");
  std::string items_path, analyze_user;
  std::optional<std::int64_t> now_ns;
  analyze_cmd->add_option("--config", config_path, "service config file");
  analyze_cmd->add_option("--items", items_path, "JSON file with an array of items");
  analyze_cmd->add_option("--suggest-for", analyze_user, "print live suggestions for this user instead");
  analyze_cmd->add_option("--now-ns", now_ns, "evaluate the 7-day window at this time (default: now)");

  // report
  auto* report_cmd = app.add_subcommand("report", "dump a user's sessions, items and corrections");
  report_cmd->add_option("--config", config_path, "service config file");
  report_cmd->add_option("--user", user_id, "user id")->required();

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "run the HTTP API");
  int port = -1;
  serve_cmd->add_option("--config", config_path, "service config file");
  serve_cmd->add_option("--port", port, "override the configured port");

  CLI11_PARSE(app, argc, argv);
  util::set_log_level(verbose ? util::LogLevel::Debug : util::LogLevel::Info);

  try {
    if (*synth_cmd) {
      if (synth_users > 0) {
        for (const auto& spec : synth::multi_user_specs(synth_users, synth_seconds, synth_seed)) {
          const auto dir = fs::path(synth_out) / spec.user_id;
          synth::write_recording(synth::synthesize(spec), dir);
          std::ofstream(dir / "user.txt") << spec.user_id << "\n";
        }
      } else {
        require(!synth_spec.empty(), ErrorCode::InvalidArgument, "give --spec or --users");
        const auto spec = synth::load_spec(synth_spec);
        synth::write_recording(synth::synthesize(spec), synth_out);
      }
      return 0;
    }
    if (*ingest_cmd) {
      auto rt = service::Runtime::open(load_config(config_path));
      service::RecordingUpload u;
      u.user_id = user_id;
      u.recording_id = recording_id;
      for (const auto& p : imu_paths) u.imu_csv.push_back(slurp(p));
      u.wav = slurp(audio_path);
      if (!labels_path.empty()) u.labels_csv = slurp(labels_path);
      if (!scenes_path.empty()) u.scenes = synth::SceneScript::load(scenes_path);
      if (!frames_dir.empty()) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(frames_dir))
          if (e.path().extension() == ".ppm") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
          auto frame = image::read_ppm(f);
          frame.frame_id = "frame-" + f.stem().string();
          frame.captured_ns = std::stoll(f.stem().string());
          u.frames.push_back(std::move(frame));
        }
      }
      u.diners = diners;
      print_json(service::to_json(rt->ingest(u)));
      return 0;
    }
    if (*train_cmd) {
      const auto data = train_data.load();
      detector::TrainConfig cfg;
      cfg.epochs = epochs;
      const auto t0 = std::chrono::steady_clock::now();
      const auto model = detector::train(data, cfg);
      model.save(fs::path(model_out));
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
      std::cerr << "trained on " << data.size() << " windows in " << dt.count() << " s\n";
      return 0;
    }
    if (*eval_cmd) {
      eval::EvalSummary summary;
      if (!eval_data.data_dir.empty() || eval_data.synthetic_users > 0)
        summary.detection = detector::evaluate_louo(eval_data.load(), detector::TrainConfig{});
      if (!crowd_csv.empty()) {
        std::istringstream in(slurp(crowd_csv));
        summary.crowd = eval::summarize_crowd(eval::read_crowd_csv(in));
      }
      if (!expert_csv.empty()) {
        require(!system_csv.empty(), ErrorCode::InvalidArgument, "--expert needs --system");
        std::istringstream ein(slurp(expert_csv)), sin(slurp(system_csv));
        summary.nutrients = eval::summarize_agreement(eval::read_expert_csv(ein), eval::read_system_csv(sin));
      }
      if (eval_json) print_json(eval::to_json(summary));
      else std::cout << eval::to_text(summary);
      return 0;
    }
    if (*index_cmd) {
      rag::HashingTextEmbedder embedder(dim);
      const auto index = rag::build_index(rag::load_documents(knowledge_dir), embedder, chunking);
      index.save(fs::path(index_out));
      std::cerr << index.size() << " chunks, digest " << index.digest() << "\n";
      return 0;
    }
    if (*analyze_cmd) {
      service::Clock clock = service::system_now_ns;
      if (now_ns) clock = [t = *now_ns] { return t; };
      auto rt = service::Runtime::open(load_config(config_path), clock);
      if (!analyze_user.empty()) {
        print_json(rt->suggestions(analyze_user));
        return 0;
      }
      require(!items_path.empty(), ErrorCode::InvalidArgument, "give --items or --suggest-for");
      const auto items = read_json(items_path).get<std::vector<diet::DietItem>>();
      store::MealRecord r;
      r.session_id = "adhoc";
      r.user_id = "adhoc";
      r.items = items;
      const auto d = rt->recompute(r);
      require(d.analysis.has_value(), ErrorCode::Conflict, "no knowledge index configured");
      print_json(*d.analysis);
      return 0;
    }
    if (*report_cmd) {
      auto rt = service::Runtime::open(load_config(config_path));
      rt->store().export_user(user_id, std::cout);
      return 0;
    }
    if (*serve_cmd) {
      auto config = load_config(config_path);
      if (port >= 0) config.port = port;
      auto rt = service::Runtime::open(config);
      rt->start_sweeper();
      service::HttpServer server(*rt);
      util::log(util::LogLevel::Info, "listening on " + config.host + ":" + std::to_string(config.port));
      server.run(config.host, config.port);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

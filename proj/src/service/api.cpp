#include "mealsense/service/api.h"

#include <charconv>
#include <fstream>
#include <iterator>
#include <limits>

#include "mealsense/diet/analysis.h"
#include "mealsense/util/log.h"

namespace mealsense::service {

namespace {

using nlohmann::json;

ApiResponse json_response(const json& body, int status = 200) {
  ApiResponse r;
  r.status = status;
  r.body = body.dump();
  return r;
}

ApiResponse error_response(const ApiError& e, std::optional<int> status = std::nullopt) {
  return json_response(to_json(e), status.value_or(http_status(e.code)));
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < path.size()) {
    const auto j = path.find('/', i);
    const auto piece = path.substr(i, j == std::string::npos ? std::string::npos : j - i);
    if (!piece.empty()) out.push_back(piece);
    if (j == std::string::npos) break;
    i = j + 1;
  }
  return out;
}

std::int64_t parse_i64(const std::string& what, const std::string& text) {
  std::int64_t v = 0;
  const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  require(ec == std::errc() && p == text.data() + text.size(), ErrorCode::InvalidArgument,
          what + " must be an integer, got '" + text + "'");
  return v;
}

json parse_body(const ApiRequest& req) {
  try {
    return json::parse(req.body);
  } catch (const json::exception&) {
    fail(ErrorCode::InvalidArgument, "request body is not valid JSON");
  }
}

// Identifiers reach the filesystem (image ids), so keep them to a safe alphabet.
bool safe_id(const std::string& id) {
  if (id.empty() || id.size() > 200 || id == "." || id == "..") return false;
  for (const char c : id)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' || c == '@')) return false;
  return true;
}

json analysis_view(const store::MealRecord& r) {
  json j = json::object();
  j["session_id"] = r.session_id;
  j["version"] = r.version;
  j["items_version"] = r.items_version;
  j["stale"] = r.stale();
  j["items"] = r.items;
  j["analysis"] = r.analysis ? json(*r.analysis) : json(nullptr);
  j["analysis_items_version"] = r.analysis_items_version;
  j["suggestions"] = r.suggestions ? json(*r.suggestions) : json(nullptr);
  j["suggestions_items_version"] = r.suggestions_items_version;
  return j;
}

}  // namespace

std::string to_string(ApiErrorCode code) {
  switch (code) {
    case ApiErrorCode::BadRequest: return "BadRequest";
    case ApiErrorCode::NotFound: return "NotFound";
    case ApiErrorCode::Conflict: return "Conflict";
    case ApiErrorCode::Upstream: return "Upstream";
    case ApiErrorCode::Internal: return "Internal";
  }
  return "Internal";
}

ApiError api_error_for(ErrorCode code, const std::string& message) {
  ApiError e;
  e.message = message;
  switch (code) {
    case ErrorCode::EmptyStream:
    case ErrorCode::MalformedStream:
    case ErrorCode::UnsupportedRate:
    case ErrorCode::EmptyWindowSet:
    case ErrorCode::InvalidSignal:
    case ErrorCode::UndefinedAttitude:
    case ErrorCode::InvalidImage:
    case ErrorCode::EmptyDocument:
    case ErrorCode::InvalidArgument:
    case ErrorCode::DegenerateDataset:
    case ErrorCode::InsufficientUsers:
      e.code = ApiErrorCode::BadRequest;
      break;
    case ErrorCode::NotFound:
      e.code = ApiErrorCode::NotFound;
      break;
    case ErrorCode::Conflict:
    case ErrorCode::NoKnowledge:
    case ErrorCode::NoMealContent:
      e.code = ApiErrorCode::Conflict;
      break;
    case ErrorCode::ServiceUnavailable:
    case ErrorCode::ProtocolError:
      e.code = ApiErrorCode::Upstream;
      break;
    case ErrorCode::LayoutError:
    case ErrorCode::DimensionError:
    case ErrorCode::Io:
      e.code = ApiErrorCode::Internal;
      break;
  }
  e.retryable = e.code == ApiErrorCode::Upstream;
  return e;
}

int http_status(ApiErrorCode code) {
  switch (code) {
    case ApiErrorCode::BadRequest: return 400;
    case ApiErrorCode::NotFound: return 404;
    case ApiErrorCode::Conflict: return 409;
    case ApiErrorCode::Upstream: return 502;
    case ApiErrorCode::Internal: return 500;
  }
  return 500;
}

json to_json(const ApiError& e) {
  json inner = json::object();
  inner["code"] = to_string(e.code);
  inner["message"] = e.message;
  inner["retryable"] = e.retryable;
  json j = json::object();
  j["error"] = std::move(inner);
  return j;
}

json session_summary(const store::MealRecord& r) {
  json j = json::object();
  j["session_id"] = r.session_id;
  j["user_id"] = r.user_id;
  j["start_ns"] = r.start_ns;
  j["end_ns"] = r.end_ns;
  j["archived"] = r.archived;
  j["stale"] = r.stale();
  j["version"] = r.version;
  j["item_count"] = r.items.size();
  json ids = json::array();
  for (const auto& im : r.images) ids.push_back(im.image_id);
  j["image_ids"] = std::move(ids);
  std::optional<double> energy;
  if (r.analysis) energy = r.analysis->total[diet::Nutrient::EnergyKcal];
  j["energy_kcal"] = energy ? json(*energy) : json(nullptr);
  return j;
}

ApiResponse ApiHandler::handle(const ApiRequest& req) {
  const auto& token = rt_.config().bearer_token;
  if (!token.empty() && req.path != "/health") {
    const auto it = req.headers.find("authorization");
    if (it == req.headers.end() || it->second != "Bearer " + token)
      return error_response(ApiError{ApiErrorCode::BadRequest, "missing or wrong bearer token", false}, 401);
  }
  try {
    return route(req);
  } catch (const Error& e) {
    const auto err = api_error_for(e.code(), e.what());
    if (err.code == ApiErrorCode::Internal || err.code == ApiErrorCode::Upstream)
      util::log(util::LogLevel::Error, req.method + " " + req.path + ": " + e.what());
    return error_response(err);
  } catch (const json::exception& e) {
    return error_response(ApiError{ApiErrorCode::BadRequest, std::string("bad request field: ") + e.what(), false});
  } catch (const std::exception& e) {
    util::log(util::LogLevel::Error, req.method + " " + req.path + ": " + e.what());
    return error_response(ApiError{ApiErrorCode::Internal, e.what(), false});
  }
}

ApiResponse ApiHandler::route(const ApiRequest& req) {
  const auto p = split_path(req.path);
  const auto& m = req.method;
  const auto n = p.size();
  const auto not_allowed = [&] {
    return error_response(ApiError{ApiErrorCode::BadRequest, "method " + m + " not allowed on " + req.path, false}, 405);
  };
  const auto session_or_404 = [&](const std::string& id) {
    auto r = rt_.store().get(id);
    require(r.has_value(), ErrorCode::NotFound, "unknown session " + id);
    return *r;
  };

  if (n == 1 && p[0] == "health") {
    if (m != "GET") return not_allowed();
    json j = json::object();
    j["status"] = "ok";
    j["model_loaded"] = rt_.has_model();
    j["knowledge_chunks"] = rt_.index().size();
    j["index_digest"] = rt_.index().empty() ? json(nullptr) : json(rt_.index().digest());
    j["stub_services"] = rt_.config().stub_services;
    return json_response(j);
  }
  if (n == 1 && p[0] == "recordings") {
    if (m != "POST") return not_allowed();
    return post_recording(req);
  }
  if (n == 2 && p[0] == "recordings") {
    if (m != "GET") return not_allowed();
    const auto e = rt_.store().recording(p[1]);
    require(e.has_value(), ErrorCode::NotFound, "unknown recording " + p[1]);
    json j = json::object();
    j["recording_id"] = e->recording_id;
    j["user_id"] = e->user_id;
    j["session_ids"] = e->session_ids;
    return json_response(j);
  }
  if (n == 2 && p[0] == "chat" && p[1] == "common-questions") {
    if (m != "GET") return not_allowed();
    json j = json::object();
    j["questions"] = diet::common_questions();
    return json_response(j);
  }
  if (n == 2 && p[0] == "admin" && p[1] == "archive") {
    if (m != "POST") return not_allowed();
    json j = json::object();
    j["archived"] = rt_.archive();
    j["now_ns"] = rt_.now();
    return json_response(j);
  }
  if (n == 2 && p[0] == "images") {
    if (m != "GET") return not_allowed();
    require(safe_id(p[1]), ErrorCode::NotFound, "unknown image " + p[1]);
    std::ifstream in(rt_.image_path(p[1]), std::ios::binary);
    require(static_cast<bool>(in), ErrorCode::NotFound, "unknown image " + p[1]);
    ApiResponse r;
    r.content_type = "image/x-portable-pixmap";
    r.body.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    return r;
  }
  if (n >= 2 && p[0] == "sessions") {
    const auto& id = p[1];
    if (n == 2) {
      if (m != "GET") return not_allowed();
      json j = session_or_404(id);
      j["events"] = rt_.store().events(id);
      return json_response(j);
    }
    if (n == 3 && p[2] == "items") {
      if (m != "PUT") return not_allowed();
      const auto body = parse_body(req);
      const json& items_json = body.is_array() ? body : body.at("items");
      require(items_json.is_array(), ErrorCode::InvalidArgument, "items must be an array");
      auto items = items_json.get<std::vector<diet::DietItem>>();
      const std::string actor = body.is_object() ? body.value("actor", std::string("user")) : std::string("user");
      const auto version = rt_.store().apply_correction(id, std::move(items), actor, rt_.now());
      const auto r = session_or_404(id);
      json j = json::object();
      j["session_id"] = id;
      j["version"] = version;
      j["items_version"] = r.items_version;
      j["stale"] = r.stale();
      return json_response(j);
    }
    if (n == 3 && p[2] == "analysis") {
      if (m != "GET") return not_allowed();
      return json_response(analysis_view(session_or_404(id)));
    }
    if (n == 3 && p[2] == "events") {
      if (m != "GET") return not_allowed();
      session_or_404(id);
      json j = json::object();
      j["events"] = rt_.store().events(id);
      j["replayed_items"] = rt_.store().replay_items(id);
      return json_response(j);
    }
  }
  if (n == 3 && p[0] == "users") {
    const auto& user = p[1];
    if (p[2] == "sessions") {
      if (m != "GET") return not_allowed();
      std::int64_t from = std::numeric_limits<std::int64_t>::min(), to = std::numeric_limits<std::int64_t>::max();
      if (auto it = req.query.find("from"); it != req.query.end()) from = parse_i64("from", it->second);
      if (auto it = req.query.find("to"); it != req.query.end()) to = parse_i64("to", it->second);
      json list = json::array();
      for (const auto& r : rt_.store().timeline(user, from, to)) list.push_back(session_summary(r));
      json j = json::object();
      j["user_id"] = user;
      j["sessions"] = std::move(list);
      return json_response(j);
    }
    if (p[2] == "suggestions") {
      if (m != "GET") return not_allowed();
      const auto now = rt_.now();
      const auto set = rt_.suggestions(user);
      json j = set;
      j["user_id"] = user;
      j["now_ns"] = now;
      json ids = json::array();
      for (const auto& r : rt_.store().recent_window(user, now)) ids.push_back(r.session_id);
      j["window_session_ids"] = std::move(ids);
      return json_response(j);
    }
    if (p[2] == "chat") {
      if (m == "GET") {
        json j = json::object();
        j["user_id"] = user;
        j["turns"] = rt_.store().chat_history(user);
        return json_response(j);
      }
      if (m != "POST") return not_allowed();
      require(!req.body.empty(), ErrorCode::InvalidArgument, "chat body is empty");
      const auto body = parse_body(req);
      require(body.is_object() && body.contains("message") && body["message"].is_string(), ErrorCode::InvalidArgument,
              "chat body needs a string \"message\"");
      const auto reply = rt_.chat(user, body["message"].get<std::string>());
      json j = json::object();
      j["user_id"] = user;
      j["reply"] = reply;
      return json_response(j);
    }
    if (p[2] == "profile") {
      if (m == "GET") {
        const auto prof = rt_.store().profile(user);
        require(prof.has_value(), ErrorCode::NotFound, "no profile for " + user);
        json j = json::object();
        j["profile"] = *prof;
        j["version"] = rt_.store().profile_version(user);
        return json_response(j);
      }
      if (m != "PUT") return not_allowed();
      auto body = parse_body(req);
      require(body.is_object(), ErrorCode::InvalidArgument, "profile must be an object");
      if (body.contains("user_id"))
        require(body["user_id"] == user, ErrorCode::InvalidArgument, "profile user_id differs from the path");
      body["user_id"] = user;
      const auto prof = body.get<diet::UserProfile>();
      diet::validate(prof);
      json j = json::object();
      j["version"] = rt_.store().put_profile(prof);
      return json_response(j);
    }
  }
  fail(ErrorCode::NotFound, "no route for " + m + " " + req.path);
}

ApiResponse ApiHandler::post_recording(const ApiRequest& req) {
  require(!req.parts.empty(), ErrorCode::InvalidArgument, "expected a multipart upload with imu and audio parts");
  RecordingUpload u;
  for (const auto& part : req.parts) {
    if (part.name == "imu") {
      u.imu_csv.push_back(part.content);
    } else if (part.name == "audio") {
      require(u.wav.empty(), ErrorCode::InvalidArgument, "more than one audio part");
      u.wav = part.content;
    } else if (part.name == "labels") {
      u.labels_csv = part.content;
    } else if (part.name == "user_id") {
      u.user_id = part.content;
    } else if (part.name == "recording_id") {
      require(safe_id(part.content), ErrorCode::InvalidArgument, "recording_id may only use [A-Za-z0-9._@-]");
      u.recording_id = part.content;
    } else if (part.name == "audio_start_ns") {
      u.audio_start_ns = parse_i64("audio_start_ns", part.content);
    } else if (part.name == "diners") {
      u.diners = static_cast<int>(parse_i64("diners", part.content));
    } else if (part.name == "scenes") {
      try {
        u.scenes = synth::SceneScript::from_json(json::parse(part.content));
      } catch (const json::exception& e) {
        fail(ErrorCode::InvalidArgument, std::string("bad scenes part: ") + e.what());
      }
    } else if (part.name == "frame") {
      // filename "<captured_ns>.ppm"
      const auto stem = std::filesystem::path(part.filename).stem().string();
      std::vector<std::uint8_t> bytes(part.content.begin(), part.content.end());
      auto frame = image::decode_ppm(bytes, "frame-" + stem);
      frame.captured_ns = parse_i64("frame filename", stem);
      u.frames.push_back(std::move(frame));
    } else {
      fail(ErrorCode::InvalidArgument, "unknown multipart field '" + part.name + "'");
    }
  }
  if (u.user_id.empty()) {
    if (auto it = req.query.find("user_id"); it != req.query.end()) u.user_id = it->second;
  }
  require(safe_id(u.user_id), ErrorCode::InvalidArgument, "user_id is required and may only use [A-Za-z0-9._@-]");
  const auto result = rt_.ingest(u);
  return json_response(to_json(result), 201);
}

}  // namespace mealsense::service

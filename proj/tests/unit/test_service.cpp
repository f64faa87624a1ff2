#include <sstream>

#include "doctest.h"
#include "mealsense/error.h"
#include "mealsense/service/api.h"
#include "mealsense/service/config.h"
#include "support/golden.h"
#include "unit/helpers.h"

using namespace mealsense;
using namespace mealsense::service;
using mealsense::testing::TempDir;
using nlohmann::json;

namespace {

constexpr std::int64_t kSecond = 1'000'000'000;
constexpr std::int64_t kDay = 86400 * kSecond;

ApiRequest req(std::string method, std::string path, std::string body = {}) {
  ApiRequest r;
  r.method = std::move(method);
  r.path = std::move(path);
  r.body = std::move(body);
  return r;
}

std::string error_code(const ApiResponse& r) { return r.json()["error"]["code"].get<std::string>(); }

}  // namespace

TEST_CASE("config file: keys, comments, relative paths and unknown keys") {
  std::istringstream in(
      "# service\n"
      "port = 9090  # trailing comment\n"
      "stub_services = false\n"
      "data_dir = data\n"
      "model_path = /abs/model.bin\n"
      "llm_url = http://127.0.0.1:7000/complete\n"
      "pitch_threshold_deg = 7.5\n"
      "dedup_threshold = 0.8\n"
      "chunk_size = 500\n"
      "chunk_overlap = 50\n"
      "top_k = 4\n"
      "\n");
  const auto c = parse_service_config(in, "/etc/ms");
  CHECK(c.port == 9090);
  CHECK_FALSE(c.stub_services);
  CHECK(c.data_dir == std::filesystem::path("/etc/ms/data"));
  CHECK(c.model_path == std::filesystem::path("/abs/model.bin"));
  CHECK(c.llm_url == "http://127.0.0.1:7000/complete");
  CHECK(c.capture.pitch_threshold_deg == 7.5);
  CHECK(c.image.dedup_threshold == 0.8);
  CHECK(c.chunking.chunk_size == 500);
  CHECK(c.chunking.overlap == 50);
  CHECK(c.top_k == 4);

  std::istringstream unknown("colour = blue\n");
  CHECK_THROWS_AS(parse_service_config(unknown), Error);
  std::istringstream bad_bool("stub_services = maybe\n");
  CHECK_THROWS_AS(parse_service_config(bad_bool), Error);
  std::istringstream no_eq("port 80\n");
  CHECK_THROWS_AS(parse_service_config(no_eq), Error);
  std::istringstream bad_overlap("chunk_size = 100\nchunk_overlap = 100\n");
  CHECK_THROWS_AS(parse_service_config(bad_overlap), Error);
}

TEST_CASE("environment overrides any key, including secrets") {
  ServiceConfig c;
  std::map<std::string, std::string> env{{"MEALSENSE_UPSTREAM_API_KEY", "s3cret"},
                                         {"MEALSENSE_BEARER_TOKEN", "tok"},
                                         {"MEALSENSE_PORT", "1234"}};
  apply_env_overrides(c, [&](const std::string& name) -> std::optional<std::string> {
    auto it = env.find(name);
    if (it == env.end()) return std::nullopt;
    return it->second;
  });
  CHECK(c.upstream_api_key == "s3cret");
  CHECK(c.bearer_token == "tok");
  CHECK(c.port == 1234);
  env["MEALSENSE_TOP_K"] = "zero";
  CHECK_THROWS_AS(apply_env_overrides(c, [&](const std::string& name) -> std::optional<std::string> {
                    auto it = env.find(name);
                    if (it == env.end()) return std::nullopt;
                    return it->second;
                  }),
                  Error);
}

TEST_CASE("endpoint URLs split into base and path") {
  const auto e = parse_endpoint("http://127.0.0.1:8081/v1/segment", 500, "k");
  CHECK(e.base_url == "http://127.0.0.1:8081");
  CHECK(e.path == "/v1/segment");
  CHECK(e.timeout_ms == 500);
  CHECK(e.bearer_token == "k");
  CHECK(parse_endpoint("http://host:1", 1, "").path == "/");
  CHECK_THROWS_AS(parse_endpoint("host:1/x", 1, ""), Error);
}

TEST_CASE("error taxonomy: only Upstream is retryable") {
  CHECK(api_error_for(ErrorCode::MalformedStream, "").code == ApiErrorCode::BadRequest);
  CHECK(api_error_for(ErrorCode::InvalidArgument, "").code == ApiErrorCode::BadRequest);
  CHECK(api_error_for(ErrorCode::NotFound, "").code == ApiErrorCode::NotFound);
  CHECK(api_error_for(ErrorCode::Conflict, "").code == ApiErrorCode::Conflict);
  CHECK(api_error_for(ErrorCode::NoKnowledge, "").code == ApiErrorCode::Conflict);
  CHECK(api_error_for(ErrorCode::ServiceUnavailable, "").code == ApiErrorCode::Upstream);
  CHECK(api_error_for(ErrorCode::ProtocolError, "").code == ApiErrorCode::Upstream);
  CHECK(api_error_for(ErrorCode::Io, "").code == ApiErrorCode::Internal);
  for (int c = 0; c <= static_cast<int>(ErrorCode::Io); ++c) {
    const auto e = api_error_for(static_cast<ErrorCode>(c), "m");
    CHECK(e.retryable == (e.code == ApiErrorCode::Upstream));
  }
  CHECK(http_status(ApiErrorCode::Upstream) == 502);
  const auto j = to_json(ApiError{ApiErrorCode::Conflict, "busy", false});
  CHECK(j["error"]["code"] == "Conflict");
  CHECK(j["error"]["message"] == "busy");
  CHECK(j["error"]["retryable"] == false);
}

TEST_CASE("uploads: golden sessions, repeat conflict, empty and malformed uploads") {
  TempDir dir("svc-upload");
  testing::TestClock clock;
  clock.now = testing::kGoldenLastEndNs + 3600 * kSecond;
  auto rt = testing::golden_runtime(dir.path(), clock.fn());
  ApiHandler api(*rt);

  auto empty = req("POST", "/recordings");
  const auto r0 = api.handle(empty);
  CHECK(r0.status == 400);
  CHECK(error_code(r0) == "BadRequest");

  auto bad = testing::golden_post();
  bad.parts[2].content = "not,a,valid,imu,file\n";
  const auto rb = api.handle(bad);
  CHECK(rb.status == 400);

  const auto r1 = api.handle(testing::golden_post());
  REQUIRE(r1.status == 201);
  const auto body = r1.json();
  CHECK(body["recording_id"] == "golden-001");
  CHECK(body["session_ids"] == json::array({"golden-001-0", "golden-001-1"}));
  CHECK(body["bursts"] == 2);
  CHECK(body["detection"]["f1"] == 1.0);

  const auto r2 = api.handle(testing::golden_post());
  CHECK(r2.status == 409);
  CHECK(error_code(r2) == "Conflict");
  CHECK(r2.json()["error"]["retryable"] == false);

  const auto rec = api.handle(req("GET", "/recordings/golden-001"));
  CHECK(rec.json()["session_ids"].size() == 2);
}

TEST_CASE("uploads without a detector model are a Conflict") {
  TempDir dir("svc-nomodel");
  testing::TestClock clock;
  auto rt = testing::golden_runtime(dir.path(), clock.fn(), nullptr, false);
  ApiHandler api(*rt);
  const auto r = api.handle(testing::golden_post());
  CHECK(r.status == 409);
  CHECK(api.handle(req("GET", "/health")).json()["model_loaded"] == false);
}

TEST_CASE("browsing: timeline, detail, unknown ids, images") {
  TempDir dir("svc-browse");
  testing::TestClock clock;
  clock.now = testing::kGoldenLastEndNs + 3600 * kSecond;
  auto rt = testing::golden_runtime(dir.path(), clock.fn());
  ApiHandler api(*rt);
  REQUIRE(api.handle(testing::golden_post()).status == 201);

  const auto tl = api.handle(req("GET", "/users/alice/sessions")).json()["sessions"];
  REQUIRE(tl.size() == 2);
  CHECK(tl[0]["start_ns"].get<std::int64_t>() < tl[1]["start_ns"].get<std::int64_t>());
  CHECK(tl[0]["archived"] == false);
  CHECK(tl[0]["stale"] == false);
  CHECK(tl[0]["item_count"] == 2);

  auto ranged = req("GET", "/users/alice/sessions");
  ranged.query = {{"from", "1700000200000000000"}, {"to", "1700000300000000000"}};
  CHECK(api.handle(ranged).json()["sessions"].size() == 1);
  ranged.query["from"] = "soon";
  CHECK(api.handle(ranged).status == 400);

  const auto nobody = api.handle(req("GET", "/users/nobody/sessions"));
  CHECK(nobody.status == 200);
  CHECK(nobody.json()["sessions"].empty());

  const auto detail = api.handle(req("GET", "/sessions/golden-001-0")).json();
  CHECK(detail["items"].size() == 2);
  CHECK(detail["items"][0]["description"] == "ramen noodle soup");
  CHECK(detail["events"].empty());
  CHECK(detail["stale"] == false);
  CHECK(api.handle(req("GET", "/sessions/nope")).status == 404);
  CHECK(error_code(api.handle(req("GET", "/sessions/nope/analysis"))) == "NotFound");

  const auto image_id = detail["images"][0]["image_id"].get<std::string>();
  const auto img = api.handle(req("GET", "/images/" + image_id));
  CHECK(img.status == 200);
  CHECK(img.content_type == "image/x-portable-pixmap");
  CHECK(img.body.rfind("P6", 0) == 0);
  CHECK(api.handle(req("GET", "/images/..")).status == 404);
  CHECK(api.handle(req("GET", "/images/missing")).status == 404);
  CHECK(api.handle(req("DELETE", "/sessions/golden-001-0")).status == 405);
  CHECK(api.handle(req("GET", "/no/such/route")).status == 404);
}

TEST_CASE("corrections: stale until the recompute lands, then fresh with new totals") {
  TempDir dir("svc-correct");
  testing::TestClock clock;
  clock.now = testing::kGoldenLastEndNs + 3600 * kSecond;
  std::shared_ptr<testing::GatedLlm> gate;
  auto rt = testing::golden_runtime(dir.path(), clock.fn(), &gate);
  ApiHandler api(*rt);
  REQUIRE(api.handle(testing::golden_post()).status == 201);

  const auto before = api.handle(req("GET", "/sessions/golden-001-0/analysis")).json();
  CHECK(before["stale"] == false);
  const double energy_before = before["analysis"]["total"]["energy_kcal"].get<double>();

  // coke -> coke zero, ramen amount unchanged
  const json items = json::array({json::object({{"description", "ramen noodle soup"}, {"amount_value", 1}, {"amount_unit", "bowl"}}),
                                  json::object({{"description", "coke zero"}, {"amount_value", 330}, {"amount_unit", "ml"}})});
  gate->set_open(false);
  const auto put = api.handle(req("PUT", "/sessions/golden-001-0/items", json::object({{"items", items}}).dump()));
  REQUIRE(put.status == 200);
  CHECK(put.json()["version"] == 2);
  CHECK(put.json()["stale"] == true);

  const auto mid = api.handle(req("GET", "/sessions/golden-001-0/analysis")).json();
  CHECK(mid["stale"] == true);
  CHECK(mid["items_version"] == 2);
  CHECK(mid["analysis_items_version"] == 1);
  CHECK(api.handle(req("GET", "/sessions/golden-001-0")).json()["stale"] == true);

  gate->set_open(true);
  rt->store().drain();
  const auto after = api.handle(req("GET", "/sessions/golden-001-0/analysis")).json();
  CHECK(after["stale"] == false);
  CHECK(after["analysis_items_version"] == 2);
  const double energy_after = after["analysis"]["total"]["energy_kcal"].get<double>();
  // 330 ml coke is 138.6 kcal, coke zero 0.99 kcal
  CHECK(energy_before - energy_after == doctest::Approx(138.6 - 0.99));
  CHECK(after["items"][1]["origin"] == "UserCorrected");

  // identical payload: new version, identical analysis
  REQUIRE(api.handle(req("PUT", "/sessions/golden-001-0/items", json::object({{"items", items}}).dump())).status == 200);
  rt->store().drain();
  const auto again = api.handle(req("GET", "/sessions/golden-001-0/analysis")).json();
  CHECK(again["version"].get<int>() > after["version"].get<int>());
  CHECK(again["analysis"] == after["analysis"]);

  const auto events = api.handle(req("GET", "/sessions/golden-001-0/events")).json();
  CHECK(events["events"].size() == 2);
  CHECK(events["replayed_items"] == again["items"]);

  CHECK(api.handle(req("PUT", "/sessions/golden-001-0/items", "{")).status == 400);
  CHECK(api.handle(req("PUT", "/sessions/golden-001-0/items", R"({"items":[{"description":"","amount_value":1,"amount_unit":"g"}]})")).status == 400);
  CHECK(api.handle(req("PUT", "/sessions/nope/items", json::object({{"items", items}}).dump())).status == 404);
}

TEST_CASE("suggestions, chat and profiles") {
  TempDir dir("svc-suggest");
  testing::TestClock clock;
  clock.now = testing::kGoldenLastEndNs + 3600 * kSecond;
  auto rt = testing::golden_runtime(dir.path(), clock.fn());
  ApiHandler api(*rt);

  const auto none = api.handle(req("GET", "/users/alice/suggestions"));
  CHECK(none.status == 409);
  CHECK(error_code(none) == "Conflict");

  REQUIRE(api.handle(testing::golden_post()).status == 201);
  const auto s = api.handle(req("GET", "/users/alice/suggestions"));
  REQUIRE(s.status == 200);
  const auto sj = s.json();
  CHECK(sj["window_session_ids"].size() == 2);
  for (const char* list : {"general", "personalized"}) {
    CHECK(!sj[list].empty());
    CHECK(sj[list].size() <= 7);
    for (const auto& sug : sj[list]) {
      REQUIRE(!sug["source_chunk_ids"].empty());
      for (const auto& id : sug["source_chunk_ids"]) CHECK(rt->index().find(id.get<std::string>()) != nullptr);
    }
  }

  // a week and a second after the last meal nothing is left
  clock.now = testing::kGoldenLastEndNs + 7 * kDay + kSecond;
  CHECK(api.handle(req("GET", "/users/alice/suggestions")).status == 409);
  clock.now = testing::kGoldenLastEndNs + 3600 * kSecond;

  CHECK(api.handle(req("POST", "/users/alice/chat")).status == 400);
  CHECK(api.handle(req("POST", "/users/alice/chat", R"({"message":""})")).status == 400);
  CHECK(api.handle(req("POST", "/users/alice/chat", R"({"text":"hi"})")).status == 400);
  const auto questions = api.handle(req("GET", "/chat/common-questions")).json()["questions"];
  REQUIRE(!questions.empty());
  const auto q = questions[0].get<std::string>();
  const auto reply = api.handle(req("POST", "/users/alice/chat", json::object({{"message", q}}).dump()));
  REQUIRE(reply.status == 200);
  CHECK(reply.json()["reply"]["role"] == "assistant");
  CHECK(!reply.json()["reply"]["cited_chunk_ids"].empty());
  const auto history = api.handle(req("GET", "/users/alice/chat")).json()["turns"];
  REQUIRE(history.size() == 2);
  CHECK(history[0]["text"] == q);
  CHECK(history[0]["timestamp_ns"].get<std::int64_t>() < history[1]["timestamp_ns"].get<std::int64_t>());

  CHECK(api.handle(req("GET", "/users/alice/profile")).status == 404);
  const json prof = json::object({{"age", 34}, {"height_cm", 168}, {"weight_kg", 61}, {"gender", "female"},
                                  {"goals", json::array({"weight loss"})}});
  const auto put = api.handle(req("PUT", "/users/alice/profile", prof.dump()));
  REQUIRE(put.status == 200);
  CHECK(put.json()["version"] == 1);
  const auto got = api.handle(req("GET", "/users/alice/profile")).json();
  CHECK(got["profile"]["user_id"] == "alice");
  CHECK(got["profile"]["goals"] == json::array({"weight loss"}));
  auto bad = prof;
  bad["age"] = -1;
  CHECK(api.handle(req("PUT", "/users/alice/profile", bad.dump())).status == 400);
  bad = prof;
  bad["user_id"] = "bob";
  CHECK(api.handle(req("PUT", "/users/alice/profile", bad.dump())).status == 400);

  const auto personal = api.handle(req("GET", "/users/alice/suggestions")).json()["personalized"];
  REQUIRE(!personal.empty());
  for (const auto& sug : personal) CHECK(sug["goal"] == "weight loss");
}

TEST_CASE("archive: sessions a week and a second old are archived and read-only") {
  TempDir dir("svc-archive");
  testing::TestClock clock;
  clock.now = testing::kGoldenLastEndNs + 3600 * kSecond;
  auto rt = testing::golden_runtime(dir.path(), clock.fn());
  ApiHandler api(*rt);
  REQUIRE(api.handle(testing::golden_post()).status == 201);

  const std::int64_t first_end = 1'700'000'090'000'000'000;
  clock.now = first_end + 7 * kDay;
  CHECK(api.handle(req("POST", "/admin/archive")).json()["archived"] == 0);
  clock.now = first_end + 7 * kDay + kSecond;
  CHECK(api.handle(req("POST", "/admin/archive")).json()["archived"] == 1);

  const auto tl = api.handle(req("GET", "/users/alice/sessions")).json()["sessions"];
  CHECK(tl[0]["archived"] == true);
  CHECK(tl[1]["archived"] == false);
  const auto s = api.handle(req("GET", "/users/alice/suggestions")).json();
  CHECK(s["window_session_ids"] == json::array({"golden-001-1"}));
  const json items = json::array({json::object({{"description", "apple"}, {"amount_value", 1}, {"amount_unit", "piece"}})});
  CHECK(api.handle(req("PUT", "/sessions/golden-001-0/items", json::object({{"items", items}}).dump())).status == 409);
}

TEST_CASE("bearer token guards every route but /health") {
  TempDir dir("svc-auth");
  testing::TestClock clock;
  auto cfg = testing::golden_config(dir.path());
  cfg.bearer_token = "t0ken";
  Runtime rt(cfg, make_upstreams(cfg), clock.fn());
  ApiHandler api(rt);
  CHECK(api.handle(req("GET", "/health")).status == 200);
  auto r = req("GET", "/chat/common-questions");
  CHECK(api.handle(r).status == 401);
  r.headers["authorization"] = "Bearer wrong";
  CHECK(api.handle(r).status == 401);
  r.headers["authorization"] = "Bearer t0ken";
  CHECK(api.handle(r).status == 200);
}

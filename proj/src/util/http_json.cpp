#include "mealsense/util/http_json.h"

#include "httplib.h"
#include "mealsense/error.h"

namespace mealsense::util {

std::string post_raw(const HttpEndpoint& endpoint, const nlohmann::json& body) {
  httplib::Client client(endpoint.base_url);
  const auto timeout = std::chrono::milliseconds(endpoint.timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  if (!endpoint.bearer_token.empty()) client.set_bearer_token_auth(endpoint.bearer_token);

  const auto res = client.Post(endpoint.path, body.dump(), "application/json");
  if (!res) {
    fail(ErrorCode::ServiceUnavailable,
         endpoint.base_url + endpoint.path + ": " + httplib::to_string(res.error()));
  }
  if (res->status >= 500 || res->status == 429) {
    fail(ErrorCode::ServiceUnavailable, endpoint.base_url + endpoint.path + ": HTTP " + std::to_string(res->status));
  }
  if (res->status < 200 || res->status >= 300) {
    fail(ErrorCode::ProtocolError, endpoint.base_url + endpoint.path + ": HTTP " + std::to_string(res->status));
  }
  return res->body;
}

nlohmann::json post_json(const HttpEndpoint& endpoint, const nlohmann::json& body) {
  const std::string reply = post_raw(endpoint, body);
  try {
    return nlohmann::json::parse(reply);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ProtocolError, endpoint.base_url + endpoint.path + ": invalid JSON reply: " + e.what());
  }
}

}  // namespace mealsense::util

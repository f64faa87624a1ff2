#pragma once

#include <string>

#include "json.hpp"

namespace mealsense::util {

struct HttpEndpoint {
  std::string base_url;  // e.g. http://127.0.0.1:8081
  std::string path;      // e.g. /segment
  int timeout_ms = 10000;
  std::string bearer_token;
};

// POST a JSON body and parse the JSON reply. Connection failures, timeouts
// and 5xx replies raise ServiceUnavailable; other non-2xx replies and
// unparseable bodies raise ProtocolError.
// Same status handling as post_json, body returned unparsed.
std::string post_raw(const HttpEndpoint& endpoint, const nlohmann::json& body);

nlohmann::json post_json(const HttpEndpoint& endpoint, const nlohmann::json& body);

}  // namespace mealsense::util

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mealsense/error.h"
#include "mealsense/service/runtime.h"

namespace mealsense::service {

enum class ApiErrorCode { BadRequest, NotFound, Conflict, Upstream, Internal };

std::string to_string(ApiErrorCode code);

struct ApiError {
  ApiErrorCode code = ApiErrorCode::Internal;
  std::string message;
  bool retryable = false;  // true exactly for Upstream
};

ApiError api_error_for(ErrorCode code, const std::string& message);
int http_status(ApiErrorCode code);
// {"error": {"code", "message", "retryable"}}
nlohmann::json to_json(const ApiError& error);

struct MultipartPart {
  std::string name;
  std::string filename;
  std::string content_type;
  std::string content;
};

struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::map<std::string, std::string> headers;  // lower-case names
  std::string body;
  std::vector<MultipartPart> parts;
};

struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;

  nlohmann::json json() const { return nlohmann::json::parse(body); }
};

// Routes a request to the runtime. Never throws; every failure becomes an
// ApiError body. Field names are documented in docs/api.md.
class ApiHandler {
 public:
  explicit ApiHandler(Runtime& runtime) : rt_(runtime) {}
  ApiResponse handle(const ApiRequest& request);

 private:
  ApiResponse route(const ApiRequest& request);
  ApiResponse post_recording(const ApiRequest& request);

  Runtime& rt_;
};

// Timeline entry: ids, times, flags and counts without items or analysis.
nlohmann::json session_summary(const store::MealRecord& record);

}  // namespace mealsense::service

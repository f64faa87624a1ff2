#include "mealsense/service/server.h"

#include <algorithm>
#include <cctype>

#include "httplib.h"
#include "mealsense/error.h"
#include "mealsense/util/log.h"

namespace mealsense::service {

namespace {

constexpr std::size_t kMaxUploadBytes = 512u * 1024 * 1024;

ApiRequest to_api_request(const httplib::Request& req) {
  ApiRequest r;
  r.method = req.method;
  r.path = req.path;
  for (const auto& [k, v] : req.params) r.query.emplace(k, v);
  for (const auto& [k, v] : req.headers) {
    std::string name = k;
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    r.headers.emplace(std::move(name), v);
  }
  if (req.is_multipart_form_data()) {
    for (const auto& [name, file] : req.files)
      r.parts.push_back(MultipartPart{name, file.filename, file.content_type, file.content});
  } else {
    r.body = req.body;
  }
  return r;
}

}  // namespace

struct HttpServer::Impl {
  explicit Impl(Runtime& runtime) : handler(runtime) {
    const auto dispatch = [this](const httplib::Request& req, httplib::Response& res) {
      const auto out = handler.handle(to_api_request(req));
      res.status = out.status;
      res.set_content(out.body, out.content_type);
    };
    server.Get(".*", dispatch);
    server.Post(".*", dispatch);
    server.Put(".*", dispatch);
    server.Delete(".*", dispatch);
    server.set_payload_max_length(kMaxUploadBytes);
    server.set_logger([](const httplib::Request& req, const httplib::Response& res) {
      util::log(util::LogLevel::Debug, req.method + " " + req.path + " -> " + std::to_string(res.status));
    });
  }

  ApiHandler handler;
  httplib::Server server;
};

HttpServer::HttpServer(Runtime& runtime) : impl_(std::make_unique<Impl>(runtime)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  require(bound > 0, ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpServer::run(const std::string& host, int port) {
  require(impl_->server.listen(host, port), ErrorCode::Io, "cannot listen on " + host + ":" + std::to_string(port));
}

void HttpServer::stop() {
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace mealsense::service

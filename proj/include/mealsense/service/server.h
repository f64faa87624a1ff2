#pragma once

#include <memory>
#include <string>
#include <thread>

#include "mealsense/service/api.h"

namespace mealsense::service {

// httplib front end for ApiHandler. Multipart bodies are split into parts;
// everything else is passed through as the raw body.
class HttpServer {
 public:
  explicit HttpServer(Runtime& runtime);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds (port 0 picks a free one) and serves on a background thread.
  // Returns the bound port. Io when the address cannot be bound.
  int start(const std::string& host, int port);
  // Blocks serving on the calling thread.
  void run(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
};

}  // namespace mealsense::service

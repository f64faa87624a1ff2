#pragma once

#include <mutex>
#include <string>
#include <vector>

#include "mealsense/util/http_json.h"

namespace mealsense::rag {

struct ContextChunk {
  std::string chunk_id;
  std::string text;
};

struct CompletionRequest {
  std::string prompt;
  std::vector<ContextChunk> context_chunks;
};

struct Completion {
  std::string answer;
  std::vector<std::string> cited;
};

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual Completion complete(const CompletionRequest& request) = 0;
};

// Echoes the context chunk texts and cites every chunk it was given.
class EchoLlmClient : public LlmClient {
 public:
  Completion complete(const CompletionRequest& request) override;
};

// `{prompt, context_chunks:[{chunk_id, text}]}` -> `{answer, cited:[...]}`.
class HttpLlmClient : public LlmClient {
 public:
  explicit HttpLlmClient(util::HttpEndpoint endpoint);
  Completion complete(const CompletionRequest& request) override;

 private:
  util::HttpEndpoint endpoint_;
};

// Keeps every request for inspection, forwards to the wrapped client.
class RecordingLlmClient : public LlmClient {
 public:
  explicit RecordingLlmClient(LlmClient& inner) : inner_(inner) {}
  Completion complete(const CompletionRequest& request) override;
  std::vector<CompletionRequest> requests() const;

 private:
  LlmClient& inner_;
  mutable std::mutex mu_;
  std::vector<CompletionRequest> requests_;
};

}  // namespace mealsense::rag

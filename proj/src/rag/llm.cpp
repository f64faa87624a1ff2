#include "mealsense/rag/llm.h"

#include "mealsense/error.h"

namespace mealsense::rag {

Completion EchoLlmClient::complete(const CompletionRequest& request) {
  Completion c;
  c.answer = "According to the supplied sources:";
  for (const auto& chunk : request.context_chunks) {
    c.answer += "\n[" + chunk.chunk_id + "] " + chunk.text;
    c.cited.push_back(chunk.chunk_id);
  }
  return c;
}

HttpLlmClient::HttpLlmClient(util::HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

Completion HttpLlmClient::complete(const CompletionRequest& request) {
  nlohmann::json chunks = nlohmann::json::array();
  for (const auto& c : request.context_chunks) chunks.push_back({{"chunk_id", c.chunk_id}, {"text", c.text}});
  const auto reply = util::post_json(endpoint_, {{"prompt", request.prompt}, {"context_chunks", chunks}});
  try {
    Completion c;
    c.answer = reply.at("answer").get<std::string>();
    c.cited = reply.value("cited", std::vector<std::string>{});
    return c;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ProtocolError, std::string("completion reply: ") + e.what());
  }
}

Completion RecordingLlmClient::complete(const CompletionRequest& request) {
  {
    std::lock_guard lock(mu_);
    requests_.push_back(request);
  }
  return inner_.complete(request);
}

std::vector<CompletionRequest> RecordingLlmClient::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

}  // namespace mealsense::rag

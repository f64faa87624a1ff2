#pragma once

#include <string>
#include <vector>

#include "mealsense/rag/index.h"
#include "mealsense/rag/llm.h"

namespace mealsense::rag {

inline constexpr std::size_t kDefaultTopK = 6;

struct GroundedAnswer {
  std::string answer_text;
  std::vector<std::string> cited_chunk_ids;  // non-empty, all in the index
  std::string query_digest;
};

struct RetrievedContext {
  std::vector<RetrievalHit> hits;
  std::vector<ContextChunk> chunks;
};

// NoKnowledge on an empty index.
RetrievedContext retrieve(const std::string& query, std::size_t k, const VectorIndex& index, TextEmbedder& embedder);

// Fixed instructions, then the numbered sources, then the question.
std::string build_prompt(const std::string& instructions, const std::vector<ContextChunk>& chunks,
                         const std::string& question);

// Citations are restricted to the supplied chunks; none left is a ProtocolError.
std::vector<std::string> validate_citations(const Completion& completion, const std::vector<ContextChunk>& supplied);

GroundedAnswer grounded_answer(const std::string& query, std::size_t k, const VectorIndex& index,
                               TextEmbedder& embedder, LlmClient& llm);

}  // namespace mealsense::rag

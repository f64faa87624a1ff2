#include "mealsense/rag/grounded.h"

#include <algorithm>
#include <set>

#include "mealsense/error.h"
#include "mealsense/util/hash.h"

namespace mealsense::rag {

namespace {

constexpr const char* kAnswerInstructions =
    "You are a nutrition assistant. Answer the question using only the sources below. "
    "Cite each source you rely on by its id in square brackets.";

}  // namespace

RetrievedContext retrieve(const std::string& query, std::size_t k, const VectorIndex& index, TextEmbedder& embedder) {
  require(!index.empty(), ErrorCode::NoKnowledge, "knowledge index is empty");
  const std::vector<std::string> texts{query};
  const auto q = embedder.embed(texts);
  require(q.size() == 1, ErrorCode::ProtocolError, "embedder returned the wrong vector count");
  RetrievedContext ctx;
  ctx.hits = index.search(q.front(), k);
  for (const auto& h : ctx.hits) ctx.chunks.push_back({h.chunk_id, index.find(h.chunk_id)->text});
  return ctx;
}

std::string build_prompt(const std::string& instructions, const std::vector<ContextChunk>& chunks,
                         const std::string& question) {
  std::string prompt = instructions + "\n\nSOURCES:\n";
  for (const auto& c : chunks) prompt += "[" + c.chunk_id + "] " + c.text + "\n";
  prompt += "\nQUESTION:\n" + question + "\n";
  return prompt;
}

std::vector<std::string> validate_citations(const Completion& completion, const std::vector<ContextChunk>& supplied) {
  std::set<std::string> allowed;
  for (const auto& c : supplied) allowed.insert(c.chunk_id);
  std::vector<std::string> cited;
  std::set<std::string> seen;
  for (const auto& id : completion.cited)
    if (allowed.count(id) != 0 && seen.insert(id).second) cited.push_back(id);
  require(!cited.empty(), ErrorCode::ProtocolError, "model answer cites none of the supplied sources");
  return cited;
}

GroundedAnswer grounded_answer(const std::string& query, std::size_t k, const VectorIndex& index,
                               TextEmbedder& embedder, LlmClient& llm) {
  require(!query.empty(), ErrorCode::InvalidArgument, "query is empty");
  const auto ctx = retrieve(query, k, index, embedder);
  CompletionRequest request{build_prompt(kAnswerInstructions, ctx.chunks, query), ctx.chunks};
  const auto completion = llm.complete(request);
  GroundedAnswer answer;
  answer.answer_text = completion.answer;
  answer.cited_chunk_ids = validate_citations(completion, ctx.chunks);
  util::Fnv1a h;
  h.update(query);
  h.update_u64(k);
  answer.query_digest = util::to_hex(h.digest());
  return answer;
}

}  // namespace mealsense::rag

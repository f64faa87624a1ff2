#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mealsense/rag/document.h"
#include "mealsense/util/http_json.h"

namespace mealsense::rag {

struct KnowledgeChunk {
  std::string chunk_id;  // <doc_id>#<5-digit ordinal>
  std::string doc_id;
  CharRange char_range;
  std::string text;
  std::vector<double> embedding;
};

struct DocumentInfo {
  std::string title;
  SourceClass source_class = SourceClass::NutrientDatabase;
  std::optional<std::string> provenance_url;
};

struct RetrievalHit {
  std::string chunk_id;
  double score = 0;
  std::size_t rank = 0;  // from 1
};

class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  // Unit-norm vectors, one per text.
  virtual std::vector<std::vector<double>> embed(std::span<const std::string> texts) = 0;
};

// Signed feature hashing of lowercased alphanumeric tokens and their
// bigrams. Deterministic; texts without tokens hash as a whole.
class HashingTextEmbedder : public TextEmbedder {
 public:
  explicit HashingTextEmbedder(std::size_t dimension = 256);
  std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;
  std::size_t dimension() const { return dimension_; }

 private:
  std::size_t dimension_;
};

// `{texts:[...]}` -> `{vectors:[[...]]}`.
class HttpTextEmbedder : public TextEmbedder {
 public:
  explicit HttpTextEmbedder(util::HttpEndpoint endpoint);
  std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;

 private:
  util::HttpEndpoint endpoint_;
};

// Chunk and embed one document. EmptyDocument on an empty body.
std::vector<KnowledgeChunk> ingest(const KnowledgeDocument& doc, TextEmbedder& embedder, const ChunkConfig& config = {});

// Immutable exact cosine index. Safe for concurrent searches.
class VectorIndex {
 public:
  VectorIndex() = default;
  // DimensionError on mixed dimensions; Conflict on duplicate chunk ids.
  static VectorIndex build(std::vector<KnowledgeChunk> chunks, std::map<std::string, DocumentInfo> documents = {});

  // Top-k by cosine, ties by chunk_id ascending. InvalidArgument if k == 0.
  std::vector<RetrievalHit> search(std::span<const double> query, std::size_t k) const;

  std::size_t size() const { return chunks_.size(); }
  std::size_t dimension() const { return dimension_; }
  bool empty() const { return chunks_.empty(); }
  const std::vector<KnowledgeChunk>& chunks() const { return chunks_; }
  const KnowledgeChunk* find(const std::string& chunk_id) const;
  const DocumentInfo* document(const std::string& doc_id) const;
  const std::map<std::string, DocumentInfo>& documents() const { return documents_; }
  std::string digest() const;

  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static VectorIndex load(std::istream& in);
  static VectorIndex load(const std::filesystem::path& path);

 private:
  std::vector<KnowledgeChunk> chunks_;
  std::map<std::string, std::size_t> by_id_;
  std::map<std::string, DocumentInfo> documents_;
  std::size_t dimension_ = 0;
};

// Documents -> chunks -> index.
VectorIndex build_index(std::span<const KnowledgeDocument> docs, TextEmbedder& embedder, const ChunkConfig& config = {});

}  // namespace mealsense::rag

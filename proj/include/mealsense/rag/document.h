#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mealsense::rag {

enum class SourceClass { NutrientDatabase, OfficialReport, GovWebpage, TrustedOrg, PeerReviewed };

std::string to_string(SourceClass c);
SourceClass parse_source_class(std::string_view text);  // InvalidArgument if unknown

struct KnowledgeDocument {
  std::string doc_id;
  std::string title;
  SourceClass source_class = SourceClass::NutrientDatabase;
  std::string body;
  std::optional<std::string> provenance_url;
};

// Header lines `key: value` (doc_id, title, source_class, url), a blank
// line, then the body verbatim.
KnowledgeDocument parse_document(std::istream& in);
KnowledgeDocument load_document(const std::filesystem::path& path);
void write_document(std::ostream& out, const KnowledgeDocument& doc);
// Every regular file in the directory, sorted by file name.
std::vector<KnowledgeDocument> load_documents(const std::filesystem::path& dir);

struct ChunkConfig {
  std::size_t chunk_size = 1000;
  std::size_t overlap = 200;
};

struct CharRange {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
  bool operator==(const CharRange&) const = default;
};

// Recursive split over "\n\n", "\n", ". ", " " and single characters (UTF-8
// code points), then greedy merging with a tail of at most `overlap` bytes
// carried into the next chunk. Chunks are byte ranges, each at most
// chunk_size long, covering the text in order without gaps.
std::vector<CharRange> split_text(std::string_view text, const ChunkConfig& config = {});

// Concatenation of the ranges with overlaps removed.
std::string reconstruct(std::string_view text, const std::vector<CharRange>& ranges);

}  // namespace mealsense::rag

#include "mealsense/rag/document.h"

#include <algorithm>
#include <array>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>

#include "mealsense/error.h"

namespace mealsense::rag {

namespace {

constexpr std::array<SourceClass, 5> kClasses{SourceClass::NutrientDatabase, SourceClass::OfficialReport,
                                              SourceClass::GovWebpage, SourceClass::TrustedOrg,
                                              SourceClass::PeerReviewed};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

const std::array<std::string_view, 4> kSeparators{"\n\n", "\n", ". ", " "};

// Pieces of [start, end) that are each at most `limit` long, in order.
void split_recursive(std::string_view text, std::size_t start, std::size_t end, std::size_t level,
                     std::size_t limit, std::vector<CharRange>& out) {
  if (end - start <= limit) {
    out.push_back({start, end});
    return;
  }
  const std::string_view span = text.substr(start, end - start);
  while (level < kSeparators.size() && span.find(kSeparators[level]) == std::string_view::npos) ++level;
  if (level == kSeparators.size()) {
    // Code points; continuation bytes stay with their lead byte.
    std::size_t i = start;
    while (i < end) {
      std::size_t j = i + 1;
      while (j < end && (static_cast<unsigned char>(text[j]) & 0xC0U) == 0x80U) ++j;
      out.push_back({i, j});
      i = j;
    }
    return;
  }
  // Separator stays attached to the end of the preceding piece.
  const std::string_view sep = kSeparators[level];
  std::size_t piece_start = start;
  std::size_t pos = start;
  while (pos < end) {
    const auto found = text.substr(0, end).find(sep, pos);
    const std::size_t piece_end = found == std::string_view::npos ? end : found + sep.size();
    split_recursive(text, piece_start, piece_end, level + 1, limit, out);
    piece_start = pos = piece_end;
  }
}

}  // namespace

std::string to_string(SourceClass c) {
  switch (c) {
    case SourceClass::NutrientDatabase: return "NutrientDatabase";
    case SourceClass::OfficialReport: return "OfficialReport";
    case SourceClass::GovWebpage: return "GovWebpage";
    case SourceClass::TrustedOrg: return "TrustedOrg";
    case SourceClass::PeerReviewed: return "PeerReviewed";
  }
  return "?";
}

SourceClass parse_source_class(std::string_view text) {
  for (auto c : kClasses)
    if (to_string(c) == text) return c;
  fail(ErrorCode::InvalidArgument, "unknown source class: " + std::string(text));
}

KnowledgeDocument parse_document(std::istream& in) {
  KnowledgeDocument doc;
  bool have_class = false;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) break;
    const auto colon = line.find(':');
    require(colon != std::string::npos, ErrorCode::InvalidArgument, "document header: expected key: value");
    const std::string key = trim(std::string_view(line).substr(0, colon));
    const std::string value = trim(std::string_view(line).substr(colon + 1));
    if (key == "doc_id") doc.doc_id = value;
    else if (key == "title") doc.title = value;
    else if (key == "source_class") {
      doc.source_class = parse_source_class(value);
      have_class = true;
    } else if (key == "url") doc.provenance_url = value;
    else fail(ErrorCode::InvalidArgument, "document header: unknown key " + key);
  }
  require(!doc.doc_id.empty(), ErrorCode::InvalidArgument, "document header lacks doc_id");
  require(have_class, ErrorCode::InvalidArgument, "document " + doc.doc_id + " lacks source_class");
  doc.body.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return doc;
}

KnowledgeDocument load_document(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path.string());
  return parse_document(in);
}

void write_document(std::ostream& out, const KnowledgeDocument& doc) {
  out << "doc_id: " << doc.doc_id << "\n";
  out << "title: " << doc.title << "\n";
  out << "source_class: " << to_string(doc.source_class) << "\n";
  if (doc.provenance_url) out << "url: " << *doc.provenance_url << "\n";
  out << "\n" << doc.body;
}

std::vector<KnowledgeDocument> load_documents(const std::filesystem::path& dir) {
  require(std::filesystem::is_directory(dir), ErrorCode::Io, "not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<KnowledgeDocument> docs;
  for (const auto& f : files) docs.push_back(load_document(f));
  return docs;
}

std::vector<CharRange> split_text(std::string_view text, const ChunkConfig& config) {
  require(config.chunk_size > 0 && config.overlap < config.chunk_size, ErrorCode::InvalidArgument,
          "chunking needs 0 <= overlap < chunk_size");
  require(!text.empty(), ErrorCode::EmptyDocument, "document body is empty");
  std::vector<CharRange> pieces;
  split_recursive(text, 0, text.size(), 0, config.chunk_size, pieces);

  std::vector<CharRange> chunks;
  std::size_t first = 0;  // index of the first piece in the current chunk
  std::size_t total = 0;
  auto len = [&](std::size_t i) { return pieces[i].end - pieces[i].start; };
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (total + len(i) > config.chunk_size && total > 0) {
      chunks.push_back({pieces[first].start, pieces[i - 1].end});
      while (total > 0 && (total > config.overlap || total + len(i) > config.chunk_size)) {
        total -= len(first);
        ++first;
      }
    }
    total += len(i);
  }
  if (total > 0) chunks.push_back({pieces[first].start, pieces.back().end});
  return chunks;
}

std::string reconstruct(std::string_view text, const std::vector<CharRange>& ranges) {
  std::string out;
  std::size_t covered = 0;
  for (const auto& r : ranges) {
    require(r.start <= covered && r.end <= text.size(), ErrorCode::InvalidArgument, "ranges leave a gap");
    if (r.end > covered) {
      out.append(text.substr(covered, r.end - covered));
      covered = r.end;
    }
  }
  return out;
}

}  // namespace mealsense::rag

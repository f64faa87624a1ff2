#include "mealsense/rag/index.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "mealsense/error.h"
#include "mealsense/util/binary_io.h"
#include "mealsense/util/hash.h"

namespace mealsense::rag {

namespace {

constexpr char kMagic[4] = {'M', 'S', 'V', 'I'};
constexpr std::uint64_t kFormatVersion = 1;

std::vector<double> normalized(std::vector<double> v, ErrorCode code) {
  double n = 0;
  for (double x : v) {
    require(std::isfinite(x), code, "embedding has non-finite values");
    n += x * x;
  }
  require(n > 0, code, "embedding is the zero vector");
  n = std::sqrt(n);
  for (double& x : v) x /= n;
  return v;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

bool hit_before(const RetrievalHit& a, const RetrievalHit& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.chunk_id < b.chunk_id;
}

}  // namespace

HashingTextEmbedder::HashingTextEmbedder(std::size_t dimension) : dimension_(dimension) {
  require(dimension_ >= 2, ErrorCode::InvalidArgument, "embedding dimension must be >= 2");
}

std::vector<std::vector<double>> HashingTextEmbedder::embed(std::span<const std::string> texts) {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& text : texts) {
    std::vector<double> v(dimension_, 0.0);
    auto add = [&](const std::string& feature, double weight) {
      const auto h = util::fnv1a(feature);
      v[h % dimension_] += (h >> 63U) != 0 ? -weight : weight;
    };
    const auto tokens = tokenize(text);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      add(tokens[i], 1.0);
      if (i + 1 < tokens.size()) add(tokens[i] + ' ' + tokens[i + 1], 0.5);
    }
    if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) add("\x01" + text, 1.0);
    out.push_back(normalized(std::move(v), ErrorCode::InvalidArgument));
  }
  return out;
}

HttpTextEmbedder::HttpTextEmbedder(util::HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

std::vector<std::vector<double>> HttpTextEmbedder::embed(std::span<const std::string> texts) {
  const auto reply = util::post_json(endpoint_, {{"texts", std::vector<std::string>(texts.begin(), texts.end())}});
  std::vector<std::vector<double>> vectors;
  try {
    vectors = reply.at("vectors").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ProtocolError, std::string("embedding reply: ") + e.what());
  }
  require(vectors.size() == texts.size(), ErrorCode::ProtocolError, "embedding reply has the wrong vector count");
  for (auto& v : vectors) v = normalized(std::move(v), ErrorCode::ProtocolError);
  return vectors;
}

std::vector<KnowledgeChunk> ingest(const KnowledgeDocument& doc, TextEmbedder& embedder, const ChunkConfig& config) {
  const auto ranges = split_text(doc.body, config);
  std::vector<std::string> texts;
  texts.reserve(ranges.size());
  for (const auto& r : ranges) texts.push_back(doc.body.substr(r.start, r.end - r.start));
  auto vectors = embedder.embed(texts);
  require(vectors.size() == texts.size(), ErrorCode::ProtocolError, "embedder returned the wrong vector count");
  std::vector<KnowledgeChunk> chunks;
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    char ordinal[24];
    std::snprintf(ordinal, sizeof ordinal, "%05zu", i);
    chunks.push_back({doc.doc_id + "#" + ordinal, doc.doc_id, ranges[i], std::move(texts[i]), std::move(vectors[i])});
  }
  return chunks;
}

VectorIndex VectorIndex::build(std::vector<KnowledgeChunk> chunks, std::map<std::string, DocumentInfo> documents) {
  VectorIndex index;
  index.documents_ = std::move(documents);
  if (!chunks.empty()) index.dimension_ = chunks.front().embedding.size();
  require(chunks.empty() || index.dimension_ > 0, ErrorCode::DimensionError, "chunk embedding is empty");
  for (auto& c : chunks) {
    require(c.embedding.size() == index.dimension_, ErrorCode::DimensionError,
            "chunk " + c.chunk_id + " has dimension " + std::to_string(c.embedding.size()) + ", expected " +
                std::to_string(index.dimension_));
    c.embedding = normalized(std::move(c.embedding), ErrorCode::DimensionError);
    const bool inserted = index.by_id_.emplace(c.chunk_id, index.chunks_.size()).second;
    require(inserted, ErrorCode::Conflict, "duplicate chunk id " + c.chunk_id);
    index.chunks_.push_back(std::move(c));
  }
  return index;
}

std::vector<RetrievalHit> VectorIndex::search(std::span<const double> query, std::size_t k) const {
  require(k >= 1, ErrorCode::InvalidArgument, "k must be >= 1");
  if (chunks_.empty()) return {};
  require(query.size() == dimension_, ErrorCode::DimensionError,
          "query has dimension " + std::to_string(query.size()) + ", index has " + std::to_string(dimension_));
  const auto q = normalized(std::vector<double>(query.begin(), query.end()), ErrorCode::DimensionError);
  std::vector<RetrievalHit> hits;
  hits.reserve(chunks_.size());
  for (const auto& c : chunks_) {
    double dot = 0;
    for (std::size_t i = 0; i < dimension_; ++i) dot += q[i] * c.embedding[i];
    hits.push_back({c.chunk_id, std::clamp(dot, -1.0, 1.0), 0});
  }
  const std::size_t n = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(n), hits.end(), hit_before);
  hits.resize(n);
  for (std::size_t i = 0; i < n; ++i) hits[i].rank = i + 1;
  return hits;
}

const KnowledgeChunk* VectorIndex::find(const std::string& chunk_id) const {
  const auto it = by_id_.find(chunk_id);
  return it == by_id_.end() ? nullptr : &chunks_[it->second];
}

const DocumentInfo* VectorIndex::document(const std::string& doc_id) const {
  const auto it = documents_.find(doc_id);
  return it == documents_.end() ? nullptr : &it->second;
}

std::string VectorIndex::digest() const {
  util::Fnv1a h;
  h.update_u64(dimension_);
  for (const auto& c : chunks_) {
    h.update(c.chunk_id);
    h.update(c.doc_id);
    h.update_u64(c.char_range.start);
    h.update_u64(c.char_range.end);
    h.update(c.text);
    for (double x : c.embedding) h.update_f64(x);
  }
  for (const auto& [id, info] : documents_) {
    h.update(id);
    h.update(info.title);
    h.update(to_string(info.source_class));
    h.update(info.provenance_url.value_or(""));
  }
  return util::to_hex(h.digest());
}

void VectorIndex::save(std::ostream& out) const {
  out.write(kMagic, sizeof kMagic);
  util::put_u64(out, kFormatVersion);
  util::put_u64(out, dimension_);
  util::put_u64(out, chunks_.size());
  for (const auto& c : chunks_) {
    util::put_string(out, c.chunk_id);
    util::put_string(out, c.doc_id);
    util::put_u64(out, c.char_range.start);
    util::put_u64(out, c.char_range.end);
    util::put_string(out, c.text);
    for (double x : c.embedding) util::put_f64(out, x);
  }
  util::put_u64(out, documents_.size());
  for (const auto& [id, info] : documents_) {
    util::put_string(out, id);
    util::put_string(out, info.title);
    util::put_u64(out, static_cast<std::uint64_t>(info.source_class));
    util::put_u64(out, info.provenance_url ? 1 : 0);
    if (info.provenance_url) util::put_string(out, *info.provenance_url);
  }
  require(static_cast<bool>(out), ErrorCode::Io, "failed writing index");
}

void VectorIndex::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + path.string());
  save(out);
}

VectorIndex VectorIndex::load(std::istream& in) {
  constexpr auto E = ErrorCode::LayoutError;
  char magic[4] = {};
  in.read(magic, sizeof magic);
  require(in.gcount() == 4 && std::equal(magic, magic + 4, kMagic), E, "not a vector index file");
  require(util::get_u64(in, E) == kFormatVersion, E, "unsupported vector index version");
  const auto dim = util::get_u64(in, E);
  const auto count = util::get_u64(in, E);
  require(dim <= (1U << 20) && count <= (1U << 28), E, "implausible index header");
  std::vector<KnowledgeChunk> chunks(count);
  for (auto& c : chunks) {
    c.chunk_id = util::get_string(in, E);
    c.doc_id = util::get_string(in, E);
    c.char_range.start = util::get_u64(in, E);
    c.char_range.end = util::get_u64(in, E);
    c.text = util::get_string(in, E);
    c.embedding.resize(dim);
    for (double& x : c.embedding) x = util::get_f64(in, E);
  }
  std::map<std::string, DocumentInfo> docs;
  const auto ndocs = util::get_u64(in, E);
  for (std::uint64_t i = 0; i < ndocs; ++i) {
    std::string id = util::get_string(in, E);
    DocumentInfo info;
    info.title = util::get_string(in, E);
    const auto cls = util::get_u64(in, E);
    require(cls <= static_cast<std::uint64_t>(SourceClass::PeerReviewed), E, "bad source class in index");
    info.source_class = static_cast<SourceClass>(cls);
    if (util::get_u64(in, E) != 0) info.provenance_url = util::get_string(in, E);
    docs.emplace(std::move(id), std::move(info));
  }
  // Stored vectors are already unit norm; rebuild without renormalizing so
  // scores stay bit-identical.
  VectorIndex index;
  index.dimension_ = count == 0 ? 0 : dim;
  index.documents_ = std::move(docs);
  for (auto& c : chunks) {
    require(index.by_id_.emplace(c.chunk_id, index.chunks_.size()).second, E, "duplicate chunk id in index file");
    index.chunks_.push_back(std::move(c));
  }
  return index;
}

VectorIndex VectorIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path.string());
  return load(in);
}

VectorIndex build_index(std::span<const KnowledgeDocument> docs, TextEmbedder& embedder, const ChunkConfig& config) {
  std::vector<KnowledgeChunk> chunks;
  std::map<std::string, DocumentInfo> info;
  for (const auto& doc : docs) {
    require(info.emplace(doc.doc_id, DocumentInfo{doc.title, doc.source_class, doc.provenance_url}).second,
            ErrorCode::Conflict, "duplicate doc_id " + doc.doc_id);
    auto part = ingest(doc, embedder, config);
    chunks.insert(chunks.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return VectorIndex::build(std::move(chunks), std::move(info));
}

}  // namespace mealsense::rag

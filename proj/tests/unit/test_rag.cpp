#include <algorithm>
#include <functional>
#include <random>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "mealsense/error.h"
#include "mealsense/rag/grounded.h"

using namespace mealsense;
using namespace mealsense::rag;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::Io;
}

std::string random_text(std::mt19937_64& rng, std::size_t n) {
  static const std::vector<std::string> words{"protein", "fibre", "rice", "apple", "iron",  "sodium",
                                              "grams",   "daily", "intake", "meal", "energy", "kcal"};
  std::string s;
  while (s.size() < n) {
    const auto r = rng() % 40;
    if (r == 0) s += "\n\n";
    else if (r == 1) s += "\n";
    else if (r == 2) s += ". ";
    else if (r == 3) s += std::string(1 + rng() % 1500, 'x');  // long unbroken run
    else s += words[rng() % words.size()] + " ";
  }
  s.resize(n);
  return s;
}

KnowledgeDocument doc(std::string id, std::string body) {
  return {std::move(id), "t", SourceClass::NutrientDatabase, std::move(body), std::nullopt};
}

// Independent top-k: score every chunk, full sort, truncate.
std::vector<RetrievalHit> brute_force(const VectorIndex& index, const std::vector<double>& query, std::size_t k) {
  double n = 0;
  for (double x : query) n += x * x;
  n = std::sqrt(n);
  std::vector<double> q(query);
  for (double& x : q) x /= n;
  std::vector<RetrievalHit> all;
  for (const auto& c : index.chunks()) {
    double dot = 0;
    for (std::size_t i = 0; i < q.size(); ++i) dot += q[i] * c.embedding[i];
    all.push_back({c.chunk_id, std::clamp(dot, -1.0, 1.0), 0});
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.score != b.score ? a.score > b.score : a.chunk_id < b.chunk_id;
  });
  all.resize(std::min(k, all.size()));
  for (std::size_t i = 0; i < all.size(); ++i) all[i].rank = i + 1;
  return all;
}

void check_same(const std::vector<RetrievalHit>& a, const std::vector<RetrievalHit>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].chunk_id == b[i].chunk_id);
    CHECK(a[i].score == b[i].score);
    CHECK(a[i].rank == b[i].rank);
  }
}

std::vector<KnowledgeChunk> random_chunks(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<KnowledgeChunk> chunks;
  for (std::size_t i = 0; i < n; ++i) {
    KnowledgeChunk c;
    c.chunk_id = "c" + std::to_string(100000 + i);
    c.doc_id = "d";
    c.text = "chunk " + std::to_string(i);
    c.embedding.resize(dim);
    for (auto& x : c.embedding) x = g(rng);
    chunks.push_back(std::move(c));
  }
  return chunks;
}

}  // namespace

TEST_CASE("chunking examples") {
  const std::string short_body(100, 'a');
  auto ranges = split_text(short_body);
  REQUIRE(ranges.size() == 1);
  CHECK(ranges[0] == CharRange{0, 100});

  std::mt19937_64 rng(1);
  const std::string body = random_text(rng, 2500);
  ranges = split_text(body, {1000, 200});
  CHECK(ranges.size() >= 3);
  CHECK(reconstruct(body, ranges) == body);

  CHECK(code_of([] { split_text("abc", {10, 10}); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { split_text("abc", {10, 20}); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { split_text("", {}); }) == ErrorCode::EmptyDocument);
}

TEST_CASE("character-level splits share exactly the overlap") {
  const std::string body(2500, 'z');
  const auto ranges = split_text(body, {1000, 200});
  REQUIRE(ranges.size() == 3);
  CHECK(ranges[0] == CharRange{0, 1000});
  CHECK(ranges[1] == CharRange{800, 1800});
  CHECK(ranges[2] == CharRange{1600, 2500});
}

TEST_CASE("paragraphs are preferred split points") {
  const std::string body = std::string(600, 'a') + "\n\n" + std::string(600, 'b');
  const auto ranges = split_text(body, {1000, 200});
  REQUIRE(ranges.size() == 2);
  CHECK(ranges[0] == CharRange{0, 602});
  CHECK(ranges[1] == CharRange{602, 1202});
}

TEST_CASE("chunking properties on random bodies") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t size = 20 + rng() % 300;
    const std::size_t overlap = rng() % size;
    const std::string body = random_text(rng, 1 + rng() % 5000);
    const auto ranges = split_text(body, {size, overlap});
    REQUIRE(!ranges.empty());
    CHECK(ranges.front().start == 0);
    CHECK(ranges.back().end == body.size());
    for (std::size_t i = 0; i < ranges.size(); ++i) {
      CHECK(ranges[i].end - ranges[i].start <= size);
      CHECK(ranges[i].end > ranges[i].start);
      if (i > 0) {
        CHECK(ranges[i].start <= ranges[i - 1].end);
        CHECK(ranges[i - 1].end - ranges[i].start <= overlap);
        CHECK(ranges[i].end > ranges[i - 1].end);
      }
    }
    CHECK(reconstruct(body, ranges) == body);
  }
}

TEST_CASE("utf-8 code points are never split") {
  std::string body;
  for (int i = 0; i < 500; ++i) body += "\xC3\xA9";  // é
  const auto ranges = split_text(body, {101, 11});
  for (const auto& r : ranges) {
    CHECK((static_cast<unsigned char>(body[r.start]) & 0xC0U) != 0x80U);
    if (r.end < body.size()) CHECK((static_cast<unsigned char>(body[r.end]) & 0xC0U) != 0x80U);
  }
  CHECK(reconstruct(body, ranges) == body);
}

TEST_CASE("document file round trip") {
  KnowledgeDocument d{"guide-1", "Sodium guide", SourceClass::GovWebpage, "Line one.\n\nLine two\n", "https://example.org/s"};
  std::stringstream ss;
  write_document(ss, d);
  const auto back = parse_document(ss);
  CHECK(back.doc_id == d.doc_id);
  CHECK(back.title == d.title);
  CHECK(back.source_class == d.source_class);
  CHECK(back.body == d.body);
  CHECK(back.provenance_url == d.provenance_url);
  std::istringstream bad("doc_id: x\nsource_class: Blog\n\nbody");
  CHECK(code_of([&] { parse_document(bad); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("hashing embedder is unit norm and deterministic") {
  HashingTextEmbedder e(64);
  const std::vector<std::string> texts{"Brown rice, 100 g", "...", "brown RICE 100 g"};
  const auto v = e.embed(texts);
  for (const auto& x : v) {
    double n = 0;
    for (double y : x) n += y * y;
    CHECK(std::abs(n - 1) < 1e-12);
  }
  CHECK(v[0] == v[2]);
  CHECK(e.embed(texts) == v);
}

TEST_CASE("index search examples") {
  auto empty = VectorIndex::build({});
  CHECK(empty.size() == 0);
  CHECK(empty.search(std::vector<double>{1, 0}, 3).empty());

  auto one = VectorIndex::build(random_chunks(1, 8, 3));
  const auto hits = one.search(std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8}, 5);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].rank == 1);

  const auto index = VectorIndex::build(random_chunks(50, 8, 4));
  const auto& target = index.chunks()[17];
  const auto self = index.search(target.embedding, 1);
  CHECK(self[0].chunk_id == target.chunk_id);
  CHECK(self[0].score == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(index.search(target.embedding, 500).size() == 50);

  std::vector<KnowledgeChunk> tied = random_chunks(3, 4, 5);
  tied[0].chunk_id = "b";
  tied[1].chunk_id = "a";
  tied[2].chunk_id = "c";
  tied[0].embedding = tied[1].embedding = {1, 0, 0, 0};
  const auto tie_index = VectorIndex::build(tied);
  const auto tie_hits = tie_index.search(std::vector<double>{1, 0, 0, 0}, 2);
  CHECK(tie_hits[0].chunk_id == "a");
  CHECK(tie_hits[1].chunk_id == "b");

  CHECK(code_of([&] { index.search(std::vector<double>{1, 0}, 1); }) == ErrorCode::DimensionError);
  CHECK(code_of([&] { index.search(target.embedding, 0); }) == ErrorCode::InvalidArgument);
  auto mixed = random_chunks(2, 4, 6);
  mixed[1].embedding.push_back(1);
  CHECK(code_of([&] { VectorIndex::build(mixed); }) == ErrorCode::DimensionError);
  auto dup = random_chunks(2, 4, 6);
  dup[1].chunk_id = dup[0].chunk_id;
  CHECK(code_of([&] { VectorIndex::build(dup); }) == ErrorCode::Conflict);
}

TEST_CASE("exact search equals brute force on 10k chunks") {
  const auto index = VectorIndex::build(random_chunks(10000, 16, 7));
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  for (int q = 0; q < 30; ++q) {
    std::vector<double> query(16);
    for (auto& x : query) x = g(rng);
    for (std::size_t k : {1UL, 6UL, 50UL}) check_same(index.search(query, k), brute_force(index, query, k));
  }
}

TEST_CASE("index persistence preserves search results") {
  std::map<std::string, DocumentInfo> info{{"d", {"Table", SourceClass::OfficialReport, "https://example.org"}}};
  const auto index = VectorIndex::build(random_chunks(300, 12, 9), info);
  std::stringstream ss;
  index.save(ss);
  const auto loaded = VectorIndex::load(ss);
  CHECK(loaded.digest() == index.digest());
  CHECK(loaded.document("d")->title == "Table");
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g;
  for (int q = 0; q < 100; ++q) {
    std::vector<double> query(12);
    for (auto& x : query) x = g(rng);
    check_same(loaded.search(query, 6), index.search(query, 6));
  }
  std::stringstream junk("nope");
  CHECK(code_of([&] { VectorIndex::load(junk); }) == ErrorCode::LayoutError);
  const std::string bytes = ss.str();
  std::stringstream cut(bytes.substr(0, bytes.size() - 7));
  CHECK(code_of([&] { VectorIndex::load(cut); }) == ErrorCode::LayoutError);
}

TEST_CASE("grounded answers cite live chunks and surface the needle") {
  std::mt19937_64 rng(11);
  std::vector<KnowledgeDocument> docs;
  for (int i = 0; i < 20; ++i) docs.push_back(doc("doc" + std::to_string(i), random_text(rng, 3000)));
  docs.push_back(doc("needle", "Quinoa zanzibar marmalade contains exactly 42 mg of unobtainium per serving."));
  HashingTextEmbedder embedder;
  const auto index = build_index(docs, embedder, {500, 100});
  EchoLlmClient echo;
  const auto answer = grounded_answer("How much unobtainium is in quinoa zanzibar marmalade?", 6, index, embedder, echo);
  CHECK(answer.answer_text.find("42 mg of unobtainium") != std::string::npos);
  CHECK(!answer.cited_chunk_ids.empty());
  CHECK(answer.cited_chunk_ids.size() <= 6);
  for (const auto& id : answer.cited_chunk_ids) {
    const auto* c = index.find(id);
    REQUIRE(c != nullptr);
    CHECK(index.document(c->doc_id) != nullptr);
  }
  const auto one = grounded_answer("unobtainium", 1, index, embedder, echo);
  CHECK(one.cited_chunk_ids.size() == 1);
  CHECK(one.cited_chunk_ids[0] == "needle#00000");

  const auto empty = VectorIndex::build({});
  CHECK(code_of([&] { grounded_answer("q", 3, empty, embedder, echo); }) == ErrorCode::NoKnowledge);
}

TEST_CASE("citations outside the supplied context are rejected") {
  struct Liar : LlmClient {
    Completion complete(const CompletionRequest&) override { return {"made up", {"nowhere#00001"}}; }
  } liar;
  HashingTextEmbedder embedder;
  const std::vector<KnowledgeDocument> docs{doc("a", "Apples contain fibre.")};
  const auto index = build_index(docs, embedder);
  CHECK(code_of([&] { grounded_answer("fibre", 3, index, embedder, liar); }) == ErrorCode::ProtocolError);
}

TEST_CASE("HTTP embedder and LLM against a local server") {
  httplib::Server server;
  server.Post("/embed", [](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    nlohmann::json vectors = nlohmann::json::array();
    for (const auto& t : body.at("texts")) vectors.push_back({static_cast<double>(t.get<std::string>().size()), 1.0});
    res.set_content(nlohmann::json{{"vectors", vectors}}.dump(), "application/json");
  });
  server.Post("/complete", [](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    std::vector<std::string> cited;
    for (const auto& c : body.at("context_chunks")) cited.push_back(c.at("chunk_id").get<std::string>());
    res.set_content(nlohmann::json{{"answer", "ok"}, {"cited", cited}}.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  const std::string base = "http://127.0.0.1:" + std::to_string(port);
  HttpTextEmbedder embedder({base, "/embed", 2000, ""});
  const std::vector<std::string> texts{"abc", "abcd"};
  const auto v = embedder.embed(texts);
  REQUIRE(v.size() == 2);
  CHECK(v[0][0] == doctest::Approx(3 / std::sqrt(10.0)));
  HttpLlmClient llm({base, "/complete", 2000, ""});
  const std::vector<KnowledgeDocument> docs{doc("a", "Apples contain fibre.")};
  const auto index = build_index(docs, embedder);
  const auto answer = grounded_answer("fibre", 2, index, embedder, llm);
  CHECK(answer.answer_text == "ok");
  CHECK(answer.cited_chunk_ids == std::vector<std::string>{"a#00000"});
  server.stop();
  t.join();
  CHECK(code_of([&] { llm.complete({"p", {}}); }) == ErrorCode::ServiceUnavailable);
}

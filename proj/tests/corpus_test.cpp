#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hopchain/corpus.hpp"
#include "hopchain/errors.hpp"

using namespace hopchain;

namespace {

struct TempDir {
  std::filesystem::path dir;
  TempDir() {
    dir = std::filesystem::temp_directory_path() / "hopchain_corpus_test";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
  }
  ~TempDir() { std::filesystem::remove_all(dir); }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

KnowledgeSource sample_knowledge() {
  KnowledgeSource ks;
  ks.add({"e1", "alpha beta"},
         {"e1",
          {"alpha", "beta", "likes", "gamma", "delta", "it", "sings"},
          {{0, 5}, {5, 7}},
          {{"e1", "e2", 3, 5}}});
  ks.add({"e2", "gamma delta"},
         {"e2", {"gamma", "delta", "owns", "omega"}, {{0, 4}}, {{"e2", "e3", 3, 4}}});
  ks.add({"e3", "omega"}, {"e3", {"omega", "sits", "alone"}, {{0, 3}}, {}});
  return ks;
}

std::vector<QAExample> sample_examples() {
  QAExample a;
  a.id = "x-0";
  a.question = {"who", "likes", "gamma", "delta"};
  a.gold_docs = {"e1", "e2"};
  a.gold_sentences = {{"e1", {0}}, {"e2", {0}}};
  a.answer = "alpha beta";
  a.qtype = QType::bridging;

  QAExample b;
  b.id = "y-0";
  b.question = {"which", "sings", "alpha", "beta", "or", "omega"};
  b.gold_docs = {"e1", "e3"};
  b.gold_sentences = {{"e1", {1}}, {"e3", {0}}};
  b.answer = "alpha beta";
  b.qtype = QType::comparison;
  return {a, b};
}

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  out << body;
}

}  // namespace

TEST_CASE("tokenize lowercases and splits on every non-alphanumeric run") {
  CHECK(tokenize("Alpha, beta!  GAMMA-3") ==
        std::vector<std::string>{"alpha", "beta", "gamma", "3"});
  CHECK(tokenize("") == std::vector<std::string>{});
  CHECK(tokenize("   ") == std::vector<std::string>{});
  CHECK(tokenize("one") == std::vector<std::string>{"one"});
}

TEST_CASE("validate accepts the sample and rejects structural damage") {
  CHECK_NOTHROW(sample_knowledge().validate());

  {
    KnowledgeSource ks;
    ks.add({"e1", "t"}, {"e1", {"a", "b"}, {{0, 2}, {1, 2}}, {}});  // overlapping spans
    CHECK_THROWS_AS(ks.validate(), integrity_error);
  }
  {
    KnowledgeSource ks;
    ks.add({"e1", "t"}, {"e1", {"a", "b"}, {{0, 2}}, {{"e1", "ghost", 0, 1}}});
    CHECK_THROWS_AS(ks.validate(), integrity_error);  // mention target unknown
  }
  {
    KnowledgeSource ks;
    ks.add({"e1", "t"}, {"e1", {"a"}, {{0, 2}}, {}});  // span past the text
    CHECK_THROWS_AS(ks.validate(), integrity_error);
  }
  {
    KnowledgeSource ks;
    ks.add({"e1", ""}, {"e1", {"a"}, {{0, 1}}, {}});  // empty title
    CHECK_THROWS_AS(ks.validate(), integrity_error);
  }
  {
    KnowledgeSource ks;
    ks.add({"e1", "t"}, {"e1", {"a"}, {{0, 1}}, {}});
    CHECK_THROWS_AS(ks.add({"e1", "t"}, {"e1", {"a"}, {{0, 1}}, {}}), integrity_error);
  }
}

TEST_CASE("outbound mentions come back in span order") {
  KnowledgeSource ks = sample_knowledge();
  const auto& ms = outbound_mentions(ks, "e1");
  REQUIRE(ms.size() == 1);
  CHECK(ms[0].target_entity == "e2");
  CHECK(outbound_mentions(ks, "e3").empty());
}

TEST_CASE("corpus and examples survive a serialize/ingest round trip") {
  TempDir tmp;
  KnowledgeSource ks = sample_knowledge();
  std::vector<QAExample> examples = sample_examples();

  serialize_corpus(ks, examples, tmp / "corpus.jsonl", tmp / "qa.jsonl");
  auto [ks2, ex2] = ingest_corpus(tmp / "corpus.jsonl", tmp / "qa.jsonl");

  REQUIRE(ks2.entities().size() == ks.entities().size());
  for (const auto& e : ks.entities()) {
    CHECK(ks2.entity(e.id).title == e.title);
    CHECK(ks2.document(e.id) == ks.document(e.id));
  }
  CHECK(ex2 == examples);

  KnowledgeSource ks3 = ingest_knowledge(tmp / "corpus.jsonl");
  CHECK(ks3.entities().size() == ks.entities().size());
}

TEST_CASE("missing files and malformed lines raise typed errors") {
  TempDir tmp;
  CHECK_THROWS_AS((void)ingest_knowledge(tmp / "nope.jsonl"), io_error);

  write_file(tmp / "bad.jsonl", "{not json\n");
  CHECK_THROWS_AS((void)ingest_knowledge(tmp / "bad.jsonl"), parse_error);

  write_file(tmp / "missing_field.jsonl", R"({"id":"e1","title":"t"})"
                                          "\n");
  CHECK_THROWS_AS((void)ingest_knowledge(tmp / "missing_field.jsonl"), parse_error);
}

TEST_CASE("qa ingestion cross-checks against the corpus") {
  TempDir tmp;
  serialize_knowledge(sample_knowledge(), tmp / "corpus.jsonl");

  // Gold doc not present in the corpus.
  write_file(tmp / "qa_ghost.jsonl",
             R"({"id":"q-0","question":["who"],"gold_docs":["e1","ghost"],)"
             R"("gold_sentences":{"e1":[0]},"answer":"a","qtype":"bridging"})"
             "\n");
  CHECK_THROWS_AS((void)ingest_corpus(tmp / "corpus.jsonl", tmp / "qa_ghost.jsonl"),
                  integrity_error);

  // Sentence index out of range.
  write_file(tmp / "qa_range.jsonl",
             R"({"id":"q-0","question":["who"],"gold_docs":["e1","e2"],)"
             R"("gold_sentences":{"e2":[7]},"answer":"a","qtype":"bridging"})"
             "\n");
  CHECK_THROWS_AS((void)ingest_corpus(tmp / "corpus.jsonl", tmp / "qa_range.jsonl"),
                  integrity_error);

  // gold_sentences naming a non-gold doc.
  write_file(tmp / "qa_nongold.jsonl",
             R"({"id":"q-0","question":["who"],"gold_docs":["e1","e2"],)"
             R"("gold_sentences":{"e3":[0]},"answer":"a","qtype":"bridging"})"
             "\n");
  CHECK_THROWS_AS((void)ingest_corpus(tmp / "corpus.jsonl", tmp / "qa_nongold.jsonl"),
                  integrity_error);

  // Unknown question type string.
  write_file(tmp / "qa_qtype.jsonl",
             R"({"id":"q-0","question":["who"],"gold_docs":["e1","e2"],)"
             R"("gold_sentences":{"e1":[0]},"answer":"a","qtype":"linear"})"
             "\n");
  CHECK_THROWS_AS((void)ingest_corpus(tmp / "corpus.jsonl", tmp / "qa_qtype.jsonl"), parse_error);
}

TEST_CASE("qtype names round-trip") {
  CHECK(to_string(QType::bridging) == "bridging");
  CHECK(to_string(QType::comparison) == "comparison");
  CHECK(qtype_from_string("bridging") == QType::bridging);
  CHECK(qtype_from_string("comparison") == QType::comparison);
  CHECK_THROWS_AS((void)qtype_from_string("other"), parse_error);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <string>
#include <vector>

#include "hopchain/metrics.hpp"
#include "hopchain/result.hpp"

using namespace hopchain;

namespace {

KnowledgeSource fixture_knowledge() {
  KnowledgeSource ks;
  ks.add({"d1", "amber fox"},
         {"d1", {"amber", "fox", "paints", "walls"}, {{0, 2}, {2, 4}}, {}});
  ks.add({"d2", "cobalt wren"},
         {"d2", {"cobalt", "wren", "sings", "amber", "fox"}, {{0, 3}, {3, 5}}, {}});
  ks.add({"d3", "dusty mole"}, {"d3", {"dusty", "mole", "digs"}, {{0, 3}}, {}});
  ks.validate();
  return ks;
}

std::vector<QAExample> fixture_examples() {
  QAExample a;
  a.id = "a-0";
  a.question = {"who", "paints"};
  a.gold_docs = {"d1", "d2"};
  a.gold_sentences = {{"d1", {1}}, {"d2", {0}}};
  a.answer = "amber fox";
  a.qtype = QType::bridging;

  QAExample b;
  b.id = "c-0";
  b.question = {"which", "digs"};
  b.gold_docs = {"d2", "d3"};
  b.gold_sentences = {{"d2", {0}}, {"d3", {0}}};
  b.answer = "dusty mole";
  b.qtype = QType::comparison;
  return {a, b};
}

BeamTrace beam(std::vector<std::string> docs, double score) {
  BeamTrace bt;
  bt.docs = std::move(docs);
  bt.log_score = score;
  bt.finished = true;
  return bt;
}

}  // namespace

TEST_CASE("hand fixture produces the expected percentages") {
  KnowledgeSource ks = fixture_knowledge();
  std::vector<QAExample> examples = fixture_examples();

  // a-0: top beam finds only d1 (answer present in d2's text and d1? The
  // answer "amber fox" appears in d1 itself); second beam has both docs.
  // c-0: top beam has both golds already.
  std::vector<RetrievalResult> results(2);
  results[0].question_id = "a-0";
  results[0].beams = {beam({"d1"}, -0.1), beam({"d1", "d2"}, -0.9)};
  results[1].question_id = "c-0";
  results[1].beams = {beam({"d2", "d3"}, -0.2)};

  // k = 1: a-0 answer "amber fox" is in d1 -> ans hit; all-docs miss.
  //        c-0 answer "dusty mole" in d3 -> ans hit; all-docs hit.
  CHECK(ans_exists(ks, results, examples, 1) == doctest::Approx(100.0));
  CHECK(all_docs_exist(ks, results, examples, 1) == doctest::Approx(50.0));
  // Gold sentences: a-0 has d1/1 and d2/0; top beam covers only d1 -> 1 of 2.
  //                 c-0 has d2/0 and d3/0, both covered -> 2 of 2.
  CHECK(sent_exists(ks, results, examples, 1) == doctest::Approx(75.0));

  // k = 2: a-0's second beam has both golds.
  CHECK(all_docs_exist(ks, results, examples, 2) == doctest::Approx(100.0));
  CHECK(sent_exists(ks, results, examples, 2) == doctest::Approx(100.0));

  MetricsReport report = compute_metrics(ks, results, examples, {1, 2});
  CHECK(report.questions == 2);
  CHECK(report.missing_results == 0);
  CHECK(report.gold_sentence_count == 4);
  CHECK(report.overall.at(1).ans_exists == doctest::Approx(100.0));
  CHECK(report.overall.at(1).all_docs_exist == doctest::Approx(50.0));
  CHECK(report.overall.at(2).all_docs_exist == doctest::Approx(100.0));
  CHECK(report.by_qtype.at("bridging").at(1).all_docs_exist == doctest::Approx(0.0));
  CHECK(report.by_qtype.at("comparison").at(1).all_docs_exist == doctest::Approx(100.0));
  CHECK(report.questions_by_qtype.at("bridging") == 1);
  CHECK(report.questions_by_qtype.at("comparison") == 1);
}

TEST_CASE("questions without results count as failures") {
  KnowledgeSource ks = fixture_knowledge();
  std::vector<QAExample> examples = fixture_examples();
  std::vector<RetrievalResult> results(1);
  results[0].question_id = "c-0";
  results[0].beams = {beam({"d2", "d3"}, -0.2)};

  MetricsReport report = compute_metrics(ks, results, examples, {1});
  CHECK(report.missing_results == 1);
  CHECK(report.overall.at(1).all_docs_exist == doctest::Approx(50.0));
  CHECK(report.overall.at(1).ans_exists == doctest::Approx(50.0));
}

TEST_CASE("answer matching is a case-insensitive token run") {
  KnowledgeSource ks = fixture_knowledge();
  std::vector<QAExample> examples = fixture_examples();
  examples[0].answer = "AMBER Fox";  // tokenization lowercases
  std::vector<RetrievalResult> results(2);
  results[0].question_id = "a-0";
  results[0].beams = {beam({"d1"}, -0.1)};
  results[1].question_id = "c-0";
  results[1].beams = {beam({"d3"}, -0.1)};
  CHECK(ans_exists(ks, results, examples, 1) == doctest::Approx(100.0));

  // "fox paints" spans sentences inside d1 but is still one token run.
  examples[0].answer = "fox paints";
  CHECK(ans_exists(ks, results, examples, 1) == doctest::Approx(100.0));

  // Not present anywhere in the retrieved docs.
  examples[0].answer = "amber mole";
  CHECK(ans_exists(ks, results, examples, 1) == doctest::Approx(50.0));
}

TEST_CASE("metrics never decrease as k grows") {
  KnowledgeSource ks = fixture_knowledge();
  std::vector<QAExample> examples = fixture_examples();
  std::vector<RetrievalResult> results(2);
  results[0].question_id = "a-0";
  results[0].beams = {beam({"d3"}, -0.1), beam({"d1"}, -0.5), beam({"d1", "d2"}, -0.9)};
  results[1].question_id = "c-0";
  results[1].beams = {beam({"d1"}, -0.3), beam({"d2", "d3"}, -0.4)};

  MetricsReport report = compute_metrics(ks, results, examples, {1, 2, 3});
  double prev_ans = -1, prev_sent = -1, prev_all = -1;
  for (int k : report.ks) {
    const MetricRow& row = report.overall.at(k);
    CHECK(row.ans_exists >= prev_ans);
    CHECK(row.sent_exists >= prev_sent);
    CHECK(row.all_docs_exist >= prev_all);
    prev_ans = row.ans_exists;
    prev_sent = row.sent_exists;
    prev_all = row.all_docs_exist;
  }
  CHECK(report.overall.at(3).all_docs_exist == doctest::Approx(100.0));
}

TEST_CASE("renderings are deterministic and carry every cutoff") {
  KnowledgeSource ks = fixture_knowledge();
  std::vector<QAExample> examples = fixture_examples();
  std::vector<RetrievalResult> results(2);
  results[0].question_id = "a-0";
  results[0].beams = {beam({"d1", "d2"}, -0.1)};
  results[1].question_id = "c-0";
  results[1].beams = {beam({"d2", "d3"}, -0.2)};

  MetricsReport report = compute_metrics(ks, results, examples, {1, 5, 8});
  const std::string table = metrics_table(report);
  const std::string js = metrics_json(report);
  CHECK(table == metrics_table(report));
  CHECK(js == metrics_json(report));
  for (const char* needle : {"k=1", "k=5", "k=8"})
    CHECK(table.find(needle) != std::string::npos);
  CHECK(js.find("\"all_docs_exist\"") != std::string::npos);
  CHECK(js.find("\"bridging\"") != std::string::npos);
}

TEST_CASE("results round-trip through the jsonl file format") {
  RetrievalResult r;
  r.question_id = "a-0";
  BeamTrace bt = beam({"d1", "d2"}, -0.25);
  bt.steps = {{HopKind::start, "d1", 0.0, 1.0, 0.9},
              {HopKind::mention, "d2", 0.7, 0.3, 0.8},
              {HopKind::end, "", 0.4, 0.6, 0.95}};
  bt.sentences = {{"d1", {0}}, {"d2", {0, 1}}};
  r.beams = {bt};

  const std::string path =
      (std::filesystem::temp_directory_path() / "hopchain_metrics_results.jsonl").string();
  write_results({r}, path);
  std::vector<RetrievalResult> back = read_results(path);
  std::filesystem::remove(path);
  REQUIRE(back.size() == 1);
  CHECK(back[0] == r);
}

TEST_CASE("hop kind names round-trip") {
  for (HopKind k : {HopKind::start, HopKind::mention, HopKind::unlinked, HopKind::end})
    CHECK(hop_kind_from_string(to_string(k)) == k);
  CHECK_THROWS_AS((void)hop_kind_from_string("sideways"), parse_error);
}

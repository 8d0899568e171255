#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "hopchain/lexindex.hpp"

using namespace hopchain;

namespace {

// Three one-sentence documents with controlled term overlap:
//   d1: apple banana        d2: apple cherry        d3: cherry cherry date
KnowledgeSource overlap_knowledge() {
  KnowledgeSource ks;
  ks.add({"d1", "one"}, {"d1", {"apple", "banana"}, {{0, 2}}, {}});
  ks.add({"d2", "two"}, {"d2", {"apple", "cherry"}, {{0, 2}}, {}});
  ks.add({"d3", "three"}, {"d3", {"cherry", "cherry", "date"}, {{0, 3}}, {}});
  return ks;
}

double idf(double n_docs, double df) { return std::log((n_docs + 1.0) / (df + 1.0)); }

}  // namespace

TEST_CASE("term statistics and weights match the closed form") {
  TfIdfIndex index = build_index(overlap_knowledge());
  CHECK(index.doc_count() == 3);
  CHECK(index.vocab_size() == 4);  // apple banana cherry date

  // Terms are id-ordered alphabetically.
  CHECK(index.term_id("apple") == 0);
  CHECK(index.term_id("banana") == 1);
  CHECK(index.term_id("cherry") == 2);
  CHECK(index.term_id("date") == 3);
  CHECK(index.term_id("unknown") == -1);

  CHECK(index.doc_freq(0) == 2);  // apple in d1, d2
  CHECK(index.doc_freq(1) == 1);
  CHECK(index.doc_freq(2) == 2);
  CHECK(index.doc_freq(3) == 1);

  // d3: tf(cherry) = 2, tf(date) = 1.
  const auto& d3 = index.doc("d3");
  REQUIRE(d3.weights.size() == 2);
  CHECK(d3.weights[0].first == 2);
  CHECK(d3.weights[0].second == doctest::Approx(2.0 * idf(3, 2)));
  CHECK(d3.weights[1].second == doctest::Approx(1.0 * idf(3, 1)));
  const double want_norm = std::hypot(2.0 * idf(3, 2), 1.0 * idf(3, 1));
  CHECK(d3.norm == doctest::Approx(want_norm));
}

TEST_CASE("ranking follows cosine similarity with id tie-breaks") {
  TfIdfIndex index = build_index(overlap_knowledge());

  // "cherry date" matches d3 on both terms, d2 on one, d1 on none.
  std::vector<std::string> top = index.top_n({"cherry", "date"}, 3);
  REQUIRE(top.size() == 3);
  CHECK(top[0] == "d3");
  CHECK(top[1] == "d2");
  CHECK(top[2] == "d1");

  // Hand-check the top score: q = (idf_cherry, idf_date) over shared terms.
  auto scores = index.scores({"cherry", "date"});
  const double qc = idf(3, 2), qd = idf(3, 1);
  const double qnorm = std::hypot(qc, qd);
  const double d3c = 2.0 * idf(3, 2), d3d = idf(3, 1);
  const double want = (qc * d3c + qd * d3d) / (qnorm * std::hypot(d3c, d3d));
  double got = -1;
  for (const auto& [id, s] : scores)
    if (id == "d3") got = s;
  CHECK(got == doctest::Approx(want));

  // "apple" carries the same weight in d1 and d2, but d2's remaining term
  // (cherry, df 2) weighs less than d1's banana (df 1), so d2's norm is
  // smaller and it wins the cosine.
  const double wa = idf(3, 2);
  const double cos_d1 = wa / std::hypot(wa, idf(3, 1));
  const double cos_d2 = wa / std::hypot(wa, idf(3, 2));
  REQUIRE(cos_d2 > cos_d1);
  CHECK(index.top_n({"apple"}, 1) == std::vector<std::string>{"d2"});

  // Repeating a question term doubles its tf on the query side but cannot
  // change a single-term ranking.
  CHECK(index.top_n({"apple", "apple"}, 1) == std::vector<std::string>{"d2"});
}

TEST_CASE("unknown-only questions fall back to id order") {
  TfIdfIndex index = build_index(overlap_knowledge());
  std::vector<std::string> top = index.top_n({"zzz", "yyy"}, 2);
  REQUIRE(top.size() == 2);
  CHECK(top[0] == "d1");
  CHECK(top[1] == "d2");

  CHECK(index.top_n({}, 1) == std::vector<std::string>{"d1"});
  CHECK(index.top_n({"apple"}, 99).size() == 3);
}

TEST_CASE("index persists through its binary sidecar") {
  TfIdfIndex index = build_index(overlap_knowledge());
  const std::string path =
      (std::filesystem::temp_directory_path() / "hopchain_lexindex_test.bin").string();
  index.save(path);
  TfIdfIndex loaded = TfIdfIndex::load(path);
  CHECK(loaded == index);
  CHECK(loaded.top_n({"cherry"}, 1) == index.top_n({"cherry"}, 1));

  // Corrupt the magic header.
  {
    std::filesystem::resize_file(path, 3);
    CHECK_THROWS_AS((void)TfIdfIndex::load(path), parse_error);
  }
  std::remove(path.c_str());
  CHECK_THROWS_AS((void)TfIdfIndex::load(path), io_error);
}

TEST_CASE("free function wrapper matches the member") {
  TfIdfIndex index = build_index(overlap_knowledge());
  CHECK(top_n(index, {"apple"}, 2) == index.top_n({"apple"}, 2));
}

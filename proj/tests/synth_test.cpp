#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "hopchain/corpus.hpp"
#include "hopchain/synth.hpp"

using namespace hopchain;

namespace {

SynthConfig small_config() {
  SynthConfig cfg;
  cfg.entities = 80;
  cfg.per_family = 12;
  cfg.group_size = 3;
  cfg.fanout = 3;
  cfg.min_incoming = 2;
  return cfg;
}

bool contains_run(const std::vector<std::string>& text, const std::vector<std::string>& run) {
  if (run.empty() || run.size() > text.size()) return false;
  for (std::size_t i = 0; i + run.size() <= text.size(); ++i)
    if (std::equal(run.begin(), run.end(), text.begin() + static_cast<std::ptrdiff_t>(i)))
      return true;
  return false;
}

}  // namespace

TEST_CASE("generation is deterministic per seed and sensitive to it") {
  auto [ks1, ex1] = generate_synthetic(small_config(), 7);
  auto [ks2, ex2] = generate_synthetic(small_config(), 7);
  CHECK(ex1 == ex2);
  REQUIRE(ks1.entities().size() == ks2.entities().size());
  for (const auto& e : ks1.entities()) CHECK(ks2.document(e.id) == ks1.document(e.id));

  auto [ks3, ex3] = generate_synthetic(small_config(), 8);
  CHECK(ex3 != ex1);
}

TEST_CASE("the generated corpus passes validation and the size contract") {
  SynthConfig cfg = small_config();
  auto [ks, examples] = generate_synthetic(cfg, 3);
  CHECK_NOTHROW(ks.validate());
  CHECK(static_cast<int>(ks.entities().size()) == cfg.entities);
  CHECK(static_cast<int>(examples.size()) == 3 * cfg.per_family);

  // Ids are family-prefixed and unique.
  std::set<std::string> ids;
  std::map<char, int> family_count;
  for (const auto& ex : examples) {
    REQUIRE(ex.id.size() >= 3);
    CHECK((ex.id[0] == 'a' || ex.id[0] == 'b' || ex.id[0] == 'c'));
    CHECK(ex.id[1] == '-');
    CHECK(ids.insert(ex.id).second);
    ++family_count[ex.id[0]];
  }
  CHECK(family_count['a'] == cfg.per_family);
  CHECK(family_count['b'] == cfg.per_family);
  CHECK(family_count['c'] == cfg.per_family);
}

TEST_CASE("every example has two gold docs, gold sentences, and an in-text answer") {
  auto [ks, examples] = generate_synthetic(small_config(), 3);
  for (const auto& ex : examples) {
    REQUIRE(ex.gold_docs.size() == 2);
    CHECK(ex.gold_docs[0] != ex.gold_docs[1]);
    CHECK_FALSE(ex.question.empty());
    CHECK_FALSE(ex.answer.empty());
    // Sentence labels exist for both gold docs and point at real sentences.
    for (const auto& g : ex.gold_docs) {
      REQUIRE(ks.has(g));
      auto it = ex.gold_sentences.find(g);
      REQUIRE(it != ex.gold_sentences.end());
      CHECK_FALSE(it->second.empty());
      for (int si : it->second) {
        CHECK(si >= 0);
        CHECK(si < static_cast<int>(ks.document(g).sentences.size()));
      }
    }
    // The answer tokens appear verbatim in at least one gold document.
    const std::vector<std::string> answer_tokens = tokenize(ex.answer);
    const bool hit = contains_run(ks.document(ex.gold_docs[0]).text, answer_tokens) ||
                     contains_run(ks.document(ex.gold_docs[1]).text, answer_tokens);
    CHECK(hit);
  }
}

TEST_CASE("bridging examples carry a foothold-to-target mention edge") {
  auto [ks, examples] = generate_synthetic(small_config(), 5);
  for (const auto& ex : examples) {
    if (ex.qtype != QType::bridging) continue;
    const auto& ms = outbound_mentions(ks, ex.gold_docs[0]);
    const bool linked = std::any_of(ms.begin(), ms.end(), [&](const Mention& m) {
      return m.target_entity == ex.gold_docs[1];
    });
    CHECK(linked);
  }
}

TEST_CASE("comparison examples have no mention edge between the golds") {
  auto [ks, examples] = generate_synthetic(small_config(), 5);
  int seen = 0;
  for (const auto& ex : examples) {
    if (ex.qtype != QType::comparison) continue;
    ++seen;
    for (int dir = 0; dir < 2; ++dir) {
      const auto& src = ex.gold_docs[static_cast<std::size_t>(dir)];
      const auto& dst = ex.gold_docs[static_cast<std::size_t>(1 - dir)];
      for (const Mention& m : outbound_mentions(ks, src)) CHECK(m.target_entity != dst);
    }
  }
  CHECK(seen == small_config().per_family);
}

TEST_CASE("fact-required targets have echo documents sharing their fact sentence") {
  SynthConfig cfg = small_config();
  auto [ks, examples] = generate_synthetic(cfg, 11);
  int with_echo = 0;
  for (const auto& ex : examples) {
    if (ex.id[0] != 'b') continue;
    const auto& target = ks.document(ex.gold_docs[1]);
    // The distinguishing fact is the question tail; find it in the target.
    REQUIRE(ex.gold_sentences.count(ex.gold_docs[1]));
    const int fact_sentence = ex.gold_sentences.at(ex.gold_docs[1]).front();
    const auto [fs, fe] = target.sentences[static_cast<std::size_t>(fact_sentence)];
    const std::vector<std::string> fact(target.text.begin() + fs, target.text.begin() + fe);

    // Some other, unlinked document repeats the very same fact wording aside
    // from its own title tokens.
    const std::vector<std::string> tail(fact.begin() + 2, fact.end());
    int echoes = 0;
    for (const auto& e : ks.entities()) {
      if (e.id == ex.gold_docs[1]) continue;
      if (contains_run(ks.document(e.id).text, tail)) ++echoes;
    }
    if (echoes > 0) ++with_echo;
  }
  CHECK(with_echo == cfg.per_family);
}

TEST_CASE("minimum incoming mentions is honored for bridging targets") {
  SynthConfig cfg = small_config();
  auto [ks, examples] = generate_synthetic(cfg, 13);
  std::map<std::string, int> incoming;
  for (const auto& e : ks.entities())
    for (const Mention& m : ks.document(e.id).mentions) ++incoming[m.target_entity];
  for (const auto& ex : examples) {
    if (ex.qtype != QType::bridging) continue;
    CHECK(incoming[ex.gold_docs[1]] >= cfg.min_incoming);
  }
}

TEST_CASE("impossible budgets are rejected") {
  SynthConfig cfg = small_config();
  cfg.entities = 10;  // cannot host 3 x 12 questions
  CHECK_THROWS_AS((void)generate_synthetic(cfg, 1), config_error);
}

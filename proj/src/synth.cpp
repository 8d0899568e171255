#include "hopchain/synth.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "hopchain/rng.hpp"

namespace hopchain {

namespace {

// Relation phrases are single distinctive tokens shared verbatim between the
// document sentence ("it was directed by X") and the question ("who directed
// ..."), so relation matching is lexically learnable from scratch.
const std::vector<std::string> kRelations = {"directed", "produced", "composed", "founded",
                                             "painted",  "designed", "sculpted", "narrated",
                                             "conducted", "sponsored", "curated", "edited"};

// Titles and facts are unique pairs drawn from small token banks; every token
// recurs across many documents and questions, so held-out combinations are
// matchable by token identity rather than by memorized rare embeddings.
const std::vector<std::string> kTitleA = {"harbor", "granite", "willow", "summit", "meadow",
                                          "ember",  "cobalt",  "juniper", "latch",  "marble",
                                          "onyx",   "prairie", "quarry"};
const std::vector<std::string> kTitleB = {"kestrel", "finch", "heron", "otter", "garnet",
                                          "linden",  "sable", "triton", "umber", "vireo",
                                          "wren",    "yarrow", "zephyr", "beacon"};
const std::vector<std::string> kColors = {"crimson", "amber", "viridian", "cerulean",
                                          "ochre",   "indigo", "scarlet", "teal",
                                          "magenta", "ivory",  "russet",  "slate"};
const std::vector<std::string> kObjects = {"lantern", "medal", "charter", "ledger",
                                           "compass", "relic", "tapestry", "goblet",
                                           "sundial", "locket", "quill",   "banner"};
const std::vector<std::string> kIntroNouns = {"film",   "statue", "song",  "bridge",
                                              "novel",  "mural",  "opera", "garden"};
const std::vector<std::string> kFiller = {"quiet", "busy", "remote", "sunny", "foggy",
                                          "windy", "calm", "old",    "small", "green"};

struct Ent {
  std::string id;
  std::string w1, w2;  // title tokens
  std::string noun;    // intro noun
  std::string title() const { return w1 + " " + w2; }
  std::vector<std::string> title_tokens() const { return {w1, w2}; }
};

struct DocBuilder {
  Document d;

  int add_sentence(const std::vector<std::string>& toks) {
    const int start = static_cast<int>(d.text.size());
    d.text.insert(d.text.end(), toks.begin(), toks.end());
    d.sentences.emplace_back(start, static_cast<int>(d.text.size()));
    return static_cast<int>(d.sentences.size()) - 1;
  }

  int add_mention_sentence(const std::vector<std::string>& prefix, const Ent& target,
                           const std::string& target_id,
                           const std::vector<std::string>& suffix = {}) {
    const int start = static_cast<int>(d.text.size());
    d.text.insert(d.text.end(), prefix.begin(), prefix.end());
    const int a0 = static_cast<int>(d.text.size());
    const auto anchor = target.title_tokens();
    d.text.insert(d.text.end(), anchor.begin(), anchor.end());
    const int a1 = static_cast<int>(d.text.size());
    d.text.insert(d.text.end(), suffix.begin(), suffix.end());
    d.sentences.emplace_back(start, static_cast<int>(d.text.size()));
    d.mentions.push_back(Mention{d.entity_id, target_id, a0, a1});
    return static_cast<int>(d.sentences.size()) - 1;
  }
};

std::vector<int> sample_distinct(Rng& rng, int n, int k) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < k; ++i)
    std::swap(idx[static_cast<std::size_t>(i)],
              idx[static_cast<std::size_t>(i) + rng.index(static_cast<std::size_t>(n - i))]);
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

bool contains_run(const std::vector<std::string>& text, const std::vector<std::string>& run) {
  if (run.empty() || run.size() > text.size()) return false;
  for (std::size_t i = 0; i + run.size() <= text.size(); ++i)
    if (std::equal(run.begin(), run.end(), text.begin() + static_cast<std::ptrdiff_t>(i)))
      return true;
  return false;
}

std::string join(const std::vector<std::string>& toks) {
  std::string out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) out.push_back(' ');
    out += toks[i];
  }
  return out;
}

struct Generator {
  SynthConfig cfg;
  Rng rel_rng, fact_rng, score_rng, filler_rng;

  std::vector<Ent> ents;
  std::vector<DocBuilder> docs;

  // construction records for questions and audits
  struct BRec {  // per family-(b) foothold
    int ent = 0;
    int rel = 0;
    std::vector<int> targets;            // entity ordinals
    std::vector<int> mention_sentence;   // aligned with targets
  };
  struct ARec {  // per family-(a) foothold
    int ent = 0;
    std::vector<int> rels, targets, mention_sentence;
  };
  std::vector<BRec> brecs;
  std::vector<ARec> arecs;
  std::vector<int> tg_ents, cp_ents, nz_ents;
  std::vector<int> own_fact_sentence;          // per target index
  std::vector<std::vector<int>> facts_in_doc;  // per target index: fact ids contained
  std::vector<int> cp_scores;

  explicit Generator(const SynthConfig& c, std::uint64_t seed)
      : cfg(c),
        rel_rng(Rng(seed).fork(1)),
        fact_rng(Rng(seed).fork(2)),
        score_rng(Rng(seed).fork(3)),
        filler_rng(Rng(seed).fork(4)) {}

  int new_entity(const std::string& id) {
    const std::size_t o = ents.size();
    const std::size_t cap = kTitleA.size() * kTitleB.size();
    if (o >= cap)
      throw config_error("entities exceed title capacity of " + std::to_string(cap));
    Ent e;
    e.id = id;
    e.w1 = kTitleA[o % kTitleA.size()];
    e.w2 = kTitleB[(o / kTitleA.size()) % kTitleB.size()];
    e.noun = kIntroNouns[o % kIntroNouns.size()];
    ents.push_back(e);
    DocBuilder b;
    b.d.entity_id = id;
    b.add_sentence({e.w1, e.w2, "is", "a", "famous", e.noun});
    docs.push_back(std::move(b));
    return static_cast<int>(o);
  }

  std::vector<std::string> fact_tokens(int fact_id) const {
    const int cap = static_cast<int>(kColors.size() * kObjects.size());
    if (fact_id >= cap)
      throw config_error("per_family exceeds fact capacity of " + std::to_string(cap));
    return {kColors[static_cast<std::size_t>(fact_id) % kColors.size()],
            kObjects[(static_cast<std::size_t>(fact_id) / kColors.size()) % kObjects.size()]};
  }

  std::vector<std::string> fact_sentence(int fact_id) const {
    auto f = fact_tokens(fact_id);
    return {"it", "keeps", "the", f[0], f[1]};
  }
};

}  // namespace

std::pair<KnowledgeSource, std::vector<QAExample>> generate_synthetic(const SynthConfig& cfg,
                                                                      std::uint64_t seed) {
  if (cfg.entities < 4) throw config_error("need at least 4 entities");
  if (cfg.per_family < 1) throw config_error("per_family must be at least 1");
  if (cfg.group_size < 2 || cfg.fanout < 2)
    throw config_error("group_size and fanout must be at least 2");
  if (cfg.fanout > static_cast<int>(kRelations.size()))
    throw config_error("fanout exceeds the relation bank of " +
                       std::to_string(kRelations.size()));
  if (cfg.min_incoming < 0) throw config_error("min_incoming must be non-negative");

  Generator gen(cfg, seed);
  const int P = cfg.per_family, g = cfg.group_size, f = cfg.fanout;
  const int nb = (P + g - 1) / g;
  const int na = (P + f - 1) / f;
  const int nt = nb * g;
  const int ncomp = (P + 1) / 2 + 1;
  const int regular_need = nb + na + nt + ncomp;
  const bool compact = regular_need > cfg.entities;
  if (compact && P > 2)
    throw config_error("entities too small: need at least " + std::to_string(regular_need) +
                       " for per_family " + std::to_string(P));

  std::vector<QAExample> examples;

  if (!compact) {
    // Entity blocks: (b) footholds, (a) footholds, targets, comparison, noise.
    for (int i = 0; i < nb; ++i) {
      Generator::BRec r;
      r.ent = gen.new_entity("fb" + std::to_string(i));
      r.rel = static_cast<int>(gen.rel_rng.index(kRelations.size()));
      gen.brecs.push_back(r);
    }
    for (int i = 0; i < na; ++i) {
      Generator::ARec r;
      r.ent = gen.new_entity("fa" + std::to_string(i));
      r.rels = sample_distinct(gen.rel_rng, static_cast<int>(kRelations.size()), f);
      gen.arecs.push_back(r);
    }
    for (int j = 0; j < nt; ++j) gen.tg_ents.push_back(gen.new_entity("tg" + std::to_string(j)));
    for (int i = 0; i < ncomp; ++i) gen.cp_ents.push_back(gen.new_entity("cp" + std::to_string(i)));
    for (int i = 0; i < cfg.entities - regular_need; ++i)
      gen.nz_ents.push_back(gen.new_entity("nz" + std::to_string(i)));

    // (b) footholds: group_size same-relation mentions to consecutive targets.
    for (int i = 0; i < nb; ++i) {
      auto& r = gen.brecs[static_cast<std::size_t>(i)];
      for (int m = 0; m < g; ++m) {
        const int tj = i * g + m;
        const int te = gen.tg_ents[static_cast<std::size_t>(tj)];
        r.targets.push_back(te);
        r.mention_sentence.push_back(gen.docs[static_cast<std::size_t>(r.ent)].add_mention_sentence(
            {"it", "was", kRelations[static_cast<std::size_t>(r.rel)], "by"},
            gen.ents[static_cast<std::size_t>(te)], gen.ents[static_cast<std::size_t>(te)].id));
      }
    }

    // (a) footholds: fanout distinct-relation mentions spread over the pool.
    for (int i = 0; i < na; ++i) {
      auto& r = gen.arecs[static_cast<std::size_t>(i)];
      for (int m = 0; m < f; ++m) {
        const int tj = (i * f + m) % nt;
        const int te = gen.tg_ents[static_cast<std::size_t>(tj)];
        r.targets.push_back(te);
        r.mention_sentence.push_back(gen.docs[static_cast<std::size_t>(r.ent)].add_mention_sentence(
            {"it", "was", kRelations[static_cast<std::size_t>(r.rels[static_cast<std::size_t>(m)])],
             "by"},
            gen.ents[static_cast<std::size_t>(te)], gen.ents[static_cast<std::size_t>(te)].id));
      }
    }

    // Target documents: one fact of their own plus echoes of other targets'
    // facts, placed outside the echoed fact's mention group so only the
    // mention edge separates gold from echo. Sentence order is shuffled so
    // position reveals nothing.
    gen.own_fact_sentence.assign(static_cast<std::size_t>(nt), -1);
    gen.facts_in_doc.assign(static_cast<std::size_t>(nt), {});
    for (int j = 0; j < nt; ++j) {
      auto& contained = gen.facts_in_doc[static_cast<std::size_t>(j)];
      contained.push_back(j);
      if (nb >= 2) contained.push_back((j - g + nt) % nt);
      if (nb >= 3) contained.push_back((j - 2 * g + nt) % nt);
      gen.fact_rng.shuffle(contained);
      for (int fact : contained) {
        const int s = gen.docs[static_cast<std::size_t>(gen.tg_ents[static_cast<std::size_t>(j)])]
                          .add_sentence(gen.fact_sentence(fact));
        if (fact == j) gen.own_fact_sentence[static_cast<std::size_t>(j)] = s;
      }
    }

    // Comparison chain with pairwise-distinct scores.
    gen.cp_scores.resize(static_cast<std::size_t>(ncomp));
    for (int i = 0; i < ncomp; ++i) gen.cp_scores[static_cast<std::size_t>(i)] = 10 + i;
    gen.score_rng.shuffle(gen.cp_scores);
    for (int i = 0; i < ncomp; ++i)
      gen.docs[static_cast<std::size_t>(gen.cp_ents[static_cast<std::size_t>(i)])].add_sentence(
          {"it", "scored", std::to_string(gen.cp_scores[static_cast<std::size_t>(i)]), "points",
           "in", "the", "survey"});

    for (int e : gen.nz_ents)
      gen.docs[static_cast<std::size_t>(e)].add_sentence(
          {"the", "area", "near", gen.ents[static_cast<std::size_t>(e)].w2, "stays",
           kFiller[gen.filler_rng.index(kFiller.size())]});

    // Questions.
    for (int q = 0; q < P; ++q) {
      const auto& r = gen.arecs[static_cast<std::size_t>(q / f)];
      const std::size_t m = static_cast<std::size_t>(q % f);
      const Ent& fe = gen.ents[static_cast<std::size_t>(r.ent)];
      const Ent& te = gen.ents[static_cast<std::size_t>(r.targets[m])];
      QAExample ex;
      ex.id = "a-" + std::to_string(q);
      ex.question = {"who", kRelations[static_cast<std::size_t>(r.rels[m])], "the", fe.noun,
                     fe.w1, fe.w2};
      ex.gold_docs = {fe.id, te.id};
      ex.gold_sentences[fe.id] = {r.mention_sentence[m]};
      ex.gold_sentences[te.id] = {0};
      ex.answer = te.title();
      ex.qtype = QType::bridging;
      examples.push_back(std::move(ex));
    }
    for (int q = 0; q < P; ++q) {
      const auto& r = gen.brecs[static_cast<std::size_t>(q / g)];
      const std::size_t m = static_cast<std::size_t>(q % g);
      const Ent& fe = gen.ents[static_cast<std::size_t>(r.ent)];
      const Ent& te = gen.ents[static_cast<std::size_t>(r.targets[m])];
      const auto fact = gen.fact_tokens(q);
      QAExample ex;
      ex.id = "b-" + std::to_string(q);
      ex.question = {"who", kRelations[static_cast<std::size_t>(r.rel)],
                     "the", fe.noun,
                     fe.w1,  fe.w2,
                     "and", "keeps",
                     "the", fact[0],
                     fact[1]};
      ex.gold_docs = {fe.id, te.id};
      ex.gold_sentences[fe.id] = {r.mention_sentence[m]};
      ex.gold_sentences[te.id] = {gen.own_fact_sentence[static_cast<std::size_t>(q)]};
      ex.answer = te.title();
      ex.qtype = QType::bridging;
      examples.push_back(std::move(ex));
    }
    for (int q = 0; q < P; ++q) {
      const int p = q / 2;
      const bool higher = (q % 2) == 0;
      const int ia = gen.cp_ents[static_cast<std::size_t>(p)];
      const int ib = gen.cp_ents[static_cast<std::size_t>(p + 1)];
      const Ent& ea = gen.ents[static_cast<std::size_t>(ia)];
      const Ent& eb = gen.ents[static_cast<std::size_t>(ib)];
      const int sa = gen.cp_scores[static_cast<std::size_t>(p)];
      const int sb = gen.cp_scores[static_cast<std::size_t>(p + 1)];
      QAExample ex;
      ex.id = "c-" + std::to_string(q);
      ex.question = {"which", "of", ea.w1, ea.w2, "and", eb.w1, eb.w2, "scored",
                     higher ? "higher" : "lower", "points"};
      ex.gold_docs = {ea.id, eb.id};
      ex.gold_sentences[ea.id] = {1};
      ex.gold_sentences[eb.id] = {1};
      ex.answer = (higher == (sa > sb)) ? ea.title() : eb.title();
      ex.qtype = QType::comparison;
      examples.push_back(std::move(ex));
    }
  } else {
    // Compact layout for tiny corpora: one foothold carries both the
    // distinct-relation mentions (family a) and a same-relation group
    // (family b); the two targets double as the comparison pair.
    const int ef = gen.new_entity("fb0");
    gen.tg_ents = {gen.new_entity("tg0"), gen.new_entity("tg1")};
    for (int i = 0; i < cfg.entities - 3; ++i)
      gen.nz_ents.push_back(gen.new_entity("nz" + std::to_string(i)));

    const auto rels = sample_distinct(gen.rel_rng, static_cast<int>(kRelations.size()), 3);
    Generator::ARec ar;
    ar.ent = ef;
    Generator::BRec br;
    br.ent = ef;
    br.rel = rels[2];
    for (int m = 0; m < 2; ++m) {
      const int te = gen.tg_ents[static_cast<std::size_t>(m)];
      ar.rels.push_back(rels[static_cast<std::size_t>(m)]);
      ar.targets.push_back(te);
      ar.mention_sentence.push_back(gen.docs[static_cast<std::size_t>(ef)].add_mention_sentence(
          {"it", "was", kRelations[static_cast<std::size_t>(rels[static_cast<std::size_t>(m)])],
           "by"},
          gen.ents[static_cast<std::size_t>(te)], gen.ents[static_cast<std::size_t>(te)].id));
    }
    for (int m = 0; m < 2; ++m) {
      const int te = gen.tg_ents[static_cast<std::size_t>(m)];
      br.targets.push_back(te);
      br.mention_sentence.push_back(gen.docs[static_cast<std::size_t>(ef)].add_mention_sentence(
          {"it", "was", kRelations[static_cast<std::size_t>(rels[2])], "by"},
          gen.ents[static_cast<std::size_t>(te)], gen.ents[static_cast<std::size_t>(te)].id));
    }
    gen.arecs.push_back(ar);
    gen.brecs.push_back(br);

    gen.own_fact_sentence.assign(2, -1);
    gen.facts_in_doc.assign(2, {});
    for (int j = 0; j < 2; ++j) {
      gen.facts_in_doc[static_cast<std::size_t>(j)] = {j};
      gen.own_fact_sentence[static_cast<std::size_t>(j)] =
          gen.docs[static_cast<std::size_t>(gen.tg_ents[static_cast<std::size_t>(j)])].add_sentence(
              gen.fact_sentence(j));
    }
    gen.cp_scores = {10, 11};
    gen.score_rng.shuffle(gen.cp_scores);
    for (int j = 0; j < 2; ++j)
      gen.docs[static_cast<std::size_t>(gen.tg_ents[static_cast<std::size_t>(j)])].add_sentence(
          {"it", "scored", std::to_string(gen.cp_scores[static_cast<std::size_t>(j)]), "points",
           "in", "the", "survey"});
    for (int e : gen.nz_ents)
      gen.docs[static_cast<std::size_t>(e)].add_sentence(
          {"the", "area", "near", gen.ents[static_cast<std::size_t>(e)].w2, "stays",
           kFiller[gen.filler_rng.index(kFiller.size())]});

    const Ent& fe = gen.ents[static_cast<std::size_t>(ef)];
    for (int q = 0; q < P; ++q) {
      const Ent& te = gen.ents[static_cast<std::size_t>(gen.tg_ents[static_cast<std::size_t>(q)])];
      QAExample ex;
      ex.id = "a-" + std::to_string(q);
      ex.question = {
          "who", kRelations[static_cast<std::size_t>(rels[static_cast<std::size_t>(q)])],
          "the", fe.noun,
          fe.w1, fe.w2};
      ex.gold_docs = {fe.id, te.id};
      ex.gold_sentences[fe.id] = {ar.mention_sentence[static_cast<std::size_t>(q)]};
      ex.gold_sentences[te.id] = {0};
      ex.answer = te.title();
      ex.qtype = QType::bridging;
      examples.push_back(std::move(ex));
    }
    for (int q = 0; q < P; ++q) {
      const Ent& te = gen.ents[static_cast<std::size_t>(gen.tg_ents[static_cast<std::size_t>(q)])];
      const auto fact = gen.fact_tokens(q);
      QAExample ex;
      ex.id = "b-" + std::to_string(q);
      ex.question = {"who", kRelations[static_cast<std::size_t>(rels[2])],
                     "the", fe.noun,
                     fe.w1,  fe.w2,
                     "and", "keeps",
                     "the", fact[0],
                     fact[1]};
      ex.gold_docs = {fe.id, te.id};
      ex.gold_sentences[fe.id] = {br.mention_sentence[static_cast<std::size_t>(q)]};
      ex.gold_sentences[te.id] = {gen.own_fact_sentence[static_cast<std::size_t>(q)]};
      ex.answer = te.title();
      ex.qtype = QType::bridging;
      examples.push_back(std::move(ex));
    }
    const Ent& ea = gen.ents[static_cast<std::size_t>(gen.tg_ents[0])];
    const Ent& eb = gen.ents[static_cast<std::size_t>(gen.tg_ents[1])];
    for (int q = 0; q < P; ++q) {
      const bool higher = (q % 2) == 0;
      QAExample ex;
      ex.id = "c-" + std::to_string(q);
      ex.question = {"which", "of", ea.w1, ea.w2, "and", eb.w1, eb.w2, "scored",
                     higher ? "higher" : "lower", "points"};
      ex.gold_docs = {ea.id, eb.id};
      ex.gold_sentences[ea.id] = {2};
      ex.gold_sentences[eb.id] = {2};
      ex.answer = (higher == (gen.cp_scores[0] > gen.cp_scores[1])) ? ea.title() : eb.title();
      ex.qtype = QType::comparison;
      examples.push_back(std::move(ex));
    }
    gen.cp_ents = gen.tg_ents;  // the comparison pair, for the audits below
  }

  // Donor mentions: pad incoming mention contexts of bridging gold targets up
  // to cfg.min_incoming. Each donor sentence carries a unique slot token so no
  // two contexts for the same target are identical.
  if (cfg.min_incoming > 0) {
    std::set<int> gold_targets;
    for (const auto& ex : examples) {
      if (ex.id[0] == 'c') continue;
      for (std::size_t j = 0; j < gen.ents.size(); ++j)
        if (gen.ents[j].id == ex.gold_docs[1]) gold_targets.insert(static_cast<int>(j));
    }
    if (gen.nz_ents.empty())
      throw config_error("min_incoming padding needs spare entities beyond the layout minimum");
    std::map<int, int> incoming;
    for (const auto& b : gen.docs)
      for (const auto& m : b.d.mentions)
        for (int t : gold_targets)
          if (gen.ents[static_cast<std::size_t>(t)].id == m.target_entity) ++incoming[t];
    int slot = 0, donor = 0;
    for (int t : gold_targets) {
      for (int need = cfg.min_incoming - incoming[t]; need > 0; --need) {
        DocBuilder& nb_doc =
            gen.docs[static_cast<std::size_t>(gen.nz_ents[static_cast<std::size_t>(
                donor++ % static_cast<int>(gen.nz_ents.size()))])];
        nb_doc.add_mention_sentence({"it", "also", "lists"}, gen.ents[static_cast<std::size_t>(t)],
                                    gen.ents[static_cast<std::size_t>(t)].id,
                                    {"in", "slot", "s" + std::to_string(slot++)});
      }
    }
  }

  KnowledgeSource ks;
  for (std::size_t i = 0; i < gen.ents.size(); ++i)
    ks.add(Entity{gen.ents[i].id, gen.ents[i].title()}, std::move(gen.docs[i].d));
  ks.validate();

  // ---- generator self-audits (construction bugs, not user errors) ----------

  // (a): the gold relation occurs exactly once among its foothold's mentions.
  for (const auto& r : gen.arecs) {
    std::map<int, int> uses;
    for (int rel : r.rels) ++uses[rel];
    for (int rel : r.rels)
      if (uses[rel] != 1) throw contract_error("audit: family-(a) relation not unique");
  }
  // (b): at least two same-relation mentions with distinct targets.
  for (const auto& r : gen.brecs) {
    std::set<int> distinct(r.targets.begin(), r.targets.end());
    if (r.targets.size() < 2 || distinct.size() != r.targets.size())
      throw contract_error("audit: family-(b) group lacks distinct same-relation targets");
  }
  // (b): each fact bigram occurs in exactly the gold doc and its echo docs.
  for (std::size_t j = 0; j < gen.facts_in_doc.size(); ++j) {
    const auto fact = gen.fact_tokens(static_cast<int>(j));
    std::set<std::string> expect;
    for (std::size_t k = 0; k < gen.facts_in_doc.size(); ++k)
      for (int contained : gen.facts_in_doc[k])
        if (contained == static_cast<int>(j))
          expect.insert(gen.ents[static_cast<std::size_t>(gen.tg_ents[k])].id);
    for (std::size_t i = 0; i < ks.size(); ++i) {
      const bool has = contains_run(ks.documents()[i].text, fact);
      const bool expected = expect.count(ks.entities()[i].id) > 0;
      if (has != expected) throw contract_error("audit: fact placement mismatch");
    }
  }
  // (c): no mention edge in either direction inside a comparison pair.
  for (const auto& ex : examples) {
    if (ex.qtype != QType::comparison) continue;
    for (const auto& doc_id : ex.gold_docs)
      for (const auto& m : ks.document(doc_id).mentions)
        if (m.target_entity == ex.gold_docs[0] || m.target_entity == ex.gold_docs[1])
          throw contract_error("audit: mention edge inside a comparison pair");
  }
  // Every answer is a contiguous token run in some gold document.
  for (const auto& ex : examples) {
    const auto toks = tokenize(ex.answer);
    bool found = false;
    for (const auto& doc_id : ex.gold_docs) found |= contains_run(ks.document(doc_id).text, toks);
    if (!found) throw contract_error("audit: answer not contained in gold docs");
  }
  // min_incoming reached.
  if (cfg.min_incoming > 0) {
    for (const auto& ex : examples) {
      if (ex.qtype == QType::comparison) continue;
      int count = 0;
      for (const auto& d : ks.documents())
        for (const auto& m : d.mentions)
          if (m.target_entity == ex.gold_docs[1]) ++count;
      if (count < cfg.min_incoming)
        throw contract_error("audit: incoming mention contexts below min_incoming");
    }
  }

  return {std::move(ks), std::move(examples)};
}

}  // namespace hopchain

#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "hopchain/corpus.hpp"
#include "hopchain/encoder.hpp"
#include "hopchain/hopspace.hpp"
#include "hopchain/lexindex.hpp"
#include "hopchain/metrics.hpp"
#include "hopchain/model.hpp"
#include "hopchain/result.hpp"
#include "hopchain/retriever.hpp"
#include "hopchain/rng.hpp"
#include "hopchain/trainer.hpp"

// Analysis layer: fusion-weight averages over chosen hops, the distracted
// mention-selection probe, ablation runs, and the deterministic data split
// they share.

namespace hopchain {

// ---- fusion-weight report ----------------------------------------------------

struct WeightRow {
  double mean_w_m = 0.0;
  double mean_w_u = 0.0;
  int count = 0;
};

/// Mean fusion weights of the best beam's second-step chosen hop, split by
/// question type. Questions without a result or with a best beam shorter than
/// two steps are skipped (counted).
struct WeightReport {
  std::map<std::string, WeightRow> by_qtype;
  int skipped = 0;
};

WeightReport weight_report(const std::vector<RetrievalResult>& results,
                           const std::vector<QAExample>& examples);

std::string weight_report_json(const WeightReport& report);

// ---- deterministic split -----------------------------------------------------

struct ExampleSplit {
  std::vector<QAExample> train, dev, test;
};

/// Shuffles within groups (default group: question-id prefix before '-') and
/// carves off the dev and test fractions per group, so every group is
/// represented in every part. Deterministic per seed.
ExampleSplit split_examples(const std::vector<QAExample>& examples, double dev_frac,
                            double test_frac, std::uint64_t seed,
                            const std::function<std::string(const QAExample&)>& group_of = {});

// ---- distracted mention-selection probe ---------------------------------------

struct ProbeCase {
  std::string question_id;
  int distractors = 0;
  bool won = false;        // gold mention strictly outscored every distractor
  double gold_score = 0.0;
  double best_other = 0.0; // highest distractor score (0 when none)
};

struct ProbeReport {
  double accuracy = 0.0;        // percent over evaluated questions
  double avg_distractors = 0.0; // over evaluated questions
  int evaluated = 0;
  int excluded = 0;             // zero-distractor questions
  int ineligible = 0;           // no gold mention hop to probe
  std::vector<ProbeCase> cases; // evaluated questions, input order
};

std::string probe_report_json(const ProbeReport& report);

/// For each bridging question whose gold chain hops through a mention: pit
/// that mention against every other mention of the same target entity
/// anywhere in the knowledge source, scoring with the mention embedding only
/// (document contribution zeroed) under the teacher-forced state after the
/// first gold hop. Strict argmax; ties lose. Zero-distractor questions are
/// excluded from the denominator.
template <class Scalar>
ProbeReport probe_distracted(const ModelParams<Scalar>& params, const KnowledgeSource& ks,
                             const std::vector<QAExample>& examples) {
  namespace ad = hopchain::ad;
  using V = ad::Value<Scalar>;
  ProbeReport report;
  long long distractor_sum = 0;
  int wins = 0;
  for (const QAExample& ex : examples) {
    if (ex.qtype != QType::bridging) continue;
    const auto sequences = derive_gold_hop_sequence(ex, ks);
    const std::vector<Hop>* gold_seq = nullptr;
    for (const auto& seq : sequences)
      if (seq.size() >= 2 && seq[1].kind == HopKind::mention) {
        gold_seq = &seq;
        break;
      }
    if (gold_seq == nullptr) {
      ++report.ineligible;
      continue;
    }
    const Hop& gold_hop = (*gold_seq)[1];

    std::vector<std::pair<std::string, int>> candidates;  // (source doc, mention index)
    for (const Document& doc : ks.documents())
      for (std::size_t mi = 0; mi < doc.mentions.size(); ++mi)
        if (doc.mentions[mi].target_entity == gold_hop.target &&
            !(doc.entity_id == gold_hop.source && static_cast<int>(mi) == gold_hop.mention_index))
          candidates.emplace_back(doc.entity_id, static_cast<int>(mi));
    if (candidates.empty()) {
      ++report.excluded;
      continue;
    }

    ad::Tape<Scalar> tape;
    EncoderCache<Scalar> cache(tape, params, ks, ex.question);
    V h = tape.param(params.store, "h_s");
    HopEncoding<Scalar> first = encode_hop(cache, (*gold_seq)[0], h, FusionMode::full);
    h = advance(tape, params.store, h, first.vec);

    V wv = tape.param(params.store, "fuse.wv");
    const auto mention_score = [&](const std::string& source, int mi) {
      const auto& entry = cache.get(source);
      auto it = entry.out.mentions.find(mi);
      V m = it != entry.out.mentions.end() ? it->second : tape.param(params.store, "m_p");
      return static_cast<double>(ad::dot(h, ad::matmul(wv, m)).scalar());
    };

    ProbeCase pc{ex.id, static_cast<int>(candidates.size()), true,
                 mention_score(gold_hop.source, gold_hop.mention_index), 0.0};
    bool first_other = true;
    for (const auto& [src, mi] : candidates) {
      const double s = mention_score(src, mi);
      if (first_other || s > pc.best_other) pc.best_other = s;
      first_other = false;
      if (s >= pc.gold_score) pc.won = false;
    }
    wins += pc.won ? 1 : 0;
    distractor_sum += pc.distractors;
    ++report.evaluated;
    report.cases.push_back(std::move(pc));
  }
  if (report.evaluated > 0) {
    report.accuracy = 100.0 * static_cast<double>(wins) / static_cast<double>(report.evaluated);
    report.avg_distractors =
        static_cast<double>(distractor_sum) / static_cast<double>(report.evaluated);
  }
  return report;
}

// ---- ablations -----------------------------------------------------------------

enum class AblationMode { full, no_structured, no_weighting, no_sentence };

std::string to_string(AblationMode m);
AblationMode ablation_mode_from_string(const std::string& s);

template <class Scalar>
struct AblationOutcome {
  AblationMode mode = AblationMode::full;
  TrainOutput<Scalar> trained;
  std::vector<RetrievalResult> results;  // on the evaluation set
  MetricsReport report;
};

/// Trains from scratch under the mode's modification (fixed fusion weights or
/// dropped sentence loss) and evaluates on `eval_set`. Uses the same
/// parameter-init and training seeds as the unmodified run so outcomes are
/// comparable.
template <class Scalar>
AblationOutcome<Scalar> run_ablation(AblationMode mode, TrainConfig cfg, const ModelConfig& mc,
                                     std::uint64_t init_seed,
                                     const std::vector<QAExample>& train_set,
                                     const std::vector<QAExample>& dev_set,
                                     const std::vector<QAExample>& eval_set,
                                     const KnowledgeSource& ks, const TfIdfIndex& index) {
  switch (mode) {
    case AblationMode::full:
      cfg.fusion = FusionMode::full;
      break;
    case AblationMode::no_structured:
      cfg.fusion = FusionMode::no_structured;
      break;
    case AblationMode::no_weighting:
      cfg.fusion = FusionMode::no_weighting;
      break;
    case AblationMode::no_sentence:
      cfg.fusion = FusionMode::full;
      cfg.sentence_loss = false;
      break;
  }
  std::vector<QAExample> vocab_examples = train_set;
  vocab_examples.insert(vocab_examples.end(), dev_set.begin(), dev_set.end());
  vocab_examples.insert(vocab_examples.end(), eval_set.begin(), eval_set.end());
  Vocab vocab = Vocab::build(ks, vocab_examples);
  ModelParams<Scalar> params = init_params<Scalar>(mc, std::move(vocab), init_seed);
  AblationOutcome<Scalar> out;
  out.mode = mode;
  out.trained = train(cfg, std::move(params), train_set, dev_set, ks, index);
  RetrieveOptions opts = cfg.retrieve;
  opts.fusion = cfg.fusion;
  out.results.reserve(eval_set.size());
  for (const QAExample& ex : eval_set)
    out.results.push_back(beam_search(out.trained.params, ks, index, ex.id, ex.question, opts));
  out.report = compute_metrics(ks, out.results, eval_set);
  return out;
}

}  // namespace hopchain

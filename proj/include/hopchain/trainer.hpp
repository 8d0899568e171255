#pragma once

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hopchain/encoder.hpp"
#include "hopchain/hopspace.hpp"
#include "hopchain/lexindex.hpp"
#include "hopchain/metrics.hpp"
#include "hopchain/model.hpp"
#include "hopchain/retriever.hpp"
#include "hopchain/rng.hpp"
#include "hopchain/tape.hpp"

// Supervision: gold hop sequences are derived from the annotated document
// pair, negative sequences are sampled lexical/graph traversals, and both BCE
// objectives (document selection + supporting sentences) are optimized
// end-to-end with teacher forcing.

namespace hopchain {

struct TrainConfig {
  double lr = 3e-3;
  double weight_decay = 0.0;
  int lr_drop_epoch = 0;        // 0 disables the single step-decay
  double lr_drop_factor = 0.1;  // multiplier applied at lr_drop_epoch
  int batch_size = 8;
  int epochs = 30;
  int neg_len = 3;             // documents per negative traversal
  int negs_per_question = 4;   // negative traversals sampled per question
  int top_question = 8;        // traversal start points: lexical top-n for the question
  int top_per_gold = 4;        //   ... and per gold document
  std::uint64_t seed = 1;
  bool sentence_loss = true;
  FusionMode fusion = FusionMode::full;
  RetrieveOptions retrieve;    // used for the per-epoch dev evaluation

  /// Hyperparameters sized for a from-scratch 64-dim model on a small corpus.
  static TrainConfig desk() { return TrainConfig{}; }

  /// Hyperparameters matching the reference large-scale recipe.
  static TrainConfig full() {
    TrainConfig cfg;
    cfg.lr = 3e-5;
    cfg.batch_size = 16;
    cfg.epochs = 3;
    cfg.top_question = 40;
    cfg.top_per_gold = 10;
    cfg.retrieve.pool_size = 500;
    return cfg;
  }

  void validate() const {
    if (lr < 0) throw config_error("learning rate must be non-negative");
    if (weight_decay < 0) throw config_error("weight decay must be non-negative");
    if (lr_drop_epoch < 0 || lr_drop_factor <= 0 || lr_drop_factor > 1)
      throw config_error("lr drop needs epoch >= 0 and factor in (0, 1]");
    if (batch_size < 1 || epochs < 0 || neg_len < 1 || negs_per_question < 0 ||
        top_question < 1 || top_per_gold < 0)
      throw config_error("train sizes must be positive");
    retrieve.validate();
  }
};

/// Gold hop sequences for a two-document example. If exactly one gold doc
/// mentions the other, the mentioning doc comes first and the second hop
/// carries that mention; mutual or absent mentions yield one sequence per
/// order (with the direction's mention attached when it exists). Comparison
/// questions always yield both orders with unlinked hops. Every sequence ends
/// with the end hop.
inline std::vector<std::vector<Hop>> derive_gold_hop_sequence(const QAExample& ex,
                                                              const KnowledgeSource& ks) {
  if (ex.gold_docs.size() != 2)
    throw contract_error("gold sequences need exactly two gold docs, got " +
                         std::to_string(ex.gold_docs.size()) + " for " + ex.id);
  for (const std::string& d : ex.gold_docs)
    if (!ks.has(d)) throw integrity_error("gold doc absent from knowledge source: " + d);
  const std::string& a = ex.gold_docs[0];
  const std::string& b = ex.gold_docs[1];

  const auto first_mention_of = [&](const std::string& src, const std::string& dst) {
    const std::vector<Mention>& ms = outbound_mentions(ks, src);
    for (std::size_t i = 0; i < ms.size(); ++i)
      if (ms[i].target_entity == dst) return static_cast<int>(i);
    return -1;
  };
  const auto sequence = [&](const std::string& first, const std::string& second, int mi) {
    std::vector<Hop> hops{start_hop(first)};
    hops.push_back(mi >= 0 ? mention_hop(first, second, mi) : unlinked_hop(second));
    hops.push_back(end_hop());
    return hops;
  };

  if (ex.qtype == QType::comparison)
    return {sequence(a, b, -1), sequence(b, a, -1)};
  const int a_to_b = first_mention_of(a, b);
  const int b_to_a = first_mention_of(b, a);
  if (a_to_b >= 0 && b_to_a < 0) return {sequence(a, b, a_to_b)};
  if (b_to_a >= 0 && a_to_b < 0) return {sequence(b, a, b_to_a)};
  return {sequence(a, b, a_to_b), sequence(b, a, b_to_a)};
}

/// Random traversals used as negatives: start points come from the lexical
/// top lists (question and each gold doc), later hops follow mention edges
/// and fall back to pool documents where no edges lead on. Traversals that
/// reproduce a full gold document path as their prefix are rejected. Returns
/// up to cfg.negs_per_question distinct sequences; an empty return means the
/// corpus admits no valid negative and the caller should degrade to per-step
/// pool negatives.
inline std::vector<std::vector<Hop>> sample_negative_sequences(const QAExample& ex,
                                                               const TfIdfIndex& index,
                                                               const KnowledgeSource& ks,
                                                               const TrainConfig& cfg, Rng& rng) {
  std::vector<std::string> starts;
  std::set<std::string> seen;
  const auto push_unique = [&](const std::vector<std::string>& ids) {
    for (const std::string& id : ids)
      if (seen.insert(id).second) starts.push_back(id);
  };
  push_unique(index.top_n(ex.question, static_cast<std::size_t>(cfg.top_question)));
  for (const std::string& gold : ex.gold_docs)
    push_unique(index.top_n(ks.document(gold).text, static_cast<std::size_t>(cfg.top_per_gold)));

  const std::vector<std::string> pool =
      index.top_n(ex.question, static_cast<std::size_t>(cfg.retrieve.pool_size));

  std::vector<std::vector<std::string>> gold_paths;
  for (const auto& seq : derive_gold_hop_sequence(ex, ks)) {
    std::vector<std::string> docs;
    for (const Hop& h : seq)
      if (h.kind != HopKind::end) docs.push_back(h.target);
    gold_paths.push_back(std::move(docs));
  }
  const auto has_gold_prefix = [&](const std::vector<std::string>& docs) {
    for (const auto& gp : gold_paths)
      if (docs.size() >= gp.size() && std::equal(gp.begin(), gp.end(), docs.begin())) return true;
    return false;
  };

  std::vector<std::vector<Hop>> out;
  std::set<std::vector<std::string>> emitted;
  if (starts.empty() || cfg.negs_per_question == 0) return out;
  const int max_attempts = 50 * std::max(cfg.negs_per_question, 1);
  for (int attempt = 0; attempt < max_attempts &&
                        static_cast<int>(out.size()) < cfg.negs_per_question;
       ++attempt) {
    const std::string& start = starts[rng.index(starts.size())];
    std::vector<Hop> hops{start_hop(start)};
    std::vector<std::string> docs{start};
    std::set<std::string> visited{start};
    bool dead_end = false;
    while (static_cast<int>(docs.size()) < cfg.neg_len) {
      const std::vector<Mention>& edges = outbound_mentions(ks, docs.back());
      std::vector<std::pair<int, std::string>> open;  // (mention index, target)
      for (std::size_t mi = 0; mi < edges.size(); ++mi)
        if (!visited.count(edges[mi].target_entity))
          open.emplace_back(static_cast<int>(mi), edges[mi].target_entity);
      if (!open.empty()) {
        const auto& [mi, target] = open[rng.index(open.size())];
        hops.push_back(mention_hop(docs.back(), target, mi));
        docs.push_back(target);
        visited.insert(target);
        continue;
      }
      std::vector<std::string> fallback;
      for (const std::string& id : pool)
        if (!visited.count(id)) fallback.push_back(id);
      if (fallback.empty()) {
        dead_end = true;
        break;
      }
      const std::string& target = fallback[rng.index(fallback.size())];
      hops.push_back(unlinked_hop(target));
      docs.push_back(target);
      visited.insert(target);
    }
    if (dead_end || has_gold_prefix(docs) || !emitted.insert(docs).second) continue;
    out.push_back(std::move(hops));
  }
  return out;
}

/// One selection step of the document objective plus the sentence objective:
///   -[log p(positive) + sum over negatives log(1 - p)]
///   -[sum over gold sentences log p + sum over the rest log(1 - p)]
/// computed from raw logits in log-sigmoid form. `sentence_logits` pairs each
/// sentence's logit with whether it is a gold supporting sentence.
template <class Scalar>
ad::Value<Scalar> step_loss(ad::Tape<Scalar>& tape,
                            const std::vector<ad::Value<Scalar>>& candidate_logits,
                            std::size_t positive_index,
                            const std::vector<std::pair<ad::Value<Scalar>, bool>>& sentence_logits) {
  namespace ad = hopchain::ad;
  using V = ad::Value<Scalar>;
  if (candidate_logits.empty()) throw contract_error("step_loss: empty candidate set");
  if (positive_index >= candidate_logits.size())
    throw contract_error("step_loss: positive index out of range");
  V loss = ad::neg(ad::log_sigmoid(candidate_logits[positive_index]));
  for (std::size_t i = 0; i < candidate_logits.size(); ++i)
    if (i != positive_index) loss = ad::sub(loss, ad::log_sigmoid(ad::neg(candidate_logits[i])));
  for (const auto& [logit, is_gold] : sentence_logits)
    loss = ad::sub(loss, ad::log_sigmoid(is_gold ? logit : ad::neg(logit)));
  return loss;
}

/// Loss of one question: teacher-forced unrolling over each gold sequence,
/// negatives scored against the gold states, averaged over the gold
/// sequences. At every step the candidate set is the gold hop plus the
/// negatives' same-position hops (sorted, deduplicated, gold-target hops
/// dropped); from the second step on, a gold doc hop also competes against
/// the end hop so stopping early is penalized. When `negatives` is empty the
/// pool documents stand in as per-step negatives.
template <class Scalar>
ad::Value<Scalar> question_loss(EncoderCache<Scalar>& cache, const QAExample& ex,
                                const std::vector<std::vector<Hop>>& gold_sequences,
                                const std::vector<std::vector<Hop>>& negatives,
                                const std::vector<std::string>& pool, const TrainConfig& cfg) {
  namespace ad = hopchain::ad;
  using V = ad::Value<Scalar>;
  ad::Tape<Scalar>& tape = cache.tape();
  const ad::ParamStore<Scalar>& store = cache.params().store;
  if (gold_sequences.empty()) throw contract_error("question_loss: no gold sequences");

  V total = tape.input(ad::Mat<Scalar>::Zero(1, 1));
  for (const std::vector<Hop>& gold : gold_sequences) {
    V h = tape.param(store, "h_s");
    V seq_loss = tape.input(ad::Mat<Scalar>::Zero(1, 1));
    for (std::size_t t = 0; t < gold.size(); ++t) {
      const Hop& gold_hop = gold[t];
      std::set<Hop> negs;
      if (!negatives.empty()) {
        for (const std::vector<Hop>& nseq : negatives)
          if (t < nseq.size() && nseq[t].target != gold_hop.target) negs.insert(nseq[t]);
      } else {
        for (const std::string& id : pool) {
          if (id == gold_hop.target) continue;
          negs.insert(t == 0 ? start_hop(id) : unlinked_hop(id));
        }
      }
      if (t >= 1 && gold_hop.kind != HopKind::end) negs.insert(end_hop());

      std::vector<V> logits;
      logits.reserve(negs.size() + 1);
      HopEncoding<Scalar> gold_enc = encode_hop(cache, gold_hop, h, cfg.fusion);
      logits.push_back(score_logit(h, gold_enc.vec));
      for (const Hop& nh : negs)
        logits.push_back(score_logit(h, encode_hop(cache, nh, h, cfg.fusion).vec));

      std::vector<std::pair<V, bool>> sentence_logits;
      V h_next = h;
      if (gold_hop.kind != HopKind::end) {
        h_next = advance(tape, store, h, gold_enc.vec);
        if (cfg.sentence_loss) {
          const auto& entry = cache.get(gold_hop.target);
          std::set<int> gold_sents;
          if (auto it = ex.gold_sentences.find(gold_hop.target); it != ex.gold_sentences.end())
            gold_sents.insert(it->second.begin(), it->second.end());
          V ws = tape.param(store, "w_s");
          for (const auto& [si, svec] : entry.out.sentences)
            sentence_logits.emplace_back(ad::dot(h_next, ad::matmul(ws, svec)),
                                         gold_sents.count(si) > 0);
        }
      }
      seq_loss = ad::add(seq_loss, step_loss(tape, logits, 0, sentence_logits));
      h = h_next;
    }
    total = ad::add(total, seq_loss);
  }
  return ad::scale(total, Scalar(1) / static_cast<Scalar>(gold_sequences.size()));
}

/// Weight decay applies to genuine weight matrices only; biases, layer-norm
/// parameters, embedding tables, and the learned free vectors are exempt
/// (shrinking norm gains or embeddings destabilizes small encoders).
template <class Scalar>
bool decay_applies(const std::string& name, const ad::Mat<Scalar>& p) {
  return p.rows() > 1 && p.cols() > 1 && name != "tok_emb" && name != "pos_emb";
}

/// Adaptive-moment optimizer with bias correction; decay constants 0.9 and
/// 0.999, epsilon 1e-8. A zero learning rate leaves parameters bit-identical.
template <class Scalar>
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
                double weight_decay = 0.0)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps), wd_(weight_decay) {}

  void step(ad::ParamStore<Scalar>& store, const ad::GradMap<Scalar>& grads) {
    ++t_;
    const Scalar c1 = Scalar(1) - static_cast<Scalar>(std::pow(b1_, t_));
    const Scalar c2 = Scalar(1) - static_cast<Scalar>(std::pow(b2_, t_));
    for (auto& [name, p] : store.items()) {
      auto it = grads.find(name);
      if (it == grads.end()) continue;
      const ad::Mat<Scalar>& g = it->second;
      auto [mi, inserted_m] = m_.try_emplace(name, ad::Mat<Scalar>::Zero(p.rows(), p.cols()));
      auto [vi, inserted_v] = v_.try_emplace(name, ad::Mat<Scalar>::Zero(p.rows(), p.cols()));
      ad::Mat<Scalar>& m = mi->second;
      ad::Mat<Scalar>& v = vi->second;
      m = static_cast<Scalar>(b1_) * m + (Scalar(1) - static_cast<Scalar>(b1_)) * g;
      v = (static_cast<Scalar>(b2_) * v.array() +
           (Scalar(1) - static_cast<Scalar>(b2_)) * g.array().square())
              .matrix();
      // Decoupled weight decay: the penalty skips the moment estimates.
      const Scalar wd = decay_applies(name, p) ? static_cast<Scalar>(wd_) : Scalar(0);
      p.array() -= static_cast<Scalar>(lr_) *
                   ((m.array() / c1) / ((v.array() / c2).sqrt() + static_cast<Scalar>(eps_)) +
                    wd * p.array());
    }
  }

  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_, b1_, b2_, eps_, wd_ = 0.0;
  long t_ = 0;
  std::map<std::string, ad::Mat<Scalar>> m_, v_;
};

template <class Scalar>
struct TrainOutput {
  ModelParams<Scalar> params;          // best dev checkpoint (last epoch if no dev set)
  std::vector<std::string> log_lines;  // one JSON object per epoch
  int best_epoch = 0;
  double best_dev = -1.0;
};

/// Full training loop: shuffled mini-batches, per-question loss graphs,
/// summed-then-averaged gradients, adaptive-moment updates, and a dev
/// evaluation per epoch that decides the returned checkpoint. Deterministic
/// for a fixed seed. A non-finite loss aborts naming the epoch, batch, and
/// question.
template <class Scalar>
TrainOutput<Scalar> train(const TrainConfig& cfg, ModelParams<Scalar> params,
                          const std::vector<QAExample>& train_set,
                          const std::vector<QAExample>& dev_set, const KnowledgeSource& ks,
                          const TfIdfIndex& index) {
  cfg.validate();
  if (train_set.empty()) throw config_error("train: empty training set");
  Adam<Scalar> opt(cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay);
  Rng root(cfg.seed);
  TrainOutput<Scalar> out{params, {}, 0, -1.0};
  bool warned_fallback = false;

  RetrieveOptions dev_opts = cfg.retrieve;
  dev_opts.fusion = cfg.fusion;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.lr_drop_epoch > 0 && epoch == cfg.lr_drop_epoch)
      opt.set_lr(cfg.lr * cfg.lr_drop_factor);
    Rng erng = root.fork(static_cast<std::uint64_t>(epoch));
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    erng.shuffle(order);

    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      ad::GradMap<Scalar> grad_sum;
      double batch_loss = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        const QAExample& ex = train_set[order[i]];
        const auto gold = derive_gold_hop_sequence(ex, ks);
        auto negs = sample_negative_sequences(ex, index, ks, cfg, erng);
        if (negs.empty() && cfg.negs_per_question > 0 && !warned_fallback) {
          std::cerr << "warning: no valid negative traversals for " << ex.id
                    << "; degrading to per-step pool negatives\n";
          warned_fallback = true;
        }
        const std::vector<std::string> pool =
            index.top_n(ex.question, static_cast<std::size_t>(cfg.retrieve.pool_size));
        ad::Tape<Scalar> tape;
        EncoderCache<Scalar> cache(tape, params, ks, ex.question);
        ad::Value<Scalar> loss = question_loss(cache, ex, gold, negs, pool, cfg);
        const double lv = static_cast<double>(loss.scalar());
        if (!std::isfinite(lv))
          throw train_error("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batches + 1) + ", question " + ex.id);
        batch_loss += lv;
        for (auto& [name, g] : tape.backward(loss)) {
          auto [it, inserted] = grad_sum.try_emplace(name, std::move(g));
          if (!inserted) it->second += g;
        }
      }
      const Scalar inv = Scalar(1) / static_cast<Scalar>(end - begin);
      for (auto& [name, g] : grad_sum) g *= inv;
      opt.step(params.store, grad_sum);
      epoch_loss += batch_loss / static_cast<double>(end - begin);
      ++batches;
    }
    epoch_loss /= static_cast<double>(std::max<std::size_t>(batches, 1));

    nlohmann::json line{{"epoch", epoch}, {"train_loss", epoch_loss}};
    if (!dev_set.empty()) {
      std::vector<RetrievalResult> results;
      results.reserve(dev_set.size());
      for (const QAExample& ex : dev_set)
        results.push_back(beam_search(params, ks, index, ex.id, ex.question, dev_opts));
      MetricsReport report = compute_metrics(ks, results, dev_set, {1});
      const MetricRow& row = report.overall.at(1);
      line["dev_all_docs_top1"] = row.all_docs_exist;
      line["dev_ans_top1"] = row.ans_exists;
      line["dev_sent_top1"] = row.sent_exists;
      if (row.all_docs_exist > out.best_dev) {
        out.best_dev = row.all_docs_exist;
        out.best_epoch = epoch;
        out.params = params;
      }
    }
    out.log_lines.push_back(line.dump());
  }
  if (dev_set.empty() || out.best_epoch == 0) {
    out.params = params;
    out.best_epoch = cfg.epochs;
  }
  return out;
}

}  // namespace hopchain

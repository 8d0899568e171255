#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "hopchain/encoder.hpp"
#include "hopchain/hopspace.hpp"
#include "hopchain/lexindex.hpp"
#include "hopchain/model.hpp"
#include "hopchain/result.hpp"
#include "hopchain/tape.hpp"

// The recurrent hop selector: a gated-recurrent state update over fused hop
// vectors, per-hop selection probabilities, sentence prediction against the
// updated state, and beam search over hop sequences.

namespace hopchain {

/// One gated-recurrent step: `h' = (1 - z) o h + z o candidate`, with update
/// and reset gates computed from [hop; h].
template <class Scalar>
ad::Value<Scalar> advance(ad::Tape<Scalar>& tape, const ad::ParamStore<Scalar>& store,
                          ad::Value<Scalar> h, ad::Value<Scalar> hop_vec) {
  namespace ad = hopchain::ad;
  using V = ad::Value<Scalar>;
  const auto P = [&](const char* n) { return tape.param(store, n); };
  V cat = ad::concat_rows<Scalar>({hop_vec, h});
  V z = ad::sigmoid(ad::add(ad::matmul(P("gru.wz"), cat), P("gru.bz")));
  V r = ad::sigmoid(ad::add(ad::matmul(P("gru.wr"), cat), P("gru.br")));
  V gated = ad::concat_rows<Scalar>({hop_vec, ad::hadamard(r, h)});
  V cand = ad::tanh(ad::add(ad::matmul(P("gru.wh"), gated), P("gru.bh")));
  return ad::add(ad::sub(h, ad::hadamard(z, h)), ad::hadamard(z, cand));
}

/// Selection logit of a fused hop under state `h`; the selection probability
/// is its sigmoid.
template <class Scalar>
ad::Value<Scalar> score_logit(ad::Value<Scalar> h, ad::Value<Scalar> hop_vec) {
  return ad::dot(h, hop_vec);
}

template <class Scalar>
ad::Value<Scalar> score_hop(ad::Value<Scalar> h, ad::Value<Scalar> hop_vec) {
  return ad::sigmoid(score_logit(h, hop_vec));
}

/// Sentence indices of `doc_out` whose probability sigmoid(h . W_s s) exceeds
/// one half, strictly; `h` must be the state holding after the document's hop
/// was absorbed. Probability exactly 0.5 selects nothing.
template <class Scalar>
std::vector<int> predict_sentences(ad::Tape<Scalar>& tape, const ad::ParamStore<Scalar>& store,
                                   ad::Value<Scalar> h, const ContextualOutput<Scalar>& doc_out) {
  std::vector<int> selected;
  ad::Value<Scalar> ws = tape.param(store, "w_s");
  for (const auto& [si, vec] : doc_out.sentences) {
    const Scalar z = ad::dot(h, ad::matmul(ws, vec)).scalar();
    if (ad::sigmoid_value(z) > Scalar(0.5)) selected.push_back(si);
  }
  return selected;
}

struct RetrieveOptions {
  int beam_size = 8;
  int pool_size = 30;
  int max_steps = 3;
  FusionMode fusion = FusionMode::full;

  void validate() const {
    if (beam_size < 1) throw config_error("beam_size must be >= 1");
    if (pool_size < 1) throw config_error("pool_size must be >= 1");
    if (max_steps < 1) throw config_error("max_steps must be >= 1");
  }
};

/// Beam search over hop sequences. Step one offers start hops across the
/// lexical pool; later steps offer mention hops from the foothold, unlinked
/// pool hops, and the end hop. Finished beams retire from expansion. Any beam
/// still open at max_steps takes the end hop at its actual probability. Beams
/// are scored by summed log probability; ties break toward the
/// lexicographically smaller document sequence.
template <class Scalar>
RetrievalResult beam_search(const ModelParams<Scalar>& params, const KnowledgeSource& ks,
                            const TfIdfIndex& index, const std::string& question_id,
                            const std::vector<std::string>& question,
                            const RetrieveOptions& opts) {
  namespace ad = hopchain::ad;
  using V = ad::Value<Scalar>;
  opts.validate();
  const std::vector<std::string> pool = index.top_n(question, static_cast<std::size_t>(opts.pool_size));
  if (pool.empty()) throw retrieval_error("empty candidate pool for question " + question_id);

  ad::Tape<Scalar> tape;
  EncoderCache<Scalar> cache(tape, params, ks, question);

  struct Beam {
    std::vector<std::string> docs;
    std::vector<StepTrace> steps;
    std::map<std::string, std::vector<int>> sentences;
    double log_score = 0.0;
    V h;
  };
  struct Expansion {
    const Beam* parent;
    Hop hop;
    HopEncoding<Scalar> enc;
    double log_p;
    double prob;
    std::vector<std::string> docs;  // parent docs + target (unchanged for end)
    double log_score;
  };

  const auto better = [](const Expansion& a, const Expansion& b) {
    if (a.log_score != b.log_score) return a.log_score > b.log_score;
    return a.docs < b.docs;
  };

  std::vector<Beam> active;
  active.push_back({{}, {}, {}, 0.0, tape.param(params.store, "h_s")});
  std::vector<BeamTrace> done;

  for (int step = 1; step <= opts.max_steps && !active.empty(); ++step) {
    std::vector<Expansion> expansions;
    for (const Beam& beam : active) {
      std::vector<Hop> candidates;
      if (step == opts.max_steps)
        candidates.push_back(end_hop());
      else
        candidates = candidate_hops(ks, pool, beam.docs);
      for (const Hop& hop : candidates) {
        HopEncoding<Scalar> enc = encode_hop(cache, hop, beam.h, opts.fusion);
        const Scalar z = score_logit(beam.h, enc.vec).scalar();
        const double log_p = static_cast<double>(ad::log_sigmoid_value(z));
        Expansion e{&beam, hop, enc, log_p, static_cast<double>(ad::sigmoid_value(z)),
                    beam.docs, beam.log_score + log_p};
        if (hop.kind != HopKind::end) e.docs.push_back(hop.target);
        expansions.push_back(std::move(e));
      }
    }
    if (expansions.empty()) break;
    std::sort(expansions.begin(), expansions.end(), better);

    std::vector<Beam> next;
    for (const Expansion& e : expansions) {
      StepTrace trace{e.hop.kind, e.hop.target, e.enc.w_m, e.enc.w_u, e.prob};
      if (e.hop.kind == HopKind::end) {
        BeamTrace bt{e.parent->docs, e.parent->steps, e.parent->sentences, e.log_score, true};
        bt.steps.push_back(trace);
        done.push_back(std::move(bt));
        continue;
      }
      if (static_cast<int>(next.size()) >= opts.beam_size) continue;
      Beam nb{e.docs, e.parent->steps, e.parent->sentences, e.log_score,
              advance(tape, params.store, e.parent->h, e.enc.vec)};
      nb.steps.push_back(trace);
      nb.sentences[e.hop.target] =
          predict_sentences(tape, params.store, nb.h, cache.get(e.hop.target).out);
      next.push_back(std::move(nb));
    }
    active = std::move(next);
  }

  std::sort(done.begin(), done.end(), [](const BeamTrace& a, const BeamTrace& b) {
    if (a.log_score != b.log_score) return a.log_score > b.log_score;
    return a.docs < b.docs;
  });
  if (static_cast<int>(done.size()) > opts.beam_size)
    done.resize(static_cast<std::size_t>(opts.beam_size));
  return RetrievalResult{question_id, std::move(done)};
}

}  // namespace hopchain

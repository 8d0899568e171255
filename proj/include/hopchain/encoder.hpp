#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hopchain/corpus.hpp"
#include "hopchain/model.hpp"
#include "hopchain/tape.hpp"

// Joint question/document encoding. The token layout is
//   <CLS> question <SEP> document'
// where document' is the document rebuilt sentence by sentence with a marker
// pair wrapping every mention anchor and one sentence marker appended after
// each sentence. Contextual vectors are read off at <CLS> (document
// embedding), at each mention's opening marker (mention embedding), and at
// each sentence marker (sentence embedding).

namespace hopchain {

struct MarkedSequence {
  std::vector<int> ids;
  std::map<int, int> mention_marker_pos;   // index into Document::mentions -> M-OPEN position
  std::map<int, int> sentence_marker_pos;  // sentence index -> sentence-marker position
};

/// Builds the marked token layout. When the sequence would exceed `max_len`,
/// whole sentences are dropped from the end of the document until it fits;
/// dropped sentences take their markers and mentions with them, so every
/// surviving marker pair is intact. A mention earns markers only when a single
/// sentence fully contains its span. A question that does not fit on its own
/// is a configuration error.
inline MarkedSequence tokenize_with_markers(const std::vector<std::string>& question,
                                            const Document& doc, const Vocab& vocab,
                                            int max_len) {
  const int prefix_len = 2 + static_cast<int>(question.size());  // <CLS> q <SEP>
  if (prefix_len > max_len)
    throw config_error("question alone exceeds max_len (" + std::to_string(prefix_len) + " > " +
                       std::to_string(max_len) + " tokens)");

  // One emission plan per sentence: marker opens/closes keyed by token offset.
  struct Plan {
    int start, end;
    std::map<int, std::vector<int>> opens;   // token offset -> mention indices opening there
    std::map<int, std::vector<int>> closes;  // token offset of last anchor token -> mention indices
    int length = 0;                          // tokens + markers + sentence marker
  };
  std::vector<Plan> plans;
  plans.reserve(doc.sentences.size());
  for (const auto& [s, e] : doc.sentences) plans.push_back({s, e, {}, {}, e - s + 1});
  for (std::size_t mi = 0; mi < doc.mentions.size(); ++mi) {
    const Mention& m = doc.mentions[mi];
    for (Plan& p : plans) {
      if (m.start >= p.start && m.end <= p.end) {
        p.opens[m.start].push_back(static_cast<int>(mi));
        p.closes[m.end - 1].push_back(static_cast<int>(mi));
        p.length += 2;
        break;
      }
    }
  }

  std::size_t keep = 0;
  int total = prefix_len;
  while (keep < plans.size() && total + plans[keep].length <= max_len) {
    total += plans[keep].length;
    ++keep;
  }

  MarkedSequence out;
  out.ids.reserve(static_cast<std::size_t>(total));
  out.ids.push_back(Vocab::cls);
  for (const std::string& tok : question) out.ids.push_back(vocab.id(tok));
  out.ids.push_back(Vocab::sep);
  for (std::size_t si = 0; si < keep; ++si) {
    const Plan& p = plans[si];
    for (int t = p.start; t < p.end; ++t) {
      if (auto it = p.opens.find(t); it != p.opens.end())
        for (int mi : it->second) {
          out.mention_marker_pos[mi] = static_cast<int>(out.ids.size());
          out.ids.push_back(Vocab::m_open);
        }
      out.ids.push_back(vocab.id(doc.text[static_cast<std::size_t>(t)]));
      if (auto it = p.closes.find(t); it != p.closes.end())
        for ([[maybe_unused]] int mi : it->second) out.ids.push_back(Vocab::m_close);
    }
    out.sentence_marker_pos[static_cast<int>(si)] = static_cast<int>(out.ids.size());
    out.ids.push_back(Vocab::sm);
  }
  return out;
}

template <class Scalar>
struct ContextualOutput {
  ad::Value<Scalar> cls;                        // document embedding, d x 1
  std::map<int, ad::Value<Scalar>> mentions;    // mention index -> d x 1
  std::map<int, ad::Value<Scalar>> sentences;   // sentence index -> d x 1
};

/// Runs the pre-norm transformer over a marked sequence and reads out the
/// contextual vectors. All intermediate nodes live on `tape`.
template <class Scalar>
ContextualOutput<Scalar> encode(ad::Tape<Scalar>& tape, const ModelParams<Scalar>& params,
                                const MarkedSequence& seq) {
  namespace ad = hopchain::ad;
  using V = ad::Value<Scalar>;
  const ModelConfig& cfg = params.config;
  const int len = static_cast<int>(seq.ids.size());
  if (len == 0) throw contract_error("encode: empty sequence");
  if (len > cfg.max_len) throw contract_error("encode: sequence longer than max_len");
  for (int id : seq.ids)
    if (id < 0 || id >= params.vocab.size()) throw contract_error("encode: token id out of range");

  const auto P = [&](const std::string& name) { return tape.param(params.store, name); };
  const int d = cfg.d_model;
  const int dh = d / cfg.n_heads;
  const Scalar inv_sqrt_dh = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));

  V x = ad::add(ad::gather_rows(P("tok_emb"), seq.ids), ad::block(P("pos_emb"), 0, 0, len, d));
  for (int b = 0; b < cfg.n_blocks; ++b) {
    const std::string pre = "enc" + std::to_string(b) + ".";
    V a = ad::layer_norm_rows(x, P(pre + "ln1.g"), P(pre + "ln1.b"));
    V q = ad::add_rowwise(ad::matmul(a, P(pre + "wq")), P(pre + "bq"));
    V k = ad::add_rowwise(ad::matmul(a, P(pre + "wk")), P(pre + "bk"));
    V v = ad::add_rowwise(ad::matmul(a, P(pre + "wv")), P(pre + "bv"));
    std::vector<V> heads;
    heads.reserve(static_cast<std::size_t>(cfg.n_heads));
    for (int h = 0; h < cfg.n_heads; ++h) {
      V qh = ad::block(q, 0, h * dh, len, dh);
      V kh = ad::block(k, 0, h * dh, len, dh);
      V vh = ad::block(v, 0, h * dh, len, dh);
      V att = ad::softmax_rows(ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_sqrt_dh));
      heads.push_back(ad::matmul(att, vh));
    }
    V mixed = ad::add_rowwise(ad::matmul(ad::concat_cols(heads), P(pre + "wo")), P(pre + "bo"));
    x = ad::add(x, mixed);
    V n2 = ad::layer_norm_rows(x, P(pre + "ln2.g"), P(pre + "ln2.b"));
    V hidden = ad::relu(ad::add_rowwise(ad::matmul(n2, P(pre + "ff.w1")), P(pre + "ff.b1")));
    V ff = ad::add_rowwise(ad::matmul(hidden, P(pre + "ff.w2")), P(pre + "ff.b2"));
    x = ad::add(x, ff);
  }
  x = ad::layer_norm_rows(x, P("enc.final.g"), P("enc.final.b"));

  ContextualOutput<Scalar> out{ad::row_vec(x, 0), {}, {}};
  for (const auto& [mi, pos] : seq.mention_marker_pos) out.mentions.emplace(mi, ad::row_vec(x, pos));
  for (const auto& [si, pos] : seq.sentence_marker_pos) out.sentences.emplace(si, ad::row_vec(x, pos));
  return out;
}

/// Per-question cache of encoder passes: each document is encoded once per
/// tape no matter how many hops touch it.
template <class Scalar>
class EncoderCache {
 public:
  EncoderCache(ad::Tape<Scalar>& tape, const ModelParams<Scalar>& params,
               const KnowledgeSource& ks, std::vector<std::string> question)
      : tape_(tape), params_(params), ks_(ks), question_(std::move(question)) {}

  struct Entry {
    MarkedSequence seq;
    ContextualOutput<Scalar> out;
  };

  const Entry& get(const std::string& doc_id) {
    auto it = entries_.find(doc_id);
    if (it != entries_.end()) return it->second;
    MarkedSequence seq =
        tokenize_with_markers(question_, ks_.document(doc_id), params_.vocab, params_.config.max_len);
    ContextualOutput<Scalar> out = encode(tape_, params_, seq);
    return entries_.emplace(doc_id, Entry{std::move(seq), std::move(out)}).first->second;
  }

  const std::vector<std::string>& question() const { return question_; }
  const KnowledgeSource& knowledge() const { return ks_; }
  const ModelParams<Scalar>& params() const { return params_; }
  ad::Tape<Scalar>& tape() { return tape_; }

 private:
  ad::Tape<Scalar>& tape_;
  const ModelParams<Scalar>& params_;
  const KnowledgeSource& ks_;
  std::vector<std::string> question_;
  std::map<std::string, Entry> entries_;
};

}  // namespace hopchain

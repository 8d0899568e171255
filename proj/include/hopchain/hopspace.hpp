#pragma once

#include <set>
#include <string>
#include <vector>

#include "hopchain/corpus.hpp"
#include "hopchain/encoder.hpp"
#include "hopchain/model.hpp"
#include "hopchain/result.hpp"
#include "hopchain/tape.hpp"

// Hops pair a mention embedding with a document embedding. Candidate
// enumeration walks outbound mentions of the current foothold plus unlinked
// pool documents; fusion mixes the two embeddings under attention weights
// driven by the selector state.

namespace hopchain {

/// One candidate selection. `source`/`mention_index` identify the anchor for
/// mention hops; start and unlinked hops have no anchor, the end hop has no
/// target either.
struct Hop {
  HopKind kind = HopKind::start;
  std::string source;      // doc owning the mention (mention hops only)
  std::string target;      // doc being selected (empty for end)
  int mention_index = -1;  // index into source doc's mentions (mention hops only)

  friend bool operator==(const Hop&, const Hop&) = default;
  friend auto operator<=>(const Hop&, const Hop&) = default;
};

inline Hop start_hop(std::string target) { return {HopKind::start, "", std::move(target), -1}; }
inline Hop unlinked_hop(std::string target) { return {HopKind::unlinked, "", std::move(target), -1}; }
inline Hop mention_hop(std::string source, std::string target, int mention_index) {
  return {HopKind::mention, std::move(source), std::move(target), mention_index};
}
inline Hop end_hop() { return {HopKind::end, "", "", -1}; }

/// Candidates for the next selection. With nothing selected yet these are
/// start hops over the pool. Afterwards: one mention hop per outbound mention
/// of the last selected document (first mention wins when several share a
/// target), unlinked hops to the remaining pool documents, and the end hop.
/// Already-selected documents are never offered again.
inline std::vector<Hop> candidate_hops(const KnowledgeSource& ks,
                                       const std::vector<std::string>& pool,
                                       const std::vector<std::string>& selected) {
  std::vector<Hop> out;
  if (selected.empty()) {
    out.reserve(pool.size());
    for (const std::string& id : pool) out.push_back(start_hop(id));
    return out;
  }
  const std::string& foothold = selected.back();
  const std::set<std::string> visited(selected.begin(), selected.end());
  std::set<std::string> linked;
  const std::vector<Mention>& mentions = outbound_mentions(ks, foothold);
  for (std::size_t mi = 0; mi < mentions.size(); ++mi) {
    const std::string& target = mentions[mi].target_entity;
    if (visited.count(target) || linked.count(target)) continue;
    linked.insert(target);
    out.push_back(mention_hop(foothold, target, static_cast<int>(mi)));
  }
  for (const std::string& id : pool)
    if (!visited.count(id) && !linked.count(id)) out.push_back(unlinked_hop(id));
  out.push_back(end_hop());
  return out;
}

/// A fused hop ready for scoring: the mixture vector plus the attention
/// weights actually applied (recorded for traces).
template <class Scalar>
struct HopEncoding {
  ad::Value<Scalar> vec;
  double w_m = 0.0;
  double w_u = 0.0;
};

/// Mixes mention embedding `m` and document embedding `u` under state `h`:
/// logits h.(W_k m) and h.(W_k u) softmax into (w_m, w_u), and the output is
/// w_m W_v m + w_u W_v u. Ablations pin the weights instead: no_structured
/// uses (0, 1), no_weighting uses (1, 1).
template <class Scalar>
HopEncoding<Scalar> fuse(ad::Tape<Scalar>& tape, const ad::ParamStore<Scalar>& store,
                         ad::Value<Scalar> h, ad::Value<Scalar> m, ad::Value<Scalar> u,
                         FusionMode mode) {
  namespace ad = hopchain::ad;
  using V = ad::Value<Scalar>;
  V wv = tape.param(store, "fuse.wv");
  if (mode == FusionMode::no_structured) return {ad::matmul(wv, u), 0.0, 1.0};
  if (mode == FusionMode::no_weighting)
    return {ad::add(ad::matmul(wv, m), ad::matmul(wv, u)), 1.0, 1.0};
  V wk = tape.param(store, "fuse.wk");
  V logit_m = ad::dot(h, ad::matmul(wk, m));
  V logit_u = ad::dot(h, ad::matmul(wk, u));
  V weights = ad::softmax_col(ad::concat_rows<Scalar>({logit_m, logit_u}));
  V w_m = ad::block(weights, 0, 0, 1, 1);
  V w_u = ad::block(weights, 1, 0, 1, 1);
  V vec = ad::add(ad::scale_by(w_m, ad::matmul(wv, m)), ad::scale_by(w_u, ad::matmul(wv, u)));
  return {vec, static_cast<double>(w_m.scalar()), static_cast<double>(w_u.scalar())};
}

/// Embeds one hop. Mention hops read the opening-marker vector from the
/// source document's pass; start and unlinked hops substitute the trainable
/// stand-in vector; the end hop pairs the stand-in with the virtual
/// end-document embedding. A mention whose markers were truncated away also
/// falls back to the stand-in.
template <class Scalar>
HopEncoding<Scalar> encode_hop(EncoderCache<Scalar>& cache, const Hop& hop, ad::Value<Scalar> h,
                               FusionMode mode) {
  ad::Tape<Scalar>& tape = cache.tape();
  const ad::ParamStore<Scalar>& store = cache.params().store;
  ad::Value<Scalar> m = tape.param(store, "m_p");
  ad::Value<Scalar> u;
  switch (hop.kind) {
    case HopKind::end:
      u = tape.param(store, "u_e");
      break;
    case HopKind::mention: {
      const auto& src = cache.get(hop.source);
      if (hop.mention_index < 0 ||
          hop.mention_index >= static_cast<int>(cache.knowledge().document(hop.source).mentions.size()))
        throw contract_error("encode_hop: mention index out of range for " + hop.source);
      auto it = src.out.mentions.find(hop.mention_index);
      if (it != src.out.mentions.end()) m = it->second;
      u = cache.get(hop.target).out.cls;
      break;
    }
    case HopKind::start:
    case HopKind::unlinked:
      u = cache.get(hop.target).out.cls;
      break;
  }
  return fuse(tape, store, h, m, u, mode);
}

}  // namespace hopchain

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "hopchain/corpus.hpp"

// Synthetic corpus generator planting three evidence regimes:
//   (a) relation-sufficient bridging: the foothold document carries several
//       mentions with distinct relation phrases; the question's relation
//       phrase identifies the gold target outright.
//   (b) fact-required bridging: the foothold carries a group of mentions
//       sharing one relation phrase; the question adds a fact that appears in
//       the gold target's document — and, verbatim, in structurally identical
//       echo documents that are not linked from the foothold. Document content
//       alone cannot separate gold from echoes; the mention edge can.
//   (c) comparison: two documents with no mention between them, each holding a
//       numeric attribute; the answer is the winning entity's title.
//
// Every generated answer is a contiguous token run inside a gold document.

namespace hopchain {

struct SynthConfig {
  int entities = 150;
  int per_family = 60;   // questions generated per family
  int group_size = 3;    // same-relation mentions per family-(b) foothold
  int fanout = 3;        // distinct-relation mentions per family-(a) foothold
  int min_incoming = 0;  // pad donor mentions until every bridging gold target
                         // has at least this many incoming mention contexts
};

/// Deterministic for a given (cfg, seed). Example ids are prefixed with their
/// family: "a-", "b-", "c-". Throws config_error when cfg.entities cannot
/// accommodate the requested questions.
std::pair<KnowledgeSource, std::vector<QAExample>> generate_synthetic(const SynthConfig& cfg,
                                                                      std::uint64_t seed);

}  // namespace hopchain

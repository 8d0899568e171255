#pragma once

#include <map>
#include <string>
#include <vector>

#include "hopchain/errors.hpp"

// Inference output shared by the retriever, the metrics, and the CLI: ranked
// beams with per-step fusion-weight traces and selected sentences.

namespace hopchain {

enum class HopKind { start, mention, unlinked, end };

std::string to_string(HopKind k);
HopKind hop_kind_from_string(const std::string& s);

/// One selection step of a beam: which hop was chosen and how it was fused.
struct StepTrace {
  HopKind kind = HopKind::start;
  std::string doc;     // empty for the end hop
  double w_m = 0.0;    // fusion weight on the mention embedding
  double w_u = 0.0;    // fusion weight on the document embedding
  double prob = 0.0;   // selection probability of this hop

  friend bool operator==(const StepTrace&, const StepTrace&) = default;
};

struct BeamTrace {
  std::vector<std::string> docs;  // selected document ids, in hop order
  std::vector<StepTrace> steps;   // one per selection, including the end hop
  std::map<std::string, std::vector<int>> sentences;  // doc id -> selected sentence indices
  double log_score = 0.0;         // sum of log selection probabilities
  bool finished = false;          // ended via the end hop

  friend bool operator==(const BeamTrace&, const BeamTrace&) = default;
};

/// Beams are ordered best-first (log_score descending, document sequence as
/// the tie-break), so top-k slices are prefixes.
struct RetrievalResult {
  std::string question_id;
  std::vector<BeamTrace> beams;

  friend bool operator==(const RetrievalResult&, const RetrievalResult&) = default;
};

/// JSON-lines persistence, one result per line; deterministic output.
void write_results(const std::vector<RetrievalResult>& results, const std::string& path);
std::vector<RetrievalResult> read_results(const std::string& path);

std::string result_to_json_line(const RetrievalResult& r);

}  // namespace hopchain

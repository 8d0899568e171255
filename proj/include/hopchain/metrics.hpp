#pragma once

#include <map>
#include <string>
#include <vector>

#include "hopchain/corpus.hpp"
#include "hopchain/result.hpp"

// Retrieval quality metrics over ranked beams. Top-k means "any of the best k
// beams". All values are percentages in [0, 100] and are monotone
// non-decreasing in k because top-k slices are prefixes.

namespace hopchain {

struct MetricRow {
  double ans_exists = 0.0;
  double sent_exists = 0.0;
  double all_docs_exist = 0.0;
};

struct MetricsReport {
  std::vector<int> ks;                                   // evaluated cutoffs, ascending
  std::map<int, MetricRow> overall;                      // by k
  std::map<std::string, std::map<int, MetricRow>> by_qtype;  // "bridging" / "comparison"
  int questions = 0;
  int missing_results = 0;   // questions with no retrieval result (scored as failures)
  int gold_sentence_count = 0;
  std::map<std::string, int> questions_by_qtype;
};

/// Percentage of questions whose answer appears as a case-insensitive
/// contiguous token run in the concatenated documents of at least one top-k
/// beam.
double ans_exists(const KnowledgeSource& ks, const std::vector<RetrievalResult>& results,
                  const std::vector<QAExample>& examples, int k);

/// Percentage of gold supporting sentences, pooled over questions, whose
/// document appears in at least one top-k beam.
double sent_exists(const KnowledgeSource& ks, const std::vector<RetrievalResult>& results,
                   const std::vector<QAExample>& examples, int k);

/// Percentage of questions where some single top-k beam retrieves every gold
/// document.
double all_docs_exist(const KnowledgeSource& ks, const std::vector<RetrievalResult>& results,
                      const std::vector<QAExample>& examples, int k);

MetricsReport compute_metrics(const KnowledgeSource& ks,
                              const std::vector<RetrievalResult>& results,
                              const std::vector<QAExample>& examples,
                              const std::vector<int>& k_values = {1, 5, 8});

/// Aligned-column text rendering.
std::string metrics_table(const MetricsReport& report);

/// Deterministic JSON rendering (alphabetical keys).
std::string metrics_json(const MetricsReport& report);

}  // namespace hopchain

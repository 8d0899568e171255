#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hopchain/corpus.hpp"

// Lexical preliminary retrieval: smoothed tf-idf document vectors ranked by
// cosine similarity against the question, producing the candidate pool for the
// hop selector.

namespace hopchain {

class TfIdfIndex {
 public:
  struct DocEntry {
    std::string id;
    std::vector<std::pair<int, double>> weights;  // (term id, weight), term id ascending
    double norm = 0.0;

    friend bool operator==(const DocEntry&, const DocEntry&) = default;
  };

  /// weight(t, d) = tf(t, d) * log((N + 1) / (df(t) + 1)); term ids are
  /// assigned in sorted term order.
  static TfIdfIndex build(const KnowledgeSource& ks);

  /// Entity ids ranked by cosine similarity, ties broken by ascending id;
  /// result length min(n, N). An all-unknown or empty question scores zero
  /// everywhere and yields id order.
  std::vector<std::string> top_n(const std::vector<std::string>& question, std::size_t n) const;

  /// Cosine similarities for every document, in index document order.
  std::vector<std::pair<std::string, double>> scores(const std::vector<std::string>& question) const;

  std::size_t vocab_size() const { return terms_.size(); }
  std::size_t doc_count() const { return docs_.size(); }
  int term_id(const std::string& term) const;
  std::uint64_t doc_freq(int term) const { return doc_freq_.at(static_cast<std::size_t>(term)); }
  const DocEntry& doc(const std::string& id) const;
  const std::vector<DocEntry>& docs() const { return docs_; }

  /// Versioned binary sidecar with a magic header.
  void save(const std::string& path) const;
  static TfIdfIndex load(const std::string& path);

  friend bool operator==(const TfIdfIndex& a, const TfIdfIndex& b) {
    return a.terms_ == b.terms_ && a.doc_freq_ == b.doc_freq_ && a.docs_ == b.docs_;
  }

 private:
  std::vector<std::string> terms_;        // term id -> term, sorted
  std::vector<std::uint64_t> doc_freq_;   // term id -> document frequency
  std::vector<DocEntry> docs_;            // corpus insertion order
  std::map<std::string, std::size_t> doc_index_;
  std::map<std::string, int> term_index_;

  void rebuild_lookups();
};

TfIdfIndex build_index(const KnowledgeSource& ks);

std::vector<std::string> top_n(const TfIdfIndex& index, const std::vector<std::string>& question,
                               std::size_t n);

}  // namespace hopchain

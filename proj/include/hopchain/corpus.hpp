#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hopchain/errors.hpp"

// Knowledge-source data model: one introductory document per entity, with
// hyperlink mentions (anchor spans) pointing at other entities, plus the
// question/answer examples evaluated against it.

namespace hopchain {

struct Entity {
  std::string id;
  std::string title;

  friend bool operator==(const Entity&, const Entity&) = default;
};

/// Token span [start, end) linking the anchor text in the source document to
/// the target entity.
struct Mention {
  std::string source_entity;
  std::string target_entity;
  int start = 0;
  int end = 0;

  friend bool operator==(const Mention&, const Mention&) = default;
};

struct Document {
  std::string entity_id;
  std::vector<std::string> text;
  std::vector<std::pair<int, int>> sentences;  // [start, end) token offsets, ordered, disjoint
  std::vector<Mention> mentions;               // in span order

  friend bool operator==(const Document&, const Document&) = default;
};

enum class QType { bridging, comparison };

std::string to_string(QType t);
QType qtype_from_string(const std::string& s);

struct QAExample {
  std::string id;
  std::vector<std::string> question;
  std::vector<std::string> gold_docs;                       // unique, file order
  std::map<std::string, std::vector<int>> gold_sentences;   // doc id -> ascending indices
  std::string answer;
  QType qtype = QType::bridging;

  friend bool operator==(const QAExample&, const QAExample&) = default;
};

/// Immutable after construction: entities with their documents in insertion
/// order, plus an id lookup. validate() enforces the structural invariants.
class KnowledgeSource {
 public:
  void add(Entity entity, Document document);

  bool has(const std::string& id) const { return index_.count(id) > 0; }
  const Entity& entity(const std::string& id) const { return entities_[pos(id)]; }
  const Document& document(const std::string& id) const { return documents_[pos(id)]; }

  std::size_t size() const { return entities_.size(); }
  const std::vector<Entity>& entities() const { return entities_; }
  const std::vector<Document>& documents() const { return documents_; }

  /// Checks invariants: unique non-empty ids/titles, ordered disjoint sentence
  /// spans, in-bounds mention spans in span order, resolvable mention targets.
  void validate() const;

  friend bool operator==(const KnowledgeSource& a, const KnowledgeSource& b) {
    return a.entities_ == b.entities_ && a.documents_ == b.documents_;
  }

 private:
  std::size_t pos(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw not_found_error("no such entity: " + id);
    return it->second;
  }

  std::vector<Entity> entities_;
  std::vector<Document> documents_;
  std::map<std::string, std::size_t> index_;
};

/// All mentions whose source is `entity_id`, in document (span) order.
const std::vector<Mention>& outbound_mentions(const KnowledgeSource& ks,
                                              const std::string& entity_id);

/// Lowercases and splits on whitespace and punctuation; punctuation is dropped.
std::vector<std::string> tokenize(const std::string& s);

/// Reads the JSON-lines corpus and QA files, validates, and resolves
/// cross-references. Parse failures name the file and line; dangling
/// references raise an integrity error listing the offending ids.
std::pair<KnowledgeSource, std::vector<QAExample>> ingest_corpus(const std::string& corpus_path,
                                                                 const std::string& qa_path);

/// Corpus half of ingest_corpus, for callers with no QA file.
KnowledgeSource ingest_knowledge(const std::string& corpus_path);

/// Writes the JSON-lines files this module ingests. Deterministic: object keys
/// are alphabetical and documents keep their insertion order.
void serialize_corpus(const KnowledgeSource& ks, const std::vector<QAExample>& examples,
                      const std::string& corpus_path, const std::string& qa_path);
void serialize_knowledge(const KnowledgeSource& ks, const std::string& corpus_path);
void serialize_examples(const std::vector<QAExample>& examples, const std::string& qa_path);

}  // namespace hopchain

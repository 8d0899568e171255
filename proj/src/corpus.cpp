#include "hopchain/corpus.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace hopchain {

using nlohmann::json;

std::string to_string(QType t) { return t == QType::bridging ? "bridging" : "comparison"; }

QType qtype_from_string(const std::string& s) {
  if (s == "bridging") return QType::bridging;
  if (s == "comparison") return QType::comparison;
  throw parse_error("unknown qtype: " + s);
}

void KnowledgeSource::add(Entity entity, Document document) {
  if (index_.count(entity.id)) throw integrity_error("duplicate entity id: " + entity.id);
  if (document.entity_id != entity.id)
    throw integrity_error("document owner mismatch for entity: " + entity.id);
  index_[entity.id] = entities_.size();
  entities_.push_back(std::move(entity));
  documents_.push_back(std::move(document));
}

void KnowledgeSource::validate() const {
  std::vector<std::string> dangling;
  for (std::size_t i = 0; i < entities_.size(); ++i) {
    const Entity& e = entities_[i];
    const Document& d = documents_[i];
    if (e.id.empty()) throw integrity_error("entity with empty id");
    if (e.title.empty()) throw integrity_error("entity has empty title: " + e.id);

    const int n = static_cast<int>(d.text.size());
    int prev_end = 0;
    for (const auto& [start, end] : d.sentences) {
      if (start < prev_end || start >= end || end > n)
        throw integrity_error("bad sentence span [" + std::to_string(start) + "," +
                              std::to_string(end) + ") in doc: " + e.id);
      prev_end = end;
    }

    std::set<std::tuple<std::string, int, int>> seen;
    int prev_start = -1;
    for (const Mention& m : d.mentions) {
      if (m.source_entity != e.id)
        throw integrity_error("mention source mismatch in doc: " + e.id);
      if (m.start < 0 || m.start >= m.end || m.end > n)
        throw integrity_error("bad mention span [" + std::to_string(m.start) + "," +
                              std::to_string(m.end) + ") in doc: " + e.id);
      if (m.start < prev_start)
        throw integrity_error("mentions out of span order in doc: " + e.id);
      prev_start = m.start;
      if (!seen.insert({m.target_entity, m.start, m.end}).second)
        throw integrity_error("duplicate mention (target, span) in doc: " + e.id);
      if (!has(m.target_entity)) dangling.push_back(e.id + " -> " + m.target_entity);
    }
  }
  if (!dangling.empty()) {
    std::ostringstream os;
    os << "dangling mention targets:";
    for (const auto& s : dangling) os << " " << s;
    throw integrity_error(os.str());
  }
}

const std::vector<Mention>& outbound_mentions(const KnowledgeSource& ks,
                                              const std::string& entity_id) {
  return ks.document(entity_id).mentions;
}

std::vector<std::string> tokenize(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : s) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

namespace {

json parse_line(const std::string& path, int line_no, const std::string& line) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw parse_error(path + ":" + std::to_string(line_no) + ": " + e.what());
  }
}

[[noreturn]] void fail_line(const std::string& path, int line_no, const std::string& msg) {
  throw parse_error(path + ":" + std::to_string(line_no) + ": " + msg);
}

const json& field(const json& obj, const char* key, const std::string& path, int line_no) {
  auto it = obj.find(key);
  if (it == obj.end()) fail_line(path, line_no, std::string("missing field \"") + key + "\"");
  return *it;
}

std::vector<std::string> string_list(const json& j, const char* key, const std::string& path,
                                     int line_no) {
  if (!j.is_array()) fail_line(path, line_no, std::string("field \"") + key + "\" must be an array");
  std::vector<std::string> out;
  for (const auto& x : j) {
    if (!x.is_string()) fail_line(path, line_no, std::string("field \"") + key + "\" must hold strings");
    out.push_back(x.get<std::string>());
  }
  return out;
}

/// Applies `fn` to each non-blank line of a JSON-lines file.
template <class Fn>
void for_each_line(const std::string& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open: " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    fn(line_no, parse_line(path, line_no, line));
  }
}

}  // namespace

KnowledgeSource ingest_knowledge(const std::string& corpus_path) {
  KnowledgeSource ks;
  for_each_line(corpus_path, [&](int line_no, const json& obj) {
    Entity e;
    e.id = field(obj, "id", corpus_path, line_no).get<std::string>();
    e.title = field(obj, "title", corpus_path, line_no).get<std::string>();
    Document d;
    d.entity_id = e.id;
    d.text = string_list(field(obj, "text", corpus_path, line_no), "text", corpus_path, line_no);
    for (const auto& span : field(obj, "sentences", corpus_path, line_no)) {
      if (!span.is_array() || span.size() != 2)
        fail_line(corpus_path, line_no, "sentence spans must be [start, end] pairs");
      d.sentences.emplace_back(span[0].get<int>(), span[1].get<int>());
    }
    for (const auto& mj : field(obj, "mentions", corpus_path, line_no)) {
      Mention m;
      m.source_entity = e.id;
      m.target_entity = field(mj, "target", corpus_path, line_no).get<std::string>();
      m.start = field(mj, "start", corpus_path, line_no).get<int>();
      m.end = field(mj, "end", corpus_path, line_no).get<int>();
      d.mentions.push_back(std::move(m));
    }
    ks.add(std::move(e), std::move(d));
  });
  ks.validate();
  return ks;
}

std::pair<KnowledgeSource, std::vector<QAExample>> ingest_corpus(const std::string& corpus_path,
                                                                 const std::string& qa_path) {
  KnowledgeSource ks = ingest_knowledge(corpus_path);

  std::vector<QAExample> examples;
  std::set<std::string> qa_ids;
  for_each_line(qa_path, [&](int line_no, const json& obj) {
    QAExample ex;
    ex.id = field(obj, "id", qa_path, line_no).get<std::string>();
    if (!qa_ids.insert(ex.id).second) fail_line(qa_path, line_no, "duplicate example id: " + ex.id);
    ex.question =
        string_list(field(obj, "question", qa_path, line_no), "question", qa_path, line_no);
    ex.gold_docs =
        string_list(field(obj, "gold_docs", qa_path, line_no), "gold_docs", qa_path, line_no);
    if (ex.gold_docs.empty()) fail_line(qa_path, line_no, "gold_docs must be non-empty");
    std::set<std::string> gold(ex.gold_docs.begin(), ex.gold_docs.end());
    if (gold.size() != ex.gold_docs.size())
      fail_line(qa_path, line_no, "gold_docs contains duplicates");
    const json& gs = field(obj, "gold_sentences", qa_path, line_no);
    if (!gs.is_object()) fail_line(qa_path, line_no, "gold_sentences must be an object");
    std::vector<std::string> bad;
    for (auto it = gs.begin(); it != gs.end(); ++it) {
      if (!gold.count(it.key())) bad.push_back(it.key());
      std::vector<int> idxs;
      for (const auto& v : it.value()) idxs.push_back(v.get<int>());
      std::sort(idxs.begin(), idxs.end());
      ex.gold_sentences[it.key()] = std::move(idxs);
    }
    if (!bad.empty()) {
      std::ostringstream os;
      os << "gold_sentences references non-gold docs:";
      for (const auto& s : bad) os << " " << s;
      throw integrity_error(qa_path + ":" + std::to_string(line_no) + ": " + os.str());
    }
    ex.answer = field(obj, "answer", qa_path, line_no).get<std::string>();
    ex.qtype = qtype_from_string(field(obj, "qtype", qa_path, line_no).get<std::string>());

    std::vector<std::string> missing;
    for (const auto& g : ex.gold_docs)
      if (!ks.has(g)) missing.push_back(g);
    if (!missing.empty()) {
      std::ostringstream os;
      os << qa_path << ":" << line_no << ": gold docs not in corpus:";
      for (const auto& s : missing) os << " " << s;
      throw integrity_error(os.str());
    }
    for (const auto& [doc, idxs] : ex.gold_sentences) {
      const auto n = static_cast<int>(ks.document(doc).sentences.size());
      for (int i : idxs)
        if (i < 0 || i >= n)
          throw integrity_error(qa_path + ":" + std::to_string(line_no) +
                                ": sentence index out of range for doc " + doc);
    }
    examples.push_back(std::move(ex));
  });
  return {std::move(ks), std::move(examples)};
}

void serialize_knowledge(const KnowledgeSource& ks, const std::string& corpus_path) {
  std::ofstream cout_(corpus_path);
  if (!cout_) throw io_error("cannot write: " + corpus_path);
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const Entity& e = ks.entities()[i];
    const Document& d = ks.documents()[i];
    json obj;
    obj["id"] = e.id;
    obj["title"] = e.title;
    obj["text"] = d.text;
    json sents = json::array();
    for (const auto& [start, end] : d.sentences) sents.push_back({start, end});
    obj["sentences"] = std::move(sents);
    json ments = json::array();
    for (const Mention& m : d.mentions)
      ments.push_back({{"target", m.target_entity}, {"start", m.start}, {"end", m.end}});
    obj["mentions"] = std::move(ments);
    cout_ << obj.dump() << '\n';
  }
}

void serialize_examples(const std::vector<QAExample>& examples, const std::string& qa_path) {
  std::ofstream qout(qa_path);
  if (!qout) throw io_error("cannot write: " + qa_path);
  for (const QAExample& ex : examples) {
    json obj;
    obj["id"] = ex.id;
    obj["question"] = ex.question;
    obj["gold_docs"] = ex.gold_docs;
    json gs = json::object();
    for (const auto& [doc, idxs] : ex.gold_sentences) gs[doc] = idxs;
    obj["gold_sentences"] = std::move(gs);
    obj["answer"] = ex.answer;
    obj["qtype"] = to_string(ex.qtype);
    qout << obj.dump() << '\n';
  }
}

void serialize_corpus(const KnowledgeSource& ks, const std::vector<QAExample>& examples,
                      const std::string& corpus_path, const std::string& qa_path) {
  serialize_knowledge(ks, corpus_path);
  serialize_examples(examples, qa_path);
}

}  // namespace hopchain

#include "hopchain/lexindex.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace hopchain {

namespace {

constexpr char kMagic[4] = {'H', 'C', 'I', 'X'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::ifstream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw parse_error("truncated index file: " + path);
  return v;
}

void write_str(std::ofstream& out, const std::string& s) {
  write_pod(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_str(std::ifstream& in, const std::string& path) {
  const auto n = read_pod<std::uint32_t>(in, path);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw parse_error("truncated index file: " + path);
  return s;
}

std::map<std::string, int> term_counts(const std::vector<std::string>& tokens) {
  std::map<std::string, int> tf;
  for (const auto& t : tokens) ++tf[t];
  return tf;
}

}  // namespace

void TfIdfIndex::rebuild_lookups() {
  term_index_.clear();
  for (std::size_t i = 0; i < terms_.size(); ++i) term_index_[terms_[i]] = static_cast<int>(i);
  doc_index_.clear();
  for (std::size_t i = 0; i < docs_.size(); ++i) doc_index_[docs_[i].id] = i;
}

int TfIdfIndex::term_id(const std::string& term) const {
  auto it = term_index_.find(term);
  return it == term_index_.end() ? -1 : it->second;
}

const TfIdfIndex::DocEntry& TfIdfIndex::doc(const std::string& id) const {
  auto it = doc_index_.find(id);
  if (it == doc_index_.end()) throw not_found_error("no such document in index: " + id);
  return docs_[it->second];
}

TfIdfIndex TfIdfIndex::build(const KnowledgeSource& ks) {
  if (ks.size() == 0) throw config_error("cannot index an empty corpus");

  TfIdfIndex index;
  std::set<std::string> vocab;
  for (const Document& d : ks.documents())
    for (const auto& t : d.text) vocab.insert(t);
  index.terms_.assign(vocab.begin(), vocab.end());
  index.rebuild_lookups();

  index.doc_freq_.assign(index.terms_.size(), 0);
  for (const Document& d : ks.documents()) {
    std::set<std::string> seen(d.text.begin(), d.text.end());
    for (const auto& t : seen) ++index.doc_freq_[static_cast<std::size_t>(index.term_index_[t])];
  }

  const double n_docs = static_cast<double>(ks.size());
  for (const Document& d : ks.documents()) {
    DocEntry entry;
    entry.id = d.entity_id;
    double sq = 0.0;
    for (const auto& [term, tf] : term_counts(d.text)) {
      const int tid = index.term_index_[term];
      const double idf =
          std::log((n_docs + 1.0) / (static_cast<double>(index.doc_freq_[tid]) + 1.0));
      const double w = static_cast<double>(tf) * idf;
      entry.weights.emplace_back(tid, w);
      sq += w * w;
    }
    entry.norm = std::sqrt(sq);
    index.docs_.push_back(std::move(entry));
  }
  index.rebuild_lookups();
  return index;
}

std::vector<std::pair<std::string, double>> TfIdfIndex::scores(
    const std::vector<std::string>& question) const {
  std::vector<std::pair<int, double>> qvec;
  double qsq = 0.0;
  for (const auto& [term, tf] : term_counts(question)) {
    auto it = term_index_.find(term);
    if (it == term_index_.end()) continue;  // unknown terms never intersect a document
    const double idf = std::log((static_cast<double>(docs_.size()) + 1.0) /
                                (static_cast<double>(doc_freq_[it->second]) + 1.0));
    const double w = static_cast<double>(tf) * idf;
    qvec.emplace_back(it->second, w);
    qsq += w * w;
  }
  std::sort(qvec.begin(), qvec.end());
  const double qnorm = std::sqrt(qsq);

  std::vector<std::pair<std::string, double>> out;
  out.reserve(docs_.size());
  for (const DocEntry& d : docs_) {
    double dotp = 0.0;
    std::size_t i = 0, j = 0;
    while (i < qvec.size() && j < d.weights.size()) {
      if (qvec[i].first < d.weights[j].first) ++i;
      else if (qvec[i].first > d.weights[j].first) ++j;
      else dotp += qvec[i++].second * d.weights[j++].second;
    }
    const double denom = qnorm * d.norm;
    out.emplace_back(d.id, denom > 0.0 ? dotp / denom : 0.0);
  }
  return out;
}

std::vector<std::string> TfIdfIndex::top_n(const std::vector<std::string>& question,
                                           std::size_t n) const {
  if (n < 1) throw contract_error("top_n requires n >= 1");
  auto scored = scores(question);
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (scored.size() > n) scored.resize(n);
  std::vector<std::string> out;
  out.reserve(scored.size());
  for (auto& [id, score] : scored) out.push_back(std::move(id));
  return out;
}

void TfIdfIndex::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write: " + path);
  out.write(kMagic, 4);
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::uint64_t>(terms_.size()));
  for (const auto& t : terms_) write_str(out, t);
  for (std::uint64_t f : doc_freq_) write_pod(out, f);
  write_pod(out, static_cast<std::uint64_t>(docs_.size()));
  for (const DocEntry& d : docs_) {
    write_str(out, d.id);
    write_pod(out, static_cast<std::uint64_t>(d.weights.size()));
    for (const auto& [tid, w] : d.weights) {
      write_pod(out, static_cast<std::uint32_t>(tid));
      write_pod(out, w);
    }
    write_pod(out, d.norm);
  }
  if (!out) throw io_error("write failed: " + path);
}

TfIdfIndex TfIdfIndex::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || !std::equal(magic, magic + 4, kMagic))
    throw parse_error("not an index file (bad magic): " + path);
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != kVersion)
    throw parse_error("unsupported index version " + std::to_string(version) + ": " + path);

  TfIdfIndex index;
  const auto n_terms = read_pod<std::uint64_t>(in, path);
  index.terms_.reserve(n_terms);
  for (std::uint64_t i = 0; i < n_terms; ++i) index.terms_.push_back(read_str(in, path));
  index.doc_freq_.reserve(n_terms);
  for (std::uint64_t i = 0; i < n_terms; ++i)
    index.doc_freq_.push_back(read_pod<std::uint64_t>(in, path));
  const auto n_docs = read_pod<std::uint64_t>(in, path);
  for (std::uint64_t i = 0; i < n_docs; ++i) {
    DocEntry d;
    d.id = read_str(in, path);
    const auto nnz = read_pod<std::uint64_t>(in, path);
    d.weights.reserve(nnz);
    for (std::uint64_t k = 0; k < nnz; ++k) {
      const auto tid = read_pod<std::uint32_t>(in, path);
      const auto w = read_pod<double>(in, path);
      d.weights.emplace_back(static_cast<int>(tid), w);
    }
    d.norm = read_pod<double>(in, path);
    index.docs_.push_back(std::move(d));
  }
  index.rebuild_lookups();
  return index;
}

TfIdfIndex build_index(const KnowledgeSource& ks) { return TfIdfIndex::build(ks); }

std::vector<std::string> top_n(const TfIdfIndex& index, const std::vector<std::string>& question,
                               std::size_t n) {
  return index.top_n(question, n);
}

}  // namespace hopchain

#include "hopchain/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

namespace hopchain {

namespace {

std::string lower(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool contains_run(const std::vector<std::string>& text, const std::vector<std::string>& run) {
  if (run.empty() || run.size() > text.size()) return false;
  for (std::size_t i = 0; i + run.size() <= text.size(); ++i)
    if (std::equal(run.begin(), run.end(), text.begin() + static_cast<std::ptrdiff_t>(i)))
      return true;
  return false;
}

/// Per-question hit flags for one k cutoff.
struct QuestionHits {
  bool ans = false;
  bool all_docs = false;
  int gold_sentences = 0;
  int found_sentences = 0;
};

QuestionHits judge(const KnowledgeSource& ks, const QAExample& ex, const RetrievalResult* result,
                   int k) {
  QuestionHits h;
  for (const auto& [doc, idxs] : ex.gold_sentences)
    h.gold_sentences += static_cast<int>(idxs.size());
  if (result == nullptr) return h;

  const std::size_t top = std::min<std::size_t>(static_cast<std::size_t>(k), result->beams.size());
  const auto answer = tokenize(ex.answer);
  std::set<std::string> covered;  // docs present in any top-k beam
  for (std::size_t b = 0; b < top; ++b) {
    const BeamTrace& beam = result->beams[b];
    std::vector<std::string> concat;
    for (const auto& doc : beam.docs) {
      covered.insert(doc);
      if (!ks.has(doc)) continue;  // results may reference a stale corpus
      for (const auto& tok : ks.document(doc).text) concat.push_back(lower(tok));
    }
    if (!h.ans && contains_run(concat, answer)) h.ans = true;
    if (!h.all_docs) {
      const std::set<std::string> docset(beam.docs.begin(), beam.docs.end());
      h.all_docs = std::all_of(ex.gold_docs.begin(), ex.gold_docs.end(),
                               [&](const std::string& g) { return docset.count(g) > 0; });
    }
  }
  for (const auto& [doc, idxs] : ex.gold_sentences)
    if (covered.count(doc)) h.found_sentences += static_cast<int>(idxs.size());
  return h;
}

struct Tally {
  int questions = 0;
  int ans_hits = 0;
  int all_docs_hits = 0;
  int gold_sentences = 0;
  int found_sentences = 0;

  MetricRow row() const {
    MetricRow r;
    if (questions > 0) {
      r.ans_exists = 100.0 * ans_hits / questions;
      r.all_docs_exist = 100.0 * all_docs_hits / questions;
    }
    if (gold_sentences > 0) r.sent_exists = 100.0 * found_sentences / gold_sentences;
    return r;
  }
};

}  // namespace

MetricsReport compute_metrics(const KnowledgeSource& ks,
                              const std::vector<RetrievalResult>& results,
                              const std::vector<QAExample>& examples,
                              const std::vector<int>& k_values) {
  std::map<std::string, const RetrievalResult*> by_id;
  for (const RetrievalResult& r : results) by_id[r.question_id] = &r;

  MetricsReport report;
  report.ks = k_values;
  std::sort(report.ks.begin(), report.ks.end());
  report.questions = static_cast<int>(examples.size());

  for (int k : report.ks) {
    Tally overall;
    std::map<std::string, Tally> typed;
    for (const QAExample& ex : examples) {
      auto it = by_id.find(ex.id);
      const RetrievalResult* res = it == by_id.end() ? nullptr : it->second;
      if (res == nullptr && k == report.ks.front()) {
        ++report.missing_results;
        std::cerr << "warning: no retrieval result for question " << ex.id
                  << "; scored as failure\n";
      }
      const QuestionHits h = judge(ks, ex, res, k);
      Tally& t = typed[to_string(ex.qtype)];
      for (Tally* tally : {&overall, &t}) {
        tally->questions += 1;
        tally->ans_hits += h.ans ? 1 : 0;
        tally->all_docs_hits += h.all_docs ? 1 : 0;
        tally->gold_sentences += h.gold_sentences;
        tally->found_sentences += h.found_sentences;
      }
    }
    report.overall[k] = overall.row();
    for (const auto& [qtype, tally] : typed) {
      report.by_qtype[qtype][k] = tally.row();
      if (k == report.ks.front()) report.questions_by_qtype[qtype] = tally.questions;
      if (k == report.ks.front()) report.gold_sentence_count = overall.gold_sentences;
    }
  }
  return report;
}

double ans_exists(const KnowledgeSource& ks, const std::vector<RetrievalResult>& results,
                  const std::vector<QAExample>& examples, int k) {
  return compute_metrics(ks, results, examples, {k}).overall.at(k).ans_exists;
}

double sent_exists(const KnowledgeSource& ks, const std::vector<RetrievalResult>& results,
                   const std::vector<QAExample>& examples, int k) {
  return compute_metrics(ks, results, examples, {k}).overall.at(k).sent_exists;
}

double all_docs_exist(const KnowledgeSource& ks, const std::vector<RetrievalResult>& results,
                      const std::vector<QAExample>& examples, int k) {
  return compute_metrics(ks, results, examples, {k}).overall.at(k).all_docs_exist;
}

std::string metrics_table(const MetricsReport& report) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  auto block = [&](const std::string& label, const std::map<int, MetricRow>& rows) {
    os << label << "\n";
    os << "  " << std::left << std::setw(16) << "metric";
    for (int k : report.ks) os << std::right << std::setw(9) << ("k=" + std::to_string(k));
    os << "\n";
    const char* names[3] = {"ans_exists", "sent_exists", "all_docs_exist"};
    for (int m = 0; m < 3; ++m) {
      os << "  " << std::left << std::setw(16) << names[m];
      for (int k : report.ks) {
        const MetricRow& r = rows.at(k);
        const double v = m == 0 ? r.ans_exists : m == 1 ? r.sent_exists : r.all_docs_exist;
        os << std::right << std::setw(9) << v;
      }
      os << "\n";
    }
  };
  block("overall (" + std::to_string(report.questions) + " questions, " +
            std::to_string(report.gold_sentence_count) + " gold sentences)",
        report.overall);
  for (const auto& [qtype, rows] : report.by_qtype)
    block(qtype + " (" + std::to_string(report.questions_by_qtype.at(qtype)) + " questions)",
          rows);
  if (report.missing_results > 0)
    os << "missing results: " << report.missing_results << "\n";
  return os.str();
}

std::string metrics_json(const MetricsReport& report) {
  nlohmann::json j;
  j["questions"] = report.questions;
  j["missing_results"] = report.missing_results;
  j["gold_sentence_count"] = report.gold_sentence_count;
  j["questions_by_qtype"] = report.questions_by_qtype;
  auto rows = [&](const std::map<int, MetricRow>& m) {
    nlohmann::json out;
    for (const auto& [k, r] : m) {
      nlohmann::json row;
      row["ans_exists"] = r.ans_exists;
      row["sent_exists"] = r.sent_exists;
      row["all_docs_exist"] = r.all_docs_exist;
      out["k" + std::to_string(k)] = std::move(row);
    }
    return out;
  };
  j["overall"] = rows(report.overall);
  for (const auto& [qtype, m] : report.by_qtype) j["by_qtype"][qtype] = rows(m);
  return j.dump(2);
}

}  // namespace hopchain

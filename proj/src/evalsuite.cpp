#include "hopchain/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

#include "hopchain/rng.hpp"

namespace hopchain {

WeightReport weight_report(const std::vector<RetrievalResult>& results,
                           const std::vector<QAExample>& examples) {
  std::map<std::string, const RetrievalResult*> by_id;
  for (const RetrievalResult& r : results) by_id[r.question_id] = &r;

  WeightReport report;
  struct Acc {
    double w_m = 0.0, w_u = 0.0;
    int n = 0;
  };
  std::map<std::string, Acc> acc;
  for (const QAExample& ex : examples) {
    auto it = by_id.find(ex.id);
    if (it == by_id.end() || it->second->beams.empty() ||
        it->second->beams.front().steps.size() < 2) {
      ++report.skipped;
      continue;
    }
    const StepTrace& step = it->second->beams.front().steps[1];
    Acc& a = acc[to_string(ex.qtype)];
    a.w_m += step.w_m;
    a.w_u += step.w_u;
    ++a.n;
  }
  for (const auto& [qtype, a] : acc)
    report.by_qtype[qtype] = WeightRow{a.w_m / a.n, a.w_u / a.n, a.n};
  return report;
}

std::string weight_report_json(const WeightReport& report) {
  nlohmann::json j;
  j["skipped"] = report.skipped;
  for (const auto& [qtype, row] : report.by_qtype)
    j["by_qtype"][qtype] = {
        {"mean_w_m", row.mean_w_m}, {"mean_w_u", row.mean_w_u}, {"count", row.count}};
  return j.dump(2);
}

ExampleSplit split_examples(const std::vector<QAExample>& examples, double dev_frac,
                            double test_frac, std::uint64_t seed,
                            const std::function<std::string(const QAExample&)>& group_of) {
  if (dev_frac < 0 || test_frac < 0 || dev_frac + test_frac >= 1.0)
    throw config_error("split fractions must be non-negative and sum below 1");
  const auto key = [&](const QAExample& ex) {
    if (group_of) return group_of(ex);
    const auto dash = ex.id.find('-');
    return dash == std::string::npos ? std::string("all") : ex.id.substr(0, dash);
  };
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < examples.size(); ++i) groups[key(examples[i])].push_back(i);

  ExampleSplit split;
  Rng root(seed);
  std::uint64_t salt = 0;
  for (auto& [name, idx] : groups) {
    Rng rng = root.fork(salt++);
    rng.shuffle(idx);
    const std::size_t n = idx.size();
    const auto n_test = static_cast<std::size_t>(std::llround(test_frac * static_cast<double>(n)));
    const auto n_dev = static_cast<std::size_t>(std::llround(dev_frac * static_cast<double>(n)));
    for (std::size_t i = 0; i < n; ++i) {
      const QAExample& ex = examples[idx[i]];
      if (i < n_test)
        split.test.push_back(ex);
      else if (i < n_test + n_dev)
        split.dev.push_back(ex);
      else
        split.train.push_back(ex);
    }
  }
  const auto by_id = [](const QAExample& x, const QAExample& y) { return x.id < y.id; };
  std::sort(split.train.begin(), split.train.end(), by_id);
  std::sort(split.dev.begin(), split.dev.end(), by_id);
  std::sort(split.test.begin(), split.test.end(), by_id);
  return split;
}

std::string probe_report_json(const ProbeReport& report) {
  nlohmann::json j;
  j["accuracy"] = report.accuracy;
  j["avg_distractors"] = report.avg_distractors;
  j["evaluated"] = report.evaluated;
  j["excluded"] = report.excluded;
  j["ineligible"] = report.ineligible;
  j["cases"] = nlohmann::json::array();
  for (const ProbeCase& c : report.cases)
    j["cases"].push_back({{"question_id", c.question_id},
                          {"distractors", c.distractors},
                          {"won", c.won},
                          {"gold_score", c.gold_score},
                          {"best_other", c.best_other}});
  return j.dump(2);
}

std::string to_string(AblationMode m) {
  switch (m) {
    case AblationMode::full: return "full";
    case AblationMode::no_structured: return "no_structured";
    case AblationMode::no_weighting: return "no_weighting";
    case AblationMode::no_sentence: return "no_sentence";
  }
  throw contract_error("unreachable ablation mode");
}

AblationMode ablation_mode_from_string(const std::string& s) {
  if (s == "full") return AblationMode::full;
  if (s == "no_structured") return AblationMode::no_structured;
  if (s == "no_weighting") return AblationMode::no_weighting;
  if (s == "no_sentence") return AblationMode::no_sentence;
  throw config_error("unknown ablation mode: " + s);
}

}  // namespace hopchain

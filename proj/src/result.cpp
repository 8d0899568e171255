#include "hopchain/result.hpp"

#include <json.hpp>

#include <fstream>

namespace hopchain {

using nlohmann::json;

std::string to_string(HopKind k) {
  switch (k) {
    case HopKind::start: return "start";
    case HopKind::mention: return "mention";
    case HopKind::unlinked: return "unlinked";
    case HopKind::end: return "end";
  }
  throw contract_error("unreachable hop kind");
}

HopKind hop_kind_from_string(const std::string& s) {
  if (s == "start") return HopKind::start;
  if (s == "mention") return HopKind::mention;
  if (s == "unlinked") return HopKind::unlinked;
  if (s == "end") return HopKind::end;
  throw parse_error("unknown hop kind: " + s);
}

std::string result_to_json_line(const RetrievalResult& r) {
  json obj;
  obj["question_id"] = r.question_id;
  json beams = json::array();
  for (const BeamTrace& b : r.beams) {
    json jb;
    jb["docs"] = b.docs;
    jb["log_score"] = b.log_score;
    jb["finished"] = b.finished;
    json steps = json::array();
    for (const StepTrace& s : b.steps)
      steps.push_back({{"kind", to_string(s.kind)},
                       {"doc", s.doc},
                       {"w_m", s.w_m},
                       {"w_u", s.w_u},
                       {"prob", s.prob}});
    jb["steps"] = std::move(steps);
    json sents = json::object();
    for (const auto& [doc, idxs] : b.sentences) sents[doc] = idxs;
    jb["sentences"] = std::move(sents);
    beams.push_back(std::move(jb));
  }
  obj["beams"] = std::move(beams);
  return obj.dump();
}

void write_results(const std::vector<RetrievalResult>& results, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write: " + path);
  for (const RetrievalResult& r : results) out << result_to_json_line(r) << '\n';
}

std::vector<RetrievalResult> read_results(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open: " + path);
  std::vector<RetrievalResult> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw parse_error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    RetrievalResult r;
    r.question_id = obj.at("question_id").get<std::string>();
    for (const auto& jb : obj.at("beams")) {
      BeamTrace b;
      b.docs = jb.at("docs").get<std::vector<std::string>>();
      b.log_score = jb.at("log_score").get<double>();
      b.finished = jb.at("finished").get<bool>();
      for (const auto& js : jb.at("steps")) {
        StepTrace s;
        s.kind = hop_kind_from_string(js.at("kind").get<std::string>());
        s.doc = js.at("doc").get<std::string>();
        s.w_m = js.at("w_m").get<double>();
        s.w_u = js.at("w_u").get<double>();
        s.prob = js.at("prob").get<double>();
        b.steps.push_back(std::move(s));
      }
      const auto& sents = jb.at("sentences");
      for (auto it = sents.begin(); it != sents.end(); ++it)
        b.sentences[it.key()] = it.value().get<std::vector<int>>();
      r.beams.push_back(std::move(b));
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace hopchain

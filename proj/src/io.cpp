#include "anchoragg/io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace anchoragg {

namespace {

nlohmann::json scored_words(const std::vector<std::string>& words, const std::vector<double>& scores) {
  auto arr = nlohmann::json::array();
  for (std::size_t i = 0; i < words.size(); ++i) {
    arr.push_back({{"word", words[i]}, {"score", i < scores.size() ? scores[i] : 0.0}});
  }
  return arr;
}

void parse_scored_words(const nlohmann::json& arr, std::vector<std::string>& words,
                        std::vector<double>& scores) {
  if (!arr.is_array()) throw InputError("expected an array of {word, score}");
  for (const auto& item : arr) {
    if (!item.is_object() || !item.contains("word") || !item["word"].is_string()) {
      throw InputError("term entry without a word");
    }
    words.push_back(item["word"].get<std::string>());
    scores.push_back(item.contains("score") && item["score"].is_number() ? item["score"].get<double>()
                                                                          : 0.0);
  }
}

}  // namespace

nlohmann::json term_list_to_json(const TermList& terms) {
  return {{"class", terms.class_name},
          {"aggregation", terms.aggregation},
          {"terms", scored_words(terms.words, terms.scores)}};
}

TermList term_list_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("terms")) throw InputError("term list: missing 'terms'");
  TermList t;
  t.class_name = j.value("class", "");
  t.aggregation = j.value("aggregation", "");
  parse_scored_words(j["terms"], t.words, t.scores);
  return t;
}

TermList read_term_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read term list " + path.string());
  try {
    return term_list_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw InputError("term list " + path.string() + ": " + e.what());
  }
}

void write_term_list(const TermList& terms, const std::filesystem::path& path) {
  write_text(path, term_list_to_json(terms).dump(2) + "\n");
}

nlohmann::json snapshot_to_json(const Snapshot& s) {
  return {{"t_sec", s.t_sec},
          {"calls", s.calls},
          {"doc_index", s.doc_index},
          {"topk", scored_words(s.words, s.scores)}};
}

Snapshot snapshot_from_json(const nlohmann::json& j) {
  Snapshot s;
  s.t_sec = j.at("t_sec").get<double>();
  s.calls = j.at("calls").get<std::uint64_t>();
  s.doc_index = j.at("doc_index").get<std::size_t>();
  parse_scored_words(j.at("topk"), s.words, s.scores);
  return s;
}

std::vector<Snapshot> read_snapshots(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read snapshot log " + path.string());
  std::vector<Snapshot> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(snapshot_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw InputError("snapshot log line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

nlohmann::json decision_to_json(const std::string& doc_id, const AnchorDecision& d) {
  return {{"doc", doc_id},
          {"pos", d.token.position},
          {"word", d.token.word},
          {"anchor", d.is_anchor},
          {"precision", d.estimate.point},
          {"samples", d.samples_used}};
}

std::string timeline_csv(const std::vector<TimelinePoint>& points) {
  std::ostringstream out;
  out << "t_sec,calls,aopc\n" << std::setprecision(10);
  for (const auto& p : points) out << p.t_sec << ',' << p.calls << ',' << p.aopc << '\n';
  return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

}  // namespace anchoragg

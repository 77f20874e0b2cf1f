#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "anchoragg/anchor.hpp"
#include "anchoragg/eval.hpp"
#include "anchoragg/topk.hpp"

namespace anchoragg {

// Term list: {"class": str, "aggregation": str, "terms": [{"word": str, "score": num}]}
nlohmann::json term_list_to_json(const TermList& terms);
TermList term_list_from_json(const nlohmann::json& j);
TermList read_term_list(const std::filesystem::path& path);
void write_term_list(const TermList& terms, const std::filesystem::path& path);

// Snapshot line: {"t_sec": num, "calls": int, "doc_index": int, "topk": [{"word", "score"}]}
nlohmann::json snapshot_to_json(const Snapshot& s);
Snapshot snapshot_from_json(const nlohmann::json& j);
std::vector<Snapshot> read_snapshots(const std::filesystem::path& path);

// Anchor trace line: {"doc", "pos", "word", "anchor", "precision", "samples"}
nlohmann::json decision_to_json(const std::string& doc_id, const AnchorDecision& d);

/// CSV with header t_sec,calls,aopc.
std::string timeline_csv(const std::vector<TimelinePoint>& points);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace anchoragg

#pragma once

#include <span>
#include <string>
#include <vector>

#include "anchoragg/corpus.hpp"
#include "anchoragg/model.hpp"
#include "anchoragg/topk.hpp"

namespace anchoragg {

/// Ordered top-k terms for one class.
struct TermList {
  std::vector<std::string> words;
  std::vector<double> scores;
  std::string class_name;
  std::string aggregation;

  std::size_t size() const { return words.size(); }
};

TermList make_term_list(std::span<const RankedWord> ranked, const WordStats& stats,
                        std::string class_name, std::string aggregation);

struct AopcResult {
  double value = 0.0;
  /// Mean drop f̂(d,c) − f̂(dⁱ,c) over S[c] for prefixes i = 1..k.
  std::vector<double> prefix_drops;
  std::size_t documents = 0;
};

/// d without any token whose word is among the first i terms; positions
/// are renumbered from 0.
Document remove_prefix(const Document& d, const TermList& terms, std::size_t i);

/// (1/(k+1)) · mean over d ∈ S[c] of Σ_{i=1..k} (f̂(d,c) − f̂(dⁱ,c)).
/// `members` lists the documents of S[c].
AopcResult aopc_k(const TermList& terms, const Corpus& corpus, std::span<const std::size_t> members,
                  const Predictor& f, ClassId c);

double shared_terms_ratio(const TermList& a, const TermList& b);

struct AppendDropResult {
  double accuracy_before = 0.0;
  double accuracy_after = 0.0;
  double drop_points = 0.0;  // (before − after) · 100
  std::size_t modified_documents = 0;
};

/// Appends `sentence` (single-space separator) to every document whose label
/// is not `target` and measures overall accuracy before and after.
AppendDropResult append_drop(const Corpus& corpus, const Predictor& f, const std::string& sentence,
                             ClassId target);

struct TimelinePoint {
  double t_sec = 0.0;
  std::uint64_t calls = 0;
  double aopc = 0.0;
};

/// AOPC^k of every snapshot's list; empty lists score 0.
std::vector<TimelinePoint> quality_timeline(std::span<const Snapshot> snapshots,
                                            const Corpus& corpus,
                                            std::span<const std::size_t> members,
                                            const Predictor& f, ClassId c);

}  // namespace anchoragg

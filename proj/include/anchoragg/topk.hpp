#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "anchoragg/aggregate.hpp"
#include "anchoragg/anchor.hpp"
#include "anchoragg/corpus.hpp"
#include "anchoragg/model.hpp"
#include "anchoragg/perturb.hpp"

namespace anchoragg {

/// Documents of S[c] by descending f̂(d, c); ties keep corpus order.
std::vector<std::size_t> order_documents(const DocumentProbabilityCache& cache, ClassId c);

struct Snapshot {
  double t_sec = 0.0;
  std::uint64_t calls = 0;
  std::size_t doc_index = 0;  // position in the traversal of the last committed document
  std::vector<std::string> words;
  std::vector<double> scores;
};

struct TopKOptions {
  std::size_t k = 20;
  bool candidate_filtering = false;
  bool adaptive_tau = false;
  /// Stop-listed and rare words are not estimated; they tally as non-anchors.
  bool skip_noncandidates = false;
  /// Divide the adaptive-threshold pseudo-score by per-class rather than
  /// dataset-wide occurrence counts.
  bool per_class_occurrences = false;
  std::uint64_t seed = 0;
  /// Worker threads for token estimation; 0 = hardware concurrency.
  std::size_t threads = 0;
  /// Documents estimated concurrently ahead of the reducer. Part of the
  /// result's identity: threshold and filter state are read once per window.
  std::size_t window = 1;
};

/// Per-document anchor decisions, reported after each commit.
using DecisionSink =
    std::function<void(std::size_t doc, ClassId c, std::span<const AnchorDecision> decisions)>;
using SnapshotSink = std::function<void(const Snapshot&)>;

struct TopKInputs {
  const Corpus& corpus;
  const Predictor& predictor;
  const Perturbator& perturbator;
  /// Predictions on the unperturbed corpus; defines S[c].
  const DocumentProbabilityCache& cache;
  /// Word statistics under the cache's class assignment.
  const WordStats& stats;
  const CandidateSet& candidates;
};

struct TopKResult {
  std::vector<RankedWord> terms;
  std::vector<Snapshot> snapshots;
  AnchorCounts counts;
  std::uint64_t calls = 0;
  std::size_t documents_processed = 0;
  std::size_t tokens_estimated = 0;
  std::size_t tokens_skipped = 0;
  std::vector<WordId> filtered;
  bool interrupted = false;
};

/// Optimistic-bound state for one class: remaining occurrences R_w of each
/// word in the not-yet-processed documents of S[c].
class PseudoScoreState {
 public:
  PseudoScoreState(const AnchorCounts& counts, const WordStats& stats, ClassId c, Aggregation agg,
                   std::span<const WordId> candidates, std::span<const std::uint64_t> remaining);

  std::optional<double> pseudo_score(WordId w) const { return scorer_.score(w); }
  std::optional<double> upper_bound(WordId w) const { return scorer_.upper_bound(w, remaining_[w]); }
  std::uint64_t remaining(WordId w) const { return remaining_[w]; }
  const Scorer& scorer() const { return scorer_; }

 private:
  Scorer scorer_;
  std::span<const std::uint64_t> remaining_;
};

/// Current top-k (best first) plus permanently filtered words.
struct TopKState {
  std::size_t k = 0;
  std::vector<RankedWord> heap;
  std::vector<bool> filtered;

  bool full() const { return heap.size() >= k; }
  bool contains(WordId w) const;
  const RankedWord& minimum() const { return heap.back(); }
};

/// True iff the heap is full, w is outside it, and upper_bound(w) is
/// strictly below the pseudo-score of the heap's minimum.
bool should_filter(const PseudoScoreState& state, const TopKState& topk, WordId w);

/// The anytime top-k computation for class c. Emits a snapshot after every
/// committed document; stops early (keeping everything committed so far)
/// when `stop` becomes true.
TopKResult run_anytime(const TopKInputs& in, const AnchorConfig& cfg, const Aggregation& agg,
                       ClassId c, const TopKOptions& options, const SnapshotSink& on_snapshot = {},
                       const DecisionSink& on_decisions = {},
                       const std::atomic<bool>* stop = nullptr);

/// Named bundles of the runtime optimizations.
struct ProfileOverlay {
  std::string name;
  std::size_t zeta = 500;
  double delta = 0.1;
  bool adaptive_tau = false;
  bool candidate_filtering = false;
  bool stopwords = false;
  std::uint64_t min_freq = 1;
  double sample_fraction = 1.0;
};

inline constexpr double kRelaxedDelta = 0.3;
inline constexpr std::size_t kBaselineZeta = 500;
inline constexpr std::size_t kReducedZeta = 50;
inline constexpr std::uint64_t kRareThreshold = 5;
inline constexpr double kSampleFraction = 0.5;

/// baseline | delta_relaxed | masking | adaptive_tau | filtered | sampled | optimized
ProfileOverlay optimization_profile(std::string_view name);
std::vector<std::string> profile_names();

}  // namespace anchoragg

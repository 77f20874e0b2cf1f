#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "anchoragg/anchor.hpp"
#include "anchoragg/corpus.hpp"

namespace anchoragg {

enum class AggregationKind { sq, av, av_minfreq, h, pr, base, pr_inverse };

struct Aggregation {
  AggregationKind kind = AggregationKind::pr;
  double alpha = 0.5;          // pr, pr_inverse
  std::uint64_t min_freq = 5;  // av_minfreq

  bool needs_anchors() const { return kind != AggregationKind::base; }
  /// G_h mixes counts of every class.
  bool needs_all_classes() const { return kind == AggregationKind::h; }
};

std::string_view aggregation_name(AggregationKind kind);
AggregationKind parse_aggregation(std::string_view name);

/// A⁺/A⁻ tallies per (word, class) over the documents ingested so far.
class AnchorCounts {
 public:
  AnchorCounts(std::size_t num_words, std::size_t num_classes);

  /// Adds one document's decisions to class c. Words are resolved through
  /// `stats`; a document id may be ingested once.
  void update(std::span<const AnchorDecision> decisions, ClassId c, const std::string& doc_id,
              const WordStats& stats);
  /// Direct tally, bypassing document bookkeeping.
  void add(WordId w, ClassId c, std::uint64_t plus, std::uint64_t minus);

  std::uint64_t a_plus(WordId w, ClassId c) const { return plus_[c][w]; }
  std::uint64_t a_minus(WordId w, ClassId c) const { return minus_[c][w]; }
  std::uint64_t occurrences(WordId w, ClassId c) const { return plus_[c][w] + minus_[c][w]; }
  std::uint64_t total_plus(ClassId c) const { return total_plus_[c]; }
  std::uint64_t total_minus(ClassId c) const { return total_minus_[c]; }
  std::size_t documents_processed(ClassId c) const { return docs_[c]; }
  /// |W(S_i[c])|: distinct words seen in class c.
  std::size_t distinct_words(ClassId c) const { return distinct_[c]; }

  std::size_t num_words() const { return num_words_; }
  std::size_t num_classes() const { return plus_.size(); }

  bool operator==(const AnchorCounts& other) const;

 private:
  std::size_t num_words_;
  std::vector<std::vector<std::uint64_t>> plus_;
  std::vector<std::vector<std::uint64_t>> minus_;
  std::vector<std::uint64_t> total_plus_;
  std::vector<std::uint64_t> total_minus_;
  std::vector<std::size_t> docs_;
  std::vector<std::size_t> distinct_;
  std::set<std::string> ingested_;
};

/// Closed-form maximum-likelihood estimates of the anchor/non-anchor mixture
/// for one class, plus the smoothed anchor distribution. Vectors are indexed
/// by word id; entries outside W(S[c]) stay 0.
struct ProbModelParams {
  double alpha = 0.5;
  std::vector<double> p_tilde;
  std::vector<double> q_tilde;
  std::vector<double> q_star;
  double q_min = 0.0;
  /// Additive smoothing shift β = |q_min| (0 when q_min >= 0).
  double beta = 0.0;
  std::size_t support = 0;  // |W(S[c])|
};

/// p̃ = A⁻/ΣA⁻, q̃ = (1/α)·A⁺/ΣA⁺ − (1/α − 1)·A⁻/ΣA⁻ over W(S[c]).
/// Throws InputError when either total is zero. q_star is left empty.
ProbModelParams mle_params(const AnchorCounts& counts, double alpha, ClassId c);

/// q̃* = (q̃ + β)/(1 + |W(S[c])|·β) with β = |q_min| when q_min < 0, else q̃.
ProbModelParams laplace_smooth(ProbModelParams params);

// Individual aggregations. nullopt means the word is unscored.
std::optional<double> g_sq(const AnchorCounts& counts, WordId w, ClassId c);
std::optional<double> g_av(const AnchorCounts& counts, WordId w, ClassId c,
                           std::optional<std::uint64_t> min_freq = std::nullopt,
                           const WordStats* stats = nullptr);
std::optional<double> g_h(const AnchorCounts& counts, WordId w, ClassId c,
                          std::span<const WordId> candidates);
std::optional<double> g_pr(const AnchorCounts& counts, double alpha, WordId w, ClassId c);
std::optional<double> g_base(const WordStats& stats, WordId w, ClassId c);
std::optional<double> g_pr_inverse(const AnchorCounts& counts, double alpha, WordId w, ClassId c);

/// Evaluates one aggregation for one class against a fixed view of the
/// counts. Class-wide quantities (totals, q_min, entropy range) are computed
/// once at construction, so per-word queries are O(|C|).
///
/// score() is the ranking score: the aggregation value, 0 for G_pr while its
/// model is still undefined, and nullopt for unscored words.
class Scorer {
 public:
  Scorer(const AnchorCounts& counts, const WordStats& stats, ClassId c, Aggregation agg,
         std::span<const WordId> candidates);

  std::optional<double> score(WordId w) const;

  /// Optimistic bound: the score if all `remaining` future occurrences of w in
  /// class c turn out to be anchors (non-anchors for G_pr⁻¹). Class-wide
  /// quantities other than the affected totals are held at their current
  /// values.
  std::optional<double> upper_bound(WordId w, std::uint64_t remaining) const;

  /// G̃_pr(w, c) for the adaptive threshold; 0 while the model is undefined.
  double pr_value(WordId w) const;

  const Aggregation& aggregation() const { return agg_; }
  bool model_defined() const { return model_defined_; }

 private:
  double entropy_of(WordId w, std::uint64_t extra_plus) const;
  double raw_q(std::uint64_t a_plus, std::uint64_t a_minus, std::uint64_t t_plus,
               std::uint64_t t_minus) const;
  double smooth(double q) const;

  const AnchorCounts& counts_;
  const WordStats& stats_;
  ClassId c_;
  Aggregation agg_;
  bool model_defined_ = false;
  double beta_ = 0.0;
  std::size_t support_ = 0;
  double h_min_ = 0.0;
  double h_max_ = 0.0;
};

struct RankedWord {
  WordId word;
  double score;
};

/// Strict total order used for every ranking: higher score first, then the
/// lexicographically smaller word.
inline bool ranks_before(const RankedWord& a, const RankedWord& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.word < b.word;
}

/// Offline top-k over `pool`, skipping unscored words.
std::vector<RankedWord> rank_words(const Scorer& scorer, std::span<const WordId> pool,
                                   std::size_t k);

/// Candidates that occur in class c's documents (per the stats' assignment).
std::vector<WordId> words_in_class(const WordStats& stats, std::span<const WordId> candidates,
                                   ClassId c);

/// One JSONL line per scored word.
std::string score_dump(const Scorer& scorer, const AnchorCounts& counts, const WordStats& stats,
                       std::span<const WordId> words, const std::vector<std::string>& classes,
                       ClassId c);

}  // namespace anchoragg

#include "anchoragg/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

namespace anchoragg {

namespace {

double q_tilde_value(double alpha, std::uint64_t a_plus, std::uint64_t a_minus,
                     std::uint64_t t_plus, std::uint64_t t_minus) {
  const double anchor_share = static_cast<double>(a_plus) / static_cast<double>(t_plus);
  const double other_share =
      t_minus == 0 ? 0.0 : static_cast<double>(a_minus) / static_cast<double>(t_minus);
  return (1.0 / alpha) * anchor_share - (1.0 / alpha - 1.0) * other_share;
}

double smooth_value(double q, double beta, std::size_t support) {
  if (beta <= 0.0) return q;
  return (q + beta) / (1.0 + static_cast<double>(support) * beta);
}

// Shannon entropy of w's G_sq profile across classes; A⁺(w,c) is raised by
// extra_plus. Returns nullopt when every class has G_sq = 0.
std::optional<double> sq_entropy(const AnchorCounts& counts, WordId w, ClassId c,
                                 std::uint64_t extra_plus) {
  double total = 0.0;
  std::vector<double> g(counts.num_classes());
  for (ClassId k = 0; k < counts.num_classes(); ++k) {
    const auto plus = counts.a_plus(w, k) + (k == c ? extra_plus : 0);
    g[k] = std::sqrt(static_cast<double>(plus));
    total += g[k];
  }
  if (total <= 0.0) return std::nullopt;
  double h = 0.0;
  for (double v : g) {
    const double share = v / total;
    if (share > 0.0) h -= share * std::log(share);
  }
  return h;
}

std::pair<double, double> entropy_range(const AnchorCounts& counts,
                                        std::span<const WordId> candidates, ClassId c) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (WordId w : candidates) {
    if (auto h = sq_entropy(counts, w, c, 0)) {
      lo = std::min(lo, *h);
      hi = std::max(hi, *h);
    }
  }
  if (lo > hi) return {0.0, 0.0};
  return {lo, hi};
}

double entropy_factor(double h, double h_min, double h_max) {
  if (!(h_max > h_min)) return 1.0;
  return std::clamp(1.0 - (h - h_min) / (h_max - h_min), 0.0, 1.0);
}

}  // namespace

std::string_view aggregation_name(AggregationKind kind) {
  switch (kind) {
    case AggregationKind::sq: return "sq";
    case AggregationKind::av: return "av";
    case AggregationKind::av_minfreq: return "av_minfreq";
    case AggregationKind::h: return "h";
    case AggregationKind::pr: return "pr";
    case AggregationKind::base: return "base";
    case AggregationKind::pr_inverse: return "pr_inverse";
  }
  return "?";
}

AggregationKind parse_aggregation(std::string_view name) {
  for (auto k : {AggregationKind::sq, AggregationKind::av, AggregationKind::av_minfreq,
                 AggregationKind::h, AggregationKind::pr, AggregationKind::base,
                 AggregationKind::pr_inverse}) {
    if (aggregation_name(k) == name) return k;
  }
  throw InputError("unknown aggregation '" + std::string(name) +
                   "' (expected sq, av, av_minfreq, h, pr, base, pr_inverse)");
}

AnchorCounts::AnchorCounts(std::size_t num_words, std::size_t num_classes)
    : num_words_(num_words),
      plus_(num_classes, std::vector<std::uint64_t>(num_words, 0)),
      minus_(num_classes, std::vector<std::uint64_t>(num_words, 0)),
      total_plus_(num_classes, 0),
      total_minus_(num_classes, 0),
      docs_(num_classes, 0),
      distinct_(num_classes, 0) {}

void AnchorCounts::add(WordId w, ClassId c, std::uint64_t plus, std::uint64_t minus) {
  if (c >= plus_.size() || w >= num_words_) throw InputError("anchor counts: index out of range");
  if (occurrences(w, c) == 0 && plus + minus > 0) ++distinct_[c];
  plus_[c][w] += plus;
  minus_[c][w] += minus;
  total_plus_[c] += plus;
  total_minus_[c] += minus;
}

void AnchorCounts::update(std::span<const AnchorDecision> decisions, ClassId c,
                          const std::string& doc_id, const WordStats& stats) {
  if (!ingested_.insert(doc_id).second) {
    throw InputError("anchor counts: document '" + doc_id + "' ingested twice");
  }
  for (const auto& d : decisions) {
    const WordId w = stats.id(d.token.word);
    add(w, c, d.is_anchor ? 1 : 0, d.is_anchor ? 0 : 1);
  }
  ++docs_[c];
}

bool AnchorCounts::operator==(const AnchorCounts& other) const {
  return plus_ == other.plus_ && minus_ == other.minus_ && docs_ == other.docs_;
}

ProbModelParams mle_params(const AnchorCounts& counts, double alpha, ClassId c) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InputError("alpha must be in (0, 1]");
  const auto t_plus = counts.total_plus(c);
  const auto t_minus = counts.total_minus(c);
  if (t_plus == 0 || t_minus == 0) {
    throw InputError("probabilistic model undefined: class has no anchors or no non-anchors");
  }
  ProbModelParams out;
  out.alpha = alpha;
  out.p_tilde.assign(counts.num_words(), 0.0);
  out.q_tilde.assign(counts.num_words(), 0.0);
  out.q_min = std::numeric_limits<double>::infinity();
  for (WordId w = 0; w < counts.num_words(); ++w) {
    if (counts.occurrences(w, c) == 0) continue;
    ++out.support;
    out.p_tilde[w] = static_cast<double>(counts.a_minus(w, c)) / static_cast<double>(t_minus);
    out.q_tilde[w] = q_tilde_value(alpha, counts.a_plus(w, c), counts.a_minus(w, c), t_plus, t_minus);
    out.q_min = std::min(out.q_min, out.q_tilde[w]);
  }
  return out;
}

ProbModelParams laplace_smooth(ProbModelParams params) {
  params.beta = params.q_min < 0.0 ? -params.q_min : 0.0;
  params.q_star.assign(params.q_tilde.size(), 0.0);
  for (std::size_t w = 0; w < params.q_tilde.size(); ++w) {
    // Words outside W(S[c]) carry p̃ = q̃ = 0 and stay outside the support.
    if (params.q_tilde[w] == 0.0 && params.p_tilde[w] == 0.0) continue;
    params.q_star[w] = smooth_value(params.q_tilde[w], params.beta, params.support);
  }
  return params;
}

std::optional<double> g_sq(const AnchorCounts& counts, WordId w, ClassId c) {
  if (counts.occurrences(w, c) == 0) return std::nullopt;
  return std::sqrt(static_cast<double>(counts.a_plus(w, c)));
}

std::optional<double> g_av(const AnchorCounts& counts, WordId w, ClassId c,
                           std::optional<std::uint64_t> min_freq, const WordStats* stats) {
  const auto occ = counts.occurrences(w, c);
  if (occ == 0) return std::nullopt;
  if (min_freq) {
    if (!stats) throw InputError("g_av: min_freq requires word statistics");
    if (stats->occurrences.at(w) < *min_freq) return std::nullopt;
  }
  return static_cast<double>(counts.a_plus(w, c)) / static_cast<double>(occ);
}

std::optional<double> g_h(const AnchorCounts& counts, WordId w, ClassId c,
                          std::span<const WordId> candidates) {
  if (counts.occurrences(w, c) == 0) return std::nullopt;
  const auto h = sq_entropy(counts, w, c, 0);
  if (!h) return std::nullopt;
  const auto [lo, hi] = entropy_range(counts, candidates, c);
  return entropy_factor(*h, lo, hi) * std::sqrt(static_cast<double>(counts.a_plus(w, c)));
}

std::optional<double> g_pr(const AnchorCounts& counts, double alpha, WordId w, ClassId c) {
  if (counts.occurrences(w, c) == 0) return std::nullopt;
  if (counts.total_plus(c) == 0 || counts.total_minus(c) == 0) return std::nullopt;
  return laplace_smooth(mle_params(counts, alpha, c)).q_star[w];
}

std::optional<double> g_base(const WordStats& stats, WordId w, ClassId c) {
  if (w >= stats.size() || stats.doc_frequency[w] == 0) return std::nullopt;
  return static_cast<double>(stats.class_doc_frequency.at(c)[w]) /
         static_cast<double>(stats.doc_frequency[w]);
}

std::optional<double> g_pr_inverse(const AnchorCounts& counts, double alpha, WordId w, ClassId c) {
  const auto pr = g_pr(counts, alpha, w, c);
  if (!pr || *pr <= 0.0) return std::nullopt;
  return 1.0 / *pr;
}

Scorer::Scorer(const AnchorCounts& counts, const WordStats& stats, ClassId c, Aggregation agg,
               std::span<const WordId> candidates)
    : counts_(counts), stats_(stats), c_(c), agg_(agg) {
  if (c >= counts.num_classes()) throw InputError("scorer: class out of range");
  if ((agg.kind == AggregationKind::pr || agg.kind == AggregationKind::pr_inverse) &&
      !(agg.alpha > 0.0 && agg.alpha <= 1.0)) {
    throw InputError("alpha must be in (0, 1]");
  }
  const auto t_plus = counts.total_plus(c);
  const auto t_minus = counts.total_minus(c);
  model_defined_ = t_plus > 0 && t_minus > 0;
  support_ = counts.distinct_words(c);
  if (model_defined_) {
    double q_min = std::numeric_limits<double>::infinity();
    for (WordId w = 0; w < counts.num_words(); ++w) {
      if (counts.occurrences(w, c) == 0) continue;
      q_min = std::min(q_min, raw_q(counts.a_plus(w, c), counts.a_minus(w, c), t_plus, t_minus));
    }
    beta_ = q_min < 0.0 ? -q_min : 0.0;
  }
  if (agg.kind == AggregationKind::h) {
    std::tie(h_min_, h_max_) = entropy_range(counts, candidates, c);
  }
}

double Scorer::raw_q(std::uint64_t a_plus, std::uint64_t a_minus, std::uint64_t t_plus,
                     std::uint64_t t_minus) const {
  return q_tilde_value(agg_.alpha, a_plus, a_minus, t_plus, t_minus);
}

double Scorer::smooth(double q) const { return smooth_value(q, beta_, support_); }

double Scorer::pr_value(WordId w) const {
  if (!model_defined_ || counts_.occurrences(w, c_) == 0) return 0.0;
  return smooth(raw_q(counts_.a_plus(w, c_), counts_.a_minus(w, c_), counts_.total_plus(c_),
                      counts_.total_minus(c_)));
}

double Scorer::entropy_of(WordId w, std::uint64_t extra_plus) const {
  return sq_entropy(counts_, w, c_, extra_plus).value_or(0.0);
}

std::optional<double> Scorer::score(WordId w) const {
  const auto occ = counts_.occurrences(w, c_);
  if (occ == 0) return std::nullopt;
  const auto plus = counts_.a_plus(w, c_);
  switch (agg_.kind) {
    case AggregationKind::sq:
      return std::sqrt(static_cast<double>(plus));
    case AggregationKind::av:
      return static_cast<double>(plus) / static_cast<double>(occ);
    case AggregationKind::av_minfreq:
      if (stats_.occurrences.at(w) < agg_.min_freq) return std::nullopt;
      return static_cast<double>(plus) / static_cast<double>(occ);
    case AggregationKind::h: {
      const auto h = sq_entropy(counts_, w, c_, 0);
      if (!h) return std::nullopt;
      return entropy_factor(*h, h_min_, h_max_) * std::sqrt(static_cast<double>(plus));
    }
    case AggregationKind::pr:
      return pr_value(w);
    case AggregationKind::base:
      return g_base(stats_, w, c_);
    case AggregationKind::pr_inverse: {
      const double pr = pr_value(w);
      if (pr <= 0.0) return std::nullopt;
      return 1.0 / pr;
    }
  }
  return std::nullopt;
}

std::optional<double> Scorer::upper_bound(WordId w, std::uint64_t remaining) const {
  if (remaining == 0) return score(w);
  const auto plus = counts_.a_plus(w, c_);
  const auto minus = counts_.a_minus(w, c_);
  const auto t_plus = counts_.total_plus(c_);
  const auto t_minus = counts_.total_minus(c_);
  switch (agg_.kind) {
    case AggregationKind::sq:
      return std::sqrt(static_cast<double>(plus + remaining));
    case AggregationKind::av:
      return static_cast<double>(plus + remaining) /
             static_cast<double>(plus + minus + remaining);
    case AggregationKind::av_minfreq:
      if (stats_.occurrences.at(w) < agg_.min_freq) return std::nullopt;
      return static_cast<double>(plus + remaining) /
             static_cast<double>(plus + minus + remaining);
    case AggregationKind::h: {
      const double h = entropy_of(w, remaining);
      return entropy_factor(h, h_min_, h_max_) * std::sqrt(static_cast<double>(plus + remaining));
    }
    case AggregationKind::pr:
      return smooth(raw_q(plus + remaining, minus, t_plus + remaining, t_minus));
    case AggregationKind::base:
      return g_base(stats_, w, c_);
    case AggregationKind::pr_inverse: {
      if (t_plus == 0) return std::numeric_limits<double>::infinity();
      const double q = smooth(raw_q(plus, minus + remaining, t_plus, t_minus + remaining));
      if (q <= 0.0) return std::numeric_limits<double>::infinity();
      return 1.0 / q;
    }
  }
  return std::nullopt;
}

std::vector<RankedWord> rank_words(const Scorer& scorer, std::span<const WordId> pool,
                                   std::size_t k) {
  std::vector<RankedWord> ranked;
  for (WordId w : pool) {
    if (auto s = scorer.score(w)) ranked.push_back({w, *s});
  }
  const std::size_t keep = std::min(k, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<long>(keep), ranked.end(),
                    ranks_before);
  ranked.resize(keep);
  return ranked;
}

std::vector<WordId> words_in_class(const WordStats& stats, std::span<const WordId> candidates,
                                   ClassId c) {
  std::vector<WordId> out;
  for (WordId w : candidates) {
    if (stats.class_occurrences.at(c)[w] > 0) out.push_back(w);
  }
  return out;
}

std::string score_dump(const Scorer& scorer, const AnchorCounts& counts, const WordStats& stats,
                       std::span<const WordId> words, const std::vector<std::string>& classes,
                       ClassId c) {
  std::string out;
  for (WordId w : words) {
    const auto s = scorer.score(w);
    if (!s) continue;
    nlohmann::json line = {{"word", stats.vocabulary[w]},
                           {"class", classes.at(c)},
                           {"a_plus", counts.a_plus(w, c)},
                           {"a_minus", counts.a_minus(w, c)},
                           {"score", *s},
                           {"agg", aggregation_name(scorer.aggregation().kind)}};
    out += line.dump();
    out.push_back('\n');
  }
  return out;
}

}  // namespace anchoragg

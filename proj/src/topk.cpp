#include "anchoragg/topk.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

namespace anchoragg {

namespace {

// Documents of every class, interleaved by per-class confidence rank.
std::vector<std::size_t> interleaved_order(const DocumentProbabilityCache& cache,
                                           std::size_t num_classes) {
  std::vector<std::vector<std::size_t>> per_class;
  for (ClassId k = 0; k < num_classes; ++k) per_class.push_back(order_documents(cache, k));
  std::vector<std::size_t> out;
  for (std::size_t rank = 0;; ++rank) {
    bool any = false;
    for (const auto& list : per_class) {
      if (rank < list.size()) {
        out.push_back(list[rank]);
        any = true;
      }
    }
    if (!any) break;
  }
  return out;
}

struct TokenTask {
  std::size_t slot;  // index within the window
  std::size_t position;
  double tau;
};

}  // namespace

std::vector<std::size_t> order_documents(const DocumentProbabilityCache& cache, ClassId c) {
  std::vector<std::size_t> docs;
  for (std::size_t i = 0; i < cache.assignment().size(); ++i) {
    if (cache.predicted(i) == c) docs.push_back(i);
  }
  std::stable_sort(docs.begin(), docs.end(), [&](std::size_t a, std::size_t b) {
    return cache.get(a)[c] > cache.get(b)[c];
  });
  return docs;
}

PseudoScoreState::PseudoScoreState(const AnchorCounts& counts, const WordStats& stats, ClassId c,
                                   Aggregation agg, std::span<const WordId> candidates,
                                   std::span<const std::uint64_t> remaining)
    : scorer_(counts, stats, c, agg, candidates), remaining_(remaining) {}

bool TopKState::contains(WordId w) const {
  return std::any_of(heap.begin(), heap.end(), [w](const RankedWord& r) { return r.word == w; });
}

bool should_filter(const PseudoScoreState& state, const TopKState& topk, WordId w) {
  if (topk.k == 0 || !topk.full() || topk.contains(w)) return false;
  const auto ub = state.upper_bound(w);
  if (!ub) return true;  // can never be scored
  return *ub < topk.minimum().score;
}

TopKResult run_anytime(const TopKInputs& in, const AnchorConfig& cfg, const Aggregation& agg,
                       ClassId c, const TopKOptions& options, const SnapshotSink& on_snapshot,
                       const DecisionSink& on_decisions, const std::atomic<bool>* stop) {
  cfg.validate();
  if (options.k < 1) throw InputError("k must be >= 1");
  if (options.window < 1) throw InputError("window must be >= 1");
  if (in.candidates.empty()) throw InputError("candidate set is empty");
  if (c >= in.corpus.num_classes()) throw InputError("class out of range");

  const auto start_time = std::chrono::steady_clock::now();
  const std::size_t n_words = in.stats.size();
  const CountingPredictor counted(in.predictor);

  const auto traversal = agg.needs_all_classes()
                             ? interleaved_order(in.cache, in.corpus.num_classes())
                             : order_documents(in.cache, c);

  std::vector<bool> is_candidate(n_words, false);
  for (WordId w : in.candidates) is_candidate[w] = true;
  const auto class_pool = words_in_class(in.stats, in.candidates, c);

  std::vector<std::uint64_t> remaining(n_words, 0);
  for (std::size_t doc : traversal) {
    if (in.cache.predicted(doc) != c) continue;
    for (const auto& t : in.corpus.document(doc).tokens) ++remaining[in.stats.id(t.word)];
  }

  TopKResult result{{}, {}, AnchorCounts(n_words, in.corpus.num_classes()), 0, 0, 0, 0, {}, false};
  AnchorCounts& counts = result.counts;
  TopKState topk{options.k, {}, std::vector<bool>(n_words, false)};

  tbb::task_arena arena(options.threads == 0 ? tbb::task_arena::automatic
                                             : static_cast<int>(options.threads));
  const Aggregation pr_agg{AggregationKind::pr, agg.alpha, agg.min_freq};

  for (std::size_t begin = 0; begin < traversal.size(); begin += options.window) {
    if (stop && stop->load()) {
      result.interrupted = true;
      break;
    }
    const std::size_t end = std::min(traversal.size(), begin + options.window);

    // Thresholds come from the state committed before this window.
    std::vector<std::optional<Scorer>> pr_scorers(in.corpus.num_classes());
    std::vector<WordSeq> words(end - begin);
    std::vector<std::vector<AnchorDecision>> decisions(end - begin);
    std::vector<TokenTask> tasks;
    for (std::size_t slot = 0; slot < end - begin; ++slot) {
      const std::size_t doc = traversal[begin + slot];
      const ClassId cls = in.cache.predicted(doc);
      const auto& document = in.corpus.document(doc);
      words[slot] = document.words();
      decisions[slot].resize(document.size());
      for (const auto& t : document.tokens) {
        auto& dec = decisions[slot][t.position];
        dec.token = t;
        const WordId w = in.stats.id(t.word);
        const bool skip = !agg.needs_anchors() ||
                          (options.skip_noncandidates && !is_candidate[w]) || topk.filtered[w];
        if (skip) {
          dec.skipped = true;
          continue;
        }
        double tau = cfg.tau;
        if (options.adaptive_tau) {
          if (!pr_scorers[cls]) pr_scorers[cls].emplace(counts, in.stats, cls, pr_agg, in.candidates);
          const auto n_w = options.per_class_occurrences ? in.stats.class_occurrences[cls][w]
                                                         : in.stats.occurrences[w];
          tau = adaptive_tau(cfg, pr_scorers[cls]->pr_value(w), std::max<std::uint64_t>(n_w, 1));
        }
        tasks.push_back({slot, t.position, tau});
      }
    }

    arena.execute([&] {
      tbb::parallel_for(std::size_t{0}, tasks.size(), [&](std::size_t i) {
        const auto& task = tasks[i];
        const std::size_t doc = traversal[begin + task.slot];
        Rng rng = token_stream(options.seed, in.corpus.document(doc).id, task.position);
        decisions[task.slot][task.position] =
            estimate_token(words[task.slot], task.position, in.cache.predicted(doc), counted,
                           in.perturbator, cfg, task.tau, rng);
      });
    });
    result.tokens_estimated += tasks.size();

    // Ordered reducer.
    for (std::size_t slot = 0; slot < end - begin; ++slot) {
      const std::size_t doc = traversal[begin + slot];
      const ClassId cls = in.cache.predicted(doc);
      const auto& document = in.corpus.document(doc);
      for (const auto& d : decisions[slot]) result.tokens_skipped += d.skipped ? 1 : 0;
      counts.update(decisions[slot], cls, document.id, in.stats);
      if (cls == c) {
        for (const auto& t : document.tokens) --remaining[in.stats.id(t.word)];
      }
      if (on_decisions) on_decisions(doc, cls, decisions[slot]);

      PseudoScoreState state(counts, in.stats, c, agg, in.candidates, remaining);
      std::vector<WordId> live;
      for (WordId w : class_pool) {
        if (!topk.filtered[w] && counts.occurrences(w, c) > 0) live.push_back(w);
      }
      topk.heap = rank_words(state.scorer(), live, options.k);
      if (options.candidate_filtering && topk.full()) {
        for (WordId w : class_pool) {
          if (topk.filtered[w]) continue;
          if (counts.occurrences(w, c) == 0 && remaining[w] == 0) continue;
          if (should_filter(state, topk, w)) topk.filtered[w] = true;
        }
      }

      ++result.documents_processed;
      Snapshot snap;
      snap.t_sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
      snap.calls = counted.calls();
      snap.doc_index = begin + slot;
      for (const auto& r : topk.heap) {
        snap.words.push_back(in.stats.vocabulary[r.word]);
        snap.scores.push_back(r.score);
      }
      if (on_snapshot) on_snapshot(snap);
      result.snapshots.push_back(std::move(snap));
    }
  }

  result.terms = topk.heap;
  result.calls = counted.calls();
  for (WordId w = 0; w < n_words; ++w) {
    if (topk.filtered[w]) result.filtered.push_back(w);
  }
  return result;
}

ProfileOverlay optimization_profile(std::string_view name) {
  ProfileOverlay p;
  p.name = std::string(name);
  p.zeta = kBaselineZeta;
  if (name == "baseline") return p;
  if (name == "delta_relaxed") {
    p.delta = kRelaxedDelta;
  } else if (name == "masking") {
    p.zeta = kReducedZeta;
  } else if (name == "adaptive_tau") {
    p.adaptive_tau = true;
  } else if (name == "filtered") {
    p.candidate_filtering = true;
  } else if (name == "sampled") {
    p.sample_fraction = kSampleFraction;
  } else if (name == "optimized") {
    p.zeta = kReducedZeta;
    p.delta = kRelaxedDelta;
    p.adaptive_tau = true;
    p.candidate_filtering = true;
    p.stopwords = true;
    p.min_freq = kRareThreshold;
  } else {
    throw InputError("unknown profile '" + std::string(name) + "'");
  }
  return p;
}

std::vector<std::string> profile_names() {
  return {"baseline", "delta_relaxed", "masking", "adaptive_tau", "filtered", "sampled",
          "optimized"};
}

}  // namespace anchoragg

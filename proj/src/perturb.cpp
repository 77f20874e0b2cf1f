#include "anchoragg/perturb.hpp"

#include <algorithm>
#include <numeric>

namespace anchoragg {

CandidatePool CandidatePool::from_weights(std::vector<std::string> words,
                                          std::vector<double> weights) {
  if (words.size() != weights.size()) throw InputError("candidate pool: size mismatch");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw InputError("candidate pool: negative weight");
    total += w;
  }
  CandidatePool pool;
  pool.words = std::move(words);
  pool.weights = std::move(weights);
  if (total <= 0.0) {
    // All-zero weights degrade to a uniform draw.
    std::fill(pool.weights.begin(), pool.weights.end(), 1.0);
    total = static_cast<double>(pool.weights.size());
  }
  double run = 0.0;
  for (double& w : pool.weights) {
    w /= total;
    run += w;
    pool.cumulative.push_back(run);
  }
  return pool;
}

const std::string& CandidatePool::draw(Rng& rng) const {
  const double u = rng.uniform() * cumulative.back();
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  if (it == cumulative.end()) --it;
  return words[static_cast<std::size_t>(it - cumulative.begin())];
}

std::vector<std::size_t> choose_masked_positions(std::size_t length,
                                                 std::span<const std::size_t> keep,
                                                 double mask_prob, Rng& rng) {
  std::vector<bool> kept(length, false);
  for (std::size_t k : keep) {
    if (k >= length) throw InputError("keep position out of range");
    kept[k] = true;
  }
  std::vector<std::size_t> masked;
  for (std::size_t i = 0; i < length; ++i) {
    if (kept[i]) continue;
    if (rng.bernoulli(mask_prob)) masked.push_back(i);
  }
  return masked;
}

UnigramPerturbator::UnigramPerturbator(CandidatePool pool, double mask_prob)
    : pool_(std::move(pool)), mask_prob_(mask_prob) {
  if (pool_.empty()) throw InputError("perturbator: empty candidate pool");
  if (!(mask_prob_ > 0.0 && mask_prob_ <= 1.0)) {
    throw InputError("perturbator: mask probability must be in (0, 1]");
  }
}

WordSeq UnigramPerturbator::sample(const WordSeq& doc, std::span<const std::size_t> keep,
                                   Rng& rng) const {
  WordSeq out = doc;
  for (std::size_t i : choose_masked_positions(doc.size(), keep, mask_prob_, rng)) {
    out[i] = pool_.draw(rng);
  }
  return out;
}

UnigramPerturbator build_unigram_perturbator(const WordStats& stats, std::size_t zeta,
                                             double mask_prob) {
  if (zeta < 1) throw InputError("perturbator: zeta must be >= 1");
  if (stats.size() == 0) throw InputError("perturbator: empty vocabulary");
  std::vector<WordId> order(stats.size());
  std::iota(order.begin(), order.end(), 0);
  // Ids are lexicographic, so a stable sort on frequency keeps that tie order.
  std::stable_sort(order.begin(), order.end(), [&](WordId a, WordId b) {
    return stats.occurrences[a] > stats.occurrences[b];
  });
  order.resize(std::min(zeta, order.size()));
  std::vector<std::string> words;
  std::vector<double> weights;
  for (WordId w : order) {
    words.push_back(stats.vocabulary[w]);
    weights.push_back(static_cast<double>(stats.occurrences[w]));
  }
  return UnigramPerturbator(CandidatePool::from_weights(std::move(words), std::move(weights)),
                            mask_prob);
}

}  // namespace anchoragg

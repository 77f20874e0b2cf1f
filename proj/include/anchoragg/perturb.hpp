#pragma once

#include <span>
#include <string>
#include <vector>

#include "anchoragg/corpus.hpp"
#include "anchoragg/rng.hpp"
#include "anchoragg/types.hpp"

namespace anchoragg {

/// Weighted replacement candidates for one masked position.
struct CandidatePool {
  std::vector<std::string> words;
  std::vector<double> weights;     // normalized, same length as words
  std::vector<double> cumulative;  // running sum of weights

  static CandidatePool from_weights(std::vector<std::string> words, std::vector<double> weights);
  const std::string& draw(Rng& rng) const;
  bool empty() const { return words.empty(); }
};

/// The distribution Δ_d: mask a subset of positions and refill them.
/// Positions listed in `keep` are never altered and the output has the input's
/// length.
class Perturbator {
 public:
  virtual ~Perturbator() = default;
  virtual WordSeq sample(const WordSeq& doc, std::span<const std::size_t> keep,
                         Rng& rng) const = 0;
};

/// Masks each non-kept position independently with `mask_prob`.
std::vector<std::size_t> choose_masked_positions(std::size_t length,
                                                 std::span<const std::size_t> keep,
                                                 double mask_prob, Rng& rng);

/// Refills masks from the ζ most frequent corpus words, weighted by N_w.
class UnigramPerturbator final : public Perturbator {
 public:
  UnigramPerturbator(CandidatePool pool, double mask_prob);

  WordSeq sample(const WordSeq& doc, std::span<const std::size_t> keep, Rng& rng) const override;

  const CandidatePool& pool() const { return pool_; }
  double mask_prob() const { return mask_prob_; }

 private:
  CandidatePool pool_;
  double mask_prob_;
};

/// Pool = ζ most frequent words (ties lexicographic), weights ∝ N_w.
UnigramPerturbator build_unigram_perturbator(const WordStats& stats, std::size_t zeta,
                                             double mask_prob);

}  // namespace anchoragg

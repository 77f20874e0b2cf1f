#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "anchoragg/corpus.hpp"
#include "anchoragg/model.hpp"
#include "anchoragg/perturb.hpp"
#include "anchoragg/rng.hpp"

namespace anchoragg {

struct AnchorConfig {
  double tau = 0.95;
  double delta = 0.1;
  std::size_t batch_size = 10;
  std::size_t max_samples = 100;
  double omega = 0.4;
  double tau_floor = 0.55;

  /// Throws InputError when a field is out of range.
  void validate() const;
};

struct PrecisionEstimate {
  std::size_t successes = 0;
  std::size_t trials = 0;
  double point = 0.0;
  double lower = 0.0;
  double upper = 1.0;
};

struct AnchorDecision {
  Token token;
  bool is_anchor = false;
  /// True when the token was not estimated (filtered word); tallied as a
  /// non-anchor with no samples spent.
  bool skipped = false;
  double tau_eff = 0.0;
  PrecisionEstimate estimate;
  std::size_t samples_used = 0;
};

/// Two-sided Hoeffding interval p̂ ± sqrt(ln(2/δ) / (2n)), clipped to [0, 1].
std::pair<double, double> confidence_bounds(std::size_t successes, std::size_t trials,
                                            double delta);

/// clamp(τ − ω·pseudo_gpr/n_w, tau_floor, τ).
double adaptive_tau(const AnchorConfig& cfg, double pseudo_gpr, std::uint64_t n_w);

/// Sequentially tests whether keeping `position` holds the prediction of `doc`
/// with precision >= tau_eff. Samples come in batches; it stops as soon as
/// the lower bound reaches tau_eff (anchor) or the upper bound falls below
/// it (non-anchor). When the budget runs out the point estimate decides.
AnchorDecision estimate_token(const WordSeq& doc, std::size_t position, ClassId original,
                              const Predictor& f, const Perturbator& p, const AnchorConfig& cfg,
                              double tau_eff, Rng& rng);

/// Per-token threshold; returning nullopt skips the token.
using ThresholdSource = std::function<std::optional<double>(const Token&)>;

ThresholdSource constant_threshold(double tau);

/// One decision per token, in position order. Each token draws from its own
/// stream keyed by (seed, document id, position).
std::vector<AnchorDecision> anchors_of_document(const Document& d, ClassId original,
                                                const Predictor& f, const Perturbator& p,
                                                const AnchorConfig& cfg,
                                                const ThresholdSource& threshold,
                                                std::uint64_t seed);

/// Stream used for token `position` of the document with id `doc_id`.
inline Rng token_stream(std::uint64_t seed, std::string_view doc_id, std::size_t position) {
  return Rng::stream(seed, "perturb", hash_tag(doc_id), position);
}

}  // namespace anchoragg

#include "anchoragg/anchor.hpp"

#include <algorithm>
#include <cmath>

namespace anchoragg {

void AnchorConfig::validate() const {
  if (!(tau > 0.0 && tau <= 1.0)) throw InputError("tau must be in (0, 1]");
  if (!(delta > 0.0 && delta < 1.0)) throw InputError("delta must be in (0, 1)");
  if (batch_size < 1) throw InputError("batch size must be >= 1");
  if (max_samples < 1) throw InputError("max samples must be >= 1");
  if (!(omega >= 0.0)) throw InputError("omega must be >= 0");
  if (!(tau_floor <= tau)) throw InputError("tau floor must not exceed tau");
}

std::pair<double, double> confidence_bounds(std::size_t successes, std::size_t trials,
                                            double delta) {
  if (trials == 0) throw InputError("confidence_bounds: no trials");
  if (successes > trials) throw InputError("confidence_bounds: successes exceed trials");
  const double n = static_cast<double>(trials);
  const double point = static_cast<double>(successes) / n;
  const double eps = std::sqrt(std::log(2.0 / delta) / (2.0 * n));
  return {std::max(0.0, point - eps), std::min(1.0, point + eps)};
}

double adaptive_tau(const AnchorConfig& cfg, double pseudo_gpr, std::uint64_t n_w) {
  if (n_w == 0) throw InputError("adaptive_tau: N_w must be >= 1");
  const double relaxed = cfg.tau - cfg.omega * pseudo_gpr / static_cast<double>(n_w);
  return std::clamp(relaxed, cfg.tau_floor, cfg.tau);
}

AnchorDecision estimate_token(const WordSeq& doc, std::size_t position, ClassId original,
                              const Predictor& f, const Perturbator& p, const AnchorConfig& cfg,
                              double tau_eff, Rng& rng) {
  if (position >= doc.size()) throw InputError("estimate_token: position out of range");
  AnchorDecision out;
  out.token = Token{doc[position], position};
  out.tau_eff = tau_eff;
  const std::size_t keep[] = {position};

  PrecisionEstimate& est = out.estimate;
  std::vector<WordSeq> batch;
  bool decided = false;
  while (est.trials < cfg.max_samples) {
    const std::size_t n = std::min(cfg.batch_size, cfg.max_samples - est.trials);
    batch.clear();
    for (std::size_t i = 0; i < n; ++i) batch.push_back(p.sample(doc, keep, rng));
    const auto probs = f.predict_proba_batch(batch);
    if (probs.size() != batch.size()) throw RuntimeFailure("predictor returned misaligned batch");
    for (const auto& pr : probs) {
      if (argmax_class(pr) == original) ++est.successes;
    }
    est.trials += n;
    const auto [lo, hi] = confidence_bounds(est.successes, est.trials, cfg.delta);
    est.lower = lo;
    est.upper = hi;
    if (lo >= tau_eff) {
      out.is_anchor = true;
      decided = true;
      break;
    }
    if (hi < tau_eff) {
      decided = true;
      break;
    }
  }
  est.point = static_cast<double>(est.successes) / static_cast<double>(est.trials);
  if (!decided) out.is_anchor = est.point >= tau_eff;
  out.samples_used = est.trials;
  return out;
}

ThresholdSource constant_threshold(double tau) {
  return [tau](const Token&) -> std::optional<double> { return tau; };
}

std::vector<AnchorDecision> anchors_of_document(const Document& d, ClassId original,
                                                const Predictor& f, const Perturbator& p,
                                                const AnchorConfig& cfg,
                                                const ThresholdSource& threshold,
                                                std::uint64_t seed) {
  const WordSeq words = d.words();
  std::vector<AnchorDecision> out;
  out.reserve(words.size());
  for (const auto& t : d.tokens) {
    const auto tau_eff = threshold(t);
    if (!tau_eff) {
      AnchorDecision skip;
      skip.token = t;
      skip.skipped = true;
      out.push_back(std::move(skip));
      continue;
    }
    Rng rng = token_stream(seed, d.id, t.position);
    out.push_back(estimate_token(words, t.position, original, f, p, cfg, *tau_eff, rng));
  }
  return out;
}

}  // namespace anchoragg

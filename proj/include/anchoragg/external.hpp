#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <vector>

#include "anchoragg/model.hpp"
#include "anchoragg/perturb.hpp"
#include "anchoragg/transport.hpp"

namespace anchoragg {

/// Predictor backed by an external service.
///
/// Request:  {"texts": [string, ...]}
/// Response: {"probs": [[float, ...], ...], "classes": [string, ...]}
///
/// Texts are the document's words joined by single spaces. Large batches are
/// split into chunks of `batch_size`; up to `max_in_flight` chunks are sent
/// concurrently when the transport allows it. The class list is fixed by the
/// first response of the session and every later response must repeat it.
class ExternalPredictorClient final : public Predictor {
 public:
  struct Options {
    std::size_t batch_size = 64;
    std::size_t max_in_flight = 4;
  };

  ExternalPredictorClient(std::unique_ptr<JsonTransport> transport, Options options);
  ExternalPredictorClient(std::unique_ptr<JsonTransport> transport)
      : ExternalPredictorClient(std::move(transport), Options{}) {}

  const std::vector<std::string>& classes() const override { return classes_; }
  Probabilities predict_proba(const WordSeq& words) const override;
  std::vector<Probabilities> predict_proba_batch(std::span<const WordSeq> batch) const override;

 private:
  std::vector<Probabilities> send_chunk(std::span<const WordSeq> chunk) const;

  std::unique_ptr<JsonTransport> transport_;
  Options options_;
  std::vector<std::string> classes_;
};

/// Perturbator whose replacement candidates come from an external service
/// (e.g. a masked language model).
///
/// Request:  {"text": string, "masked_positions": [int, ...], "zeta": int}
/// Response: {"candidates": [[{"word": string, "weight": float}, ...], ...]}
///
/// The masking law is the same as the unigram perturbator's; candidate lists
/// are aligned with masked_positions and capped at ζ entries.
class ExternalPerturbatorClient final : public Perturbator {
 public:
  ExternalPerturbatorClient(std::unique_ptr<JsonTransport> transport, std::size_t zeta,
                            double mask_prob);

  WordSeq sample(const WordSeq& doc, std::span<const std::size_t> keep, Rng& rng) const override;

 private:
  std::unique_ptr<JsonTransport> transport_;
  std::size_t zeta_;
  double mask_prob_;
};

std::string join_words(const WordSeq& words);

}  // namespace anchoragg

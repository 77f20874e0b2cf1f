#include "anchoragg/external.hpp"

#include <cmath>
#include <future>

namespace anchoragg {

namespace {

Probabilities parse_row(const nlohmann::json& row, std::size_t n_classes) {
  if (!row.is_array() || row.size() != n_classes) {
    throw RuntimeFailure("malformed response: probability row has wrong length");
  }
  Probabilities out;
  double sum = 0.0;
  for (const auto& v : row) {
    if (!v.is_number()) throw RuntimeFailure("malformed response: non-numeric probability");
    const double p = v.get<double>();
    if (!(p >= 0.0)) throw RuntimeFailure("malformed response: negative probability");
    out.push_back(p);
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw RuntimeFailure("malformed response: probabilities do not sum to 1");
  }
  return out;
}

}  // namespace

std::string join_words(const WordSeq& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out.push_back(' ');
    out += words[i];
  }
  return out;
}

ExternalPredictorClient::ExternalPredictorClient(std::unique_ptr<JsonTransport> transport,
                                                 Options options)
    : transport_(std::move(transport)), options_(options) {
  if (options_.batch_size == 0) throw InputError("external predictor: batch size must be >= 1");
  if (options_.max_in_flight == 0) options_.max_in_flight = 1;
  // Handshake: an empty request fixes the session's class list.
  const auto reply = transport_->exchange({{"texts", nlohmann::json::array()}});
  if (!reply.is_object() || !reply.contains("classes") || !reply["classes"].is_array() ||
      reply["classes"].empty()) {
    throw RuntimeFailure("malformed response: missing class list");
  }
  classes_ = reply["classes"].get<std::vector<std::string>>();
}

std::vector<Probabilities> ExternalPredictorClient::send_chunk(
    std::span<const WordSeq> chunk) const {
  nlohmann::json texts = nlohmann::json::array();
  for (const auto& words : chunk) texts.push_back(join_words(words));
  const auto reply = transport_->exchange({{"texts", texts}});
  if (!reply.is_object() || !reply.contains("probs") || !reply["probs"].is_array()) {
    throw RuntimeFailure("malformed response: missing probs");
  }
  if (reply.contains("classes") && reply["classes"] != nlohmann::json(classes_)) {
    throw RuntimeFailure("malformed response: class list changed within session");
  }
  const auto& probs = reply["probs"];
  if (probs.size() != chunk.size()) {
    throw RuntimeFailure("malformed response: expected " + std::to_string(chunk.size()) +
                         " rows, got " + std::to_string(probs.size()));
  }
  std::vector<Probabilities> out;
  out.reserve(chunk.size());
  for (const auto& row : probs) out.push_back(parse_row(row, classes_.size()));
  return out;
}

Probabilities ExternalPredictorClient::predict_proba(const WordSeq& words) const {
  return send_chunk(std::span<const WordSeq>(&words, 1)).front();
}

std::vector<Probabilities> ExternalPredictorClient::predict_proba_batch(
    std::span<const WordSeq> batch) const {
  std::vector<std::span<const WordSeq>> chunks;
  for (std::size_t off = 0; off < batch.size(); off += options_.batch_size) {
    chunks.push_back(batch.subspan(off, std::min(options_.batch_size, batch.size() - off)));
  }
  std::vector<Probabilities> out;
  out.reserve(batch.size());
  if (!transport_->concurrent() || options_.max_in_flight == 1 || chunks.size() <= 1) {
    for (auto chunk : chunks) {
      auto rows = send_chunk(chunk);
      std::move(rows.begin(), rows.end(), std::back_inserter(out));
    }
    return out;
  }
  for (std::size_t start = 0; start < chunks.size(); start += options_.max_in_flight) {
    const std::size_t end = std::min(chunks.size(), start + options_.max_in_flight);
    std::vector<std::future<std::vector<Probabilities>>> inflight;
    for (std::size_t i = start; i < end; ++i) {
      inflight.push_back(
          std::async(std::launch::async, [this, chunk = chunks[i]] { return send_chunk(chunk); }));
    }
    for (auto& f : inflight) {
      auto rows = f.get();
      std::move(rows.begin(), rows.end(), std::back_inserter(out));
    }
  }
  return out;
}

ExternalPerturbatorClient::ExternalPerturbatorClient(std::unique_ptr<JsonTransport> transport,
                                                     std::size_t zeta, double mask_prob)
    : transport_(std::move(transport)), zeta_(zeta), mask_prob_(mask_prob) {
  if (zeta_ < 1) throw InputError("external perturbator: zeta must be >= 1");
  if (!(mask_prob_ > 0.0 && mask_prob_ <= 1.0)) {
    throw InputError("external perturbator: mask probability must be in (0, 1]");
  }
}

WordSeq ExternalPerturbatorClient::sample(const WordSeq& doc, std::span<const std::size_t> keep,
                                          Rng& rng) const {
  const auto masked = choose_masked_positions(doc.size(), keep, mask_prob_, rng);
  WordSeq out = doc;
  if (masked.empty()) return out;
  const auto reply = transport_->exchange(
      {{"text", join_words(doc)}, {"masked_positions", masked}, {"zeta", zeta_}});
  if (!reply.is_object() || !reply.contains("candidates") || !reply["candidates"].is_array() ||
      reply["candidates"].size() != masked.size()) {
    throw RuntimeFailure("malformed response: candidates not aligned with masked positions");
  }
  for (std::size_t m = 0; m < masked.size(); ++m) {
    const auto& list = reply["candidates"][m];
    if (!list.is_array() || list.empty() || list.size() > zeta_) {
      throw RuntimeFailure("malformed response: candidate list must have 1..zeta entries");
    }
    std::vector<std::string> words;
    std::vector<double> weights;
    for (const auto& cand : list) {
      const double w = cand.at("weight").get<double>();
      if (!(w >= 0.0)) throw RuntimeFailure("malformed response: negative candidate weight");
      words.push_back(cand.at("word").get<std::string>());
      weights.push_back(w);
    }
    out[masked[m]] = CandidatePool::from_weights(std::move(words), std::move(weights)).draw(rng);
  }
  return out;
}

}  // namespace anchoragg

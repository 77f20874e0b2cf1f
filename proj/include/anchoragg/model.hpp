#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "anchoragg/corpus.hpp"
#include "anchoragg/types.hpp"

namespace anchoragg {

using Probabilities = std::vector<double>;

/// Black-box classifier with class-probability access. Implementations must
/// be safe to call concurrently.
class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual const std::vector<std::string>& classes() const = 0;
  std::size_t num_classes() const { return classes().size(); }

  virtual Probabilities predict_proba(const WordSeq& words) const = 0;

  /// Results are positionally aligned with `batch`.
  virtual std::vector<Probabilities> predict_proba_batch(std::span<const WordSeq> batch) const;

  ClassId predict(const WordSeq& words) const;
};

/// argmax with ties resolved to the lowest class index.
ClassId argmax_class(std::span<const double> probs);

Probabilities predict_proba(const Predictor& p, const Document& d);
ClassId predict(const Predictor& p, const Document& d);

/// Fraction of documents whose prediction matches the label.
double accuracy(const Predictor& p, const Corpus& corpus);

/// Predicted class of every document, in corpus order.
std::vector<ClassId> classify(const Predictor& p, const Corpus& corpus);

/// Counts per-document predictor invocations made through it.
class CountingPredictor final : public Predictor {
 public:
  explicit CountingPredictor(const Predictor& inner) : inner_(inner) {}

  const std::vector<std::string>& classes() const override { return inner_.classes(); }
  Probabilities predict_proba(const WordSeq& words) const override;
  std::vector<Probabilities> predict_proba_batch(std::span<const WordSeq> batch) const override;

  std::uint64_t calls() const { return calls_.load(); }

 private:
  const Predictor& inner_;
  mutable std::atomic<std::uint64_t> calls_{0};
};

/// Memoizes f̂ on the unperturbed corpus, keyed by document index.
class DocumentProbabilityCache {
 public:
  DocumentProbabilityCache(const Predictor& p, const Corpus& corpus);

  const Probabilities& get(std::size_t doc) const;
  ClassId predicted(std::size_t doc) const;
  std::span<const ClassId> assignment() const { return predicted_; }

 private:
  std::vector<Probabilities> probs_;
  std::vector<ClassId> predicted_;
};

struct TrainOptions {
  std::size_t epochs = 200;
  double learning_rate = 0.5;
  double l2 = 1e-2;
  std::uint64_t seed = 0;
  /// Fraction of documents held out for checkpoint selection; 0 disables.
  double validation_fraction = 0.0;
};

struct TrainReport {
  std::vector<double> loss_history;  // objective after each epoch
  double train_accuracy = 0.0;
  double validation_accuracy = 0.0;
  std::size_t best_epoch = 0;
};

/// Multinomial logistic regression over raw token counts with L2 penalty.
class BowClassifier final : public Predictor {
 public:
  BowClassifier() = default;
  BowClassifier(std::vector<std::string> classes, std::vector<std::string> vocabulary);

  const std::vector<std::string>& classes() const override { return classes_; }
  Probabilities predict_proba(const WordSeq& words) const override;

  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  /// Row c holds the weights of class c over the vocabulary.
  std::vector<std::vector<double>>& weights() { return weights_; }
  const std::vector<std::vector<double>>& weights() const { return weights_; }
  std::vector<double>& bias() { return bias_; }
  const std::vector<double>& bias() const { return bias_; }

  /// Logits before the softmax.
  std::vector<double> scores(const WordSeq& words) const;

  void save(const std::filesystem::path& path) const;
  static BowClassifier load(const std::filesystem::path& path);
  std::string to_json() const;
  static BowClassifier from_json(const std::string& text);

 private:
  void index_vocabulary();

  std::vector<std::string> classes_;
  std::vector<std::string> vocabulary_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<double>> weights_;
  std::vector<double> bias_;
};

BowClassifier train_bow(const Corpus& corpus, const TrainOptions& options,
                        TrainReport* report = nullptr);

/// Mean cross-entropy plus (l2/2)·||W||² of `model` on `corpus`.
double training_objective(const BowClassifier& model, const Corpus& corpus, double l2);

/// Numerically stable softmax.
Probabilities softmax(std::span<const double> logits);

}  // namespace anchoragg

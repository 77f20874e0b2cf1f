#include "anchoragg/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "anchoragg/rng.hpp"

namespace anchoragg {

namespace {

constexpr int kModelFormatVersion = 1;
constexpr const char* kModelFormatName = "anchoragg-bow";

struct SparseRow {
  std::vector<std::pair<std::size_t, double>> entries;  // (feature, count)
  ClassId label = 0;
};

std::vector<SparseRow> featurize(const BowClassifier& model, const Corpus& corpus,
                                 std::span<const std::size_t> rows) {
  std::unordered_map<std::string, std::size_t> index;
  const auto& vocab = model.vocabulary();
  for (std::size_t i = 0; i < vocab.size(); ++i) index.emplace(vocab[i], i);
  std::vector<SparseRow> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) {
    std::unordered_map<std::size_t, double> counts;
    for (const auto& t : corpus.document(r).tokens) {
      auto it = index.find(t.word);
      if (it != index.end()) counts[it->second] += 1.0;
    }
    SparseRow row;
    row.entries.assign(counts.begin(), counts.end());
    std::sort(row.entries.begin(), row.entries.end());
    row.label = corpus.label(r);
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<double> logits_of(const BowClassifier& m, const SparseRow& row) {
  std::vector<double> z = m.bias();
  for (std::size_t c = 0; c < z.size(); ++c) {
    for (auto [f, v] : row.entries) z[c] += m.weights()[c][f] * v;
  }
  return z;
}

double objective(const BowClassifier& m, std::span<const SparseRow> rows, double l2) {
  double loss = 0.0;
  for (const auto& row : rows) {
    auto z = logits_of(m, row);
    const double zmax = *std::max_element(z.begin(), z.end());
    double lse = 0.0;
    for (double v : z) lse += std::exp(v - zmax);
    loss += (std::log(lse) + zmax) - z[row.label];
  }
  loss /= static_cast<double>(rows.size());
  double reg = 0.0;
  for (const auto& wc : m.weights()) {
    for (double w : wc) reg += w * w;
  }
  return loss + 0.5 * l2 * reg;
}

double row_accuracy(const BowClassifier& m, std::span<const SparseRow> rows) {
  if (rows.empty()) return 0.0;
  std::size_t hit = 0;
  for (const auto& row : rows) {
    auto z = logits_of(m, row);
    if (argmax_class(z) == row.label) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(rows.size());
}

}  // namespace

std::vector<Probabilities> Predictor::predict_proba_batch(std::span<const WordSeq> batch) const {
  std::vector<Probabilities> out;
  out.reserve(batch.size());
  for (const auto& words : batch) out.push_back(predict_proba(words));
  return out;
}

ClassId Predictor::predict(const WordSeq& words) const { return argmax_class(predict_proba(words)); }

ClassId argmax_class(std::span<const double> probs) {
  if (probs.empty()) throw RuntimeFailure("empty probability vector");
  ClassId best = 0;
  for (ClassId c = 1; c < probs.size(); ++c) {
    if (probs[c] > probs[best]) best = c;
  }
  return best;
}

Probabilities predict_proba(const Predictor& p, const Document& d) {
  return p.predict_proba(d.words());
}

ClassId predict(const Predictor& p, const Document& d) { return p.predict(d.words()); }

std::vector<ClassId> classify(const Predictor& p, const Corpus& corpus) {
  std::vector<WordSeq> batch;
  batch.reserve(corpus.size());
  for (const auto& d : corpus.documents()) batch.push_back(d.words());
  std::vector<ClassId> out;
  out.reserve(corpus.size());
  for (const auto& probs : p.predict_proba_batch(batch)) out.push_back(argmax_class(probs));
  return out;
}

double accuracy(const Predictor& p, const Corpus& corpus) {
  if (corpus.empty()) throw InputError("accuracy: empty corpus");
  const auto predicted = classify(p, corpus);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (predicted[i] == corpus.label(i)) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(corpus.size());
}

Probabilities CountingPredictor::predict_proba(const WordSeq& words) const {
  calls_.fetch_add(1);
  return inner_.predict_proba(words);
}

std::vector<Probabilities> CountingPredictor::predict_proba_batch(
    std::span<const WordSeq> batch) const {
  calls_.fetch_add(batch.size());
  return inner_.predict_proba_batch(batch);
}

DocumentProbabilityCache::DocumentProbabilityCache(const Predictor& p, const Corpus& corpus) {
  std::vector<WordSeq> batch;
  batch.reserve(corpus.size());
  for (const auto& d : corpus.documents()) batch.push_back(d.words());
  probs_ = p.predict_proba_batch(batch);
  if (probs_.size() != corpus.size()) throw RuntimeFailure("predictor returned misaligned batch");
  predicted_.reserve(probs_.size());
  for (const auto& pr : probs_) predicted_.push_back(argmax_class(pr));
}

const Probabilities& DocumentProbabilityCache::get(std::size_t doc) const { return probs_.at(doc); }

ClassId DocumentProbabilityCache::predicted(std::size_t doc) const { return predicted_.at(doc); }

Probabilities softmax(std::span<const double> logits) {
  Probabilities out(logits.begin(), logits.end());
  if (out.empty()) return out;
  const double zmax = *std::max_element(out.begin(), out.end());
  double sum = 0.0;
  for (double& v : out) {
    v = std::exp(v - zmax);
    sum += v;
  }
  for (double& v : out) v /= sum;
  return out;
}

BowClassifier::BowClassifier(std::vector<std::string> classes, std::vector<std::string> vocabulary)
    : classes_(std::move(classes)),
      vocabulary_(std::move(vocabulary)),
      weights_(classes_.size(), std::vector<double>(vocabulary_.size(), 0.0)),
      bias_(classes_.size(), 0.0) {
  index_vocabulary();
}

void BowClassifier::index_vocabulary() {
  index_.clear();
  index_.reserve(vocabulary_.size());
  for (std::size_t i = 0; i < vocabulary_.size(); ++i) index_.emplace(vocabulary_[i], i);
}

std::vector<double> BowClassifier::scores(const WordSeq& words) const {
  std::vector<double> z = bias_;
  for (const auto& w : words) {
    auto it = index_.find(w);
    if (it == index_.end()) continue;
    for (std::size_t c = 0; c < z.size(); ++c) z[c] += weights_[c][it->second];
  }
  return z;
}

Probabilities BowClassifier::predict_proba(const WordSeq& words) const {
  return softmax(scores(words));
}

std::string BowClassifier::to_json() const {
  nlohmann::json j;
  j["format"] = kModelFormatName;
  j["version"] = kModelFormatVersion;
  j["classes"] = classes_;
  j["vocabulary"] = vocabulary_;
  j["weights"] = weights_;
  j["bias"] = bias_;
  return j.dump();
}

BowClassifier BowClassifier::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("model file: ") + e.what());
  }
  if (j.value("format", "") != kModelFormatName) throw InputError("model file: unknown format");
  if (j.value("version", 0) != kModelFormatVersion) {
    throw InputError("model file: unsupported version " + j.value("version", nlohmann::json()).dump());
  }
  BowClassifier m(j.at("classes").get<std::vector<std::string>>(),
                  j.at("vocabulary").get<std::vector<std::string>>());
  auto weights = j.at("weights").get<std::vector<std::vector<double>>>();
  auto bias = j.at("bias").get<std::vector<double>>();
  if (weights.size() != m.classes_.size() || bias.size() != m.classes_.size()) {
    throw InputError("model file: weight rows do not match class count");
  }
  for (const auto& row : weights) {
    if (row.size() != m.vocabulary_.size()) {
      throw InputError("model file: weight row does not match vocabulary size");
    }
  }
  m.weights_ = std::move(weights);
  m.bias_ = std::move(bias);
  return m;
}

void BowClassifier::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write model file " + path.string());
  out << to_json() << '\n';
}

BowClassifier BowClassifier::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read model file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

double training_objective(const BowClassifier& model, const Corpus& corpus, double l2) {
  std::vector<std::size_t> all(corpus.size());
  std::iota(all.begin(), all.end(), 0);
  const auto rows = featurize(model, corpus, all);
  return objective(model, rows, l2);
}

BowClassifier train_bow(const Corpus& corpus, const TrainOptions& options, TrainReport* report) {
  if (corpus.empty()) throw InputError("train: empty corpus");
  {
    std::vector<bool> seen(corpus.num_classes(), false);
    for (ClassId c : corpus.labels()) seen[c] = true;
    if (corpus.num_classes() < 2 || std::count(seen.begin(), seen.end(), true) < 2) {
      throw InputError("train: corpus needs at least two classes");
    }
  }
  if (!(options.validation_fraction >= 0.0 && options.validation_fraction < 1.0)) {
    throw InputError("train: validation fraction must be in [0, 1)");
  }

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t n_val = 0;
  if (options.validation_fraction > 0.0) {
    Rng rng = Rng::stream(options.seed, "train");
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(i))]);
    }
    n_val = static_cast<std::size_t>(std::llround(options.validation_fraction *
                                                  static_cast<double>(corpus.size())));
    n_val = std::min(n_val, corpus.size() - 1);
  }
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<long>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<long>(n_val), order.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());

  std::set<std::string> vocab;
  for (std::size_t i : train_idx) {
    for (const auto& t : corpus.document(i).tokens) vocab.insert(t.word);
  }
  BowClassifier model(corpus.classes(), std::vector<std::string>(vocab.begin(), vocab.end()));
  const auto rows = featurize(model, corpus, train_idx);
  const auto val_rows = featurize(model, corpus, val_idx);

  const std::size_t n_classes = corpus.num_classes();
  const std::size_t n_features = vocab.size();
  const double inv_n = 1.0 / static_cast<double>(rows.size());

  double lr = options.learning_rate;
  double loss = objective(model, rows, options.l2);
  TrainReport rep;
  BowClassifier best = model;
  double best_val = val_rows.empty() ? 0.0 : row_accuracy(model, val_rows);

  std::vector<std::vector<double>> gw(n_classes, std::vector<double>(n_features));
  std::vector<double> gb(n_classes);
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    for (auto& g : gw) std::fill(g.begin(), g.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    for (const auto& row : rows) {
      auto p = softmax(logits_of(model, row));
      p[row.label] -= 1.0;
      for (std::size_t c = 0; c < n_classes; ++c) {
        gb[c] += p[c] * inv_n;
        for (auto [f, v] : row.entries) gw[c][f] += p[c] * v * inv_n;
      }
    }
    for (std::size_t c = 0; c < n_classes; ++c) {
      for (std::size_t f = 0; f < n_features; ++f) gw[c][f] += options.l2 * model.weights()[c][f];
    }

    // Backtracking: halve the step until the objective does not increase;
    // grow it again after each accepted step.
    BowClassifier trial = model;
    double trial_loss = loss;
    for (int attempt = 0; attempt < 40; ++attempt) {
      trial = model;
      for (std::size_t c = 0; c < n_classes; ++c) {
        trial.bias()[c] -= lr * gb[c];
        for (std::size_t f = 0; f < n_features; ++f) trial.weights()[c][f] -= lr * gw[c][f];
      }
      trial_loss = objective(trial, rows, options.l2);
      if (trial_loss <= loss) break;
      lr *= 0.5;
    }
    if (trial_loss <= loss) {
      model = std::move(trial);
      loss = trial_loss;
      lr *= 1.25;
    }
    rep.loss_history.push_back(loss);

    if (!val_rows.empty()) {
      const double acc = row_accuracy(model, val_rows);
      if (acc > best_val) {
        best_val = acc;
        best = model;
        rep.best_epoch = epoch + 1;
      }
    }
  }
  if (val_rows.empty()) {
    best = std::move(model);
    rep.best_epoch = options.epochs;
  }
  rep.train_accuracy = row_accuracy(best, rows);
  rep.validation_accuracy = best_val;
  if (report) *report = std::move(rep);
  return best;
}

}  // namespace anchoragg

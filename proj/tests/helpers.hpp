#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <unistd.h>

#include "anchoragg/corpus.hpp"
#include "anchoragg/model.hpp"
#include "anchoragg/rng.hpp"

namespace testing {

using namespace anchoragg;

/// Predictor defined by a plain function of the word sequence.
class FnPredictor final : public Predictor {
 public:
  FnPredictor(std::vector<std::string> classes, std::function<Probabilities(const WordSeq&)> fn)
      : classes_(std::move(classes)), fn_(std::move(fn)) {}

  const std::vector<std::string>& classes() const override { return classes_; }
  Probabilities predict_proba(const WordSeq& words) const override { return fn_(words); }

 private:
  std::vector<std::string> classes_;
  std::function<Probabilities(const WordSeq&)> fn_;
};

/// Binary predictor: class 1 with probability `hi` when `word` is present.
inline FnPredictor keyword_predictor(const std::string& word, double hi = 0.9) {
  return FnPredictor({"neg", "pos"}, [word, hi](const WordSeq& ws) {
    for (const auto& w : ws) {
      if (w == word) return Probabilities{1.0 - hi, hi};
    }
    return Probabilities{hi, 1.0 - hi};
  });
}

inline FnPredictor constant_predictor(std::size_t n_classes = 2) {
  return FnPredictor(std::vector<std::string>(n_classes, ""), [n_classes](const WordSeq&) {
    Probabilities p(n_classes, 0.0);
    p[0] = 1.0;
    return p;
  });
}

inline std::filesystem::path temp_dir(const std::string& name) {
  static std::atomic<int> counter{0};
  auto dir = std::filesystem::temp_directory_path() /
             ("anchoragg_test_" + name + "_" + std::to_string(::getpid()) + "_" +
              std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Corpus toy_corpus(const std::vector<std::pair<std::string, std::string>>& rows) {
  std::vector<Document> docs;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    docs.push_back(make_document(std::to_string(i), rows[i].first));
    labels.push_back(rows[i].second);
  }
  return Corpus(std::move(docs), std::move(labels));
}

}  // namespace testing

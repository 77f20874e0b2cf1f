#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "anchoragg/corpus.hpp"

namespace anchoragg {

/// Desk-scale test bed: each document draws its true class uniformly, carries
/// 1..max_signal planted words of that class, and fills the rest with stop
/// words and Zipf-distributed filler words. The observed label is the true
/// class, replaced by a different class with probability `label_noise`.
struct SynthOptions {
  std::size_t documents = 500;
  std::size_t planted_per_class = 10;
  std::vector<std::string> classes = {"negative", "positive"};
  double label_noise = 0.1;
  std::size_t min_tokens = 18;
  std::size_t max_tokens = 26;
  std::size_t min_signal = 2;
  std::size_t max_signal = 4;
  double stopword_rate = 0.5;
  std::size_t filler_vocabulary = 3000;
  double zipf_exponent = 1.0;
  double stopword_zipf_exponent = 1.0;
  std::uint64_t seed = 0;
};

struct SynthCorpus {
  Corpus corpus;
  /// Labels before noise; the planted rule reproduces them exactly.
  std::vector<ClassId> clean_labels;
  /// planted[c] = signal words of class c.
  std::vector<std::vector<std::string>> planted;
};

SynthCorpus synthesize(const SynthOptions& options);

/// Class with the most planted words in d (ties → lowest class index).
ClassId planted_rule(const SynthCorpus& synth, const Document& d);

/// Writes the corpus as JSONL ({"id","text","label"}) and the ground truth as
/// JSON ({"classes", "planted": {class: [words]}, "label_noise", "seed"}).
void write_synth(const SynthCorpus& synth, const SynthOptions& options,
                 const std::string& corpus_path, const std::string& truth_path);

}  // namespace anchoragg

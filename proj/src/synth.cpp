#include "anchoragg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "anchoragg/rng.hpp"

namespace anchoragg {

namespace {

constexpr const char* kConsonants = "bdfgklmnprstvz";
constexpr const char* kVowels = "aeiou";

std::string pseudo_word(Rng& rng, std::size_t syllables) {
  std::string w;
  for (std::size_t s = 0; s < syllables; ++s) {
    w.push_back(kConsonants[rng.below(14)]);
    w.push_back(kVowels[rng.below(5)]);
  }
  if (rng.bernoulli(0.5)) w.push_back(kConsonants[rng.below(14)]);
  return w;
}

std::vector<std::string> fresh_words(Rng& rng, std::size_t n, std::set<std::string>& taken,
                                     std::size_t syllables) {
  std::vector<std::string> out;
  while (out.size() < n) {
    auto w = pseudo_word(rng, syllables);
    if (taken.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

struct ZipfSampler {
  std::vector<double> cdf;

  ZipfSampler(std::size_t n, double exponent) {
    double acc = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      acc += 1.0 / std::pow(static_cast<double>(r + 1), exponent);
      cdf.push_back(acc);
    }
  }

  std::size_t draw(Rng& rng) const {
    const double u = rng.uniform() * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    return static_cast<std::size_t>(it - cdf.begin());
  }
};

}  // namespace

SynthCorpus synthesize(const SynthOptions& o) {
  if (o.classes.size() < 2) throw InputError("synth: need at least two classes");
  if (o.documents == 0) throw InputError("synth: need at least one document");
  if (o.min_tokens < o.max_signal || o.min_tokens > o.max_tokens || o.min_signal < 1 ||
      o.min_signal > o.max_signal) {
    throw InputError("synth: inconsistent length/signal bounds");
  }
  if (!(o.label_noise >= 0.0 && o.label_noise <= 1.0)) throw InputError("synth: noise in [0, 1]");

  Rng rng = Rng::stream(o.seed, "synth");
  std::set<std::string> taken;
  const auto stop = load_stopwords(default_stopwords_path());
  taken.insert(stop.begin(), stop.end());
  std::vector<std::string> stop_list(stop.begin(), stop.end());
  for (std::size_t j = stop_list.size(); j > 1; --j) {
    std::swap(stop_list[j - 1], stop_list[rng.below(j)]);
  }
  const ZipfSampler stop_zipf(stop_list.size(), o.stopword_zipf_exponent);

  std::vector<std::string> sorted_classes = o.classes;
  std::sort(sorted_classes.begin(), sorted_classes.end());
  SynthCorpus out;
  for (std::size_t c = 0; c < sorted_classes.size(); ++c) {
    out.planted.push_back(fresh_words(rng, o.planted_per_class, taken, 3));
  }
  const auto fillers = fresh_words(rng, o.filler_vocabulary, taken, 2);
  const ZipfSampler filler_zipf(fillers.size(), o.zipf_exponent);

  std::vector<Document> docs;
  std::vector<ClassId> labels;
  for (std::size_t i = 0; i < o.documents; ++i) {
    const ClassId truth = rng.below(sorted_classes.size());
    const std::size_t len = o.min_tokens + rng.below(o.max_tokens - o.min_tokens + 1);
    const std::size_t n_signal = o.min_signal + rng.below(o.max_signal - o.min_signal + 1);
    std::vector<std::string> words;
    for (std::size_t s = 0; s < n_signal; ++s) {
      words.push_back(out.planted[truth][rng.below(out.planted[truth].size())]);
    }
    while (words.size() < len) {
      if (rng.bernoulli(o.stopword_rate)) {
        words.push_back(stop_list[stop_zipf.draw(rng)]);
      } else {
        words.push_back(fillers[filler_zipf.draw(rng)]);
      }
    }
    for (std::size_t j = words.size(); j > 1; --j) {
      std::swap(words[j - 1], words[rng.below(j)]);
    }
    std::string text;
    for (const auto& w : words) {
      if (!text.empty()) text.push_back(' ');
      text += w;
    }
    ClassId label = truth;
    if (rng.bernoulli(o.label_noise)) {
      label = (truth + 1 + rng.below(sorted_classes.size() - 1)) % sorted_classes.size();
    }
    out.clean_labels.push_back(truth);
    labels.push_back(label);
    docs.push_back(make_document(std::to_string(i), std::move(text)));
  }
  out.corpus = Corpus(std::move(docs), std::move(labels), sorted_classes);
  return out;
}

ClassId planted_rule(const SynthCorpus& synth, const Document& d) {
  std::vector<std::size_t> hits(synth.planted.size(), 0);
  for (const auto& t : d.tokens) {
    for (std::size_t c = 0; c < synth.planted.size(); ++c) {
      const auto& p = synth.planted[c];
      if (std::find(p.begin(), p.end(), t.word) != p.end()) ++hits[c];
    }
  }
  return static_cast<ClassId>(std::max_element(hits.begin(), hits.end()) - hits.begin());
}

void write_synth(const SynthCorpus& synth, const SynthOptions& options,
                 const std::string& corpus_path, const std::string& truth_path) {
  std::ofstream out(corpus_path, std::ios::binary);
  if (!out) throw InputError("cannot write " + corpus_path);
  const auto& corpus = synth.corpus;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    nlohmann::json line = {{"id", corpus.document(i).id},
                           {"text", corpus.document(i).raw_text},
                           {"label", corpus.classes()[corpus.label(i)]}};
    out << line.dump() << '\n';
  }
  nlohmann::json truth;
  truth["classes"] = corpus.classes();
  for (std::size_t c = 0; c < synth.planted.size(); ++c) {
    truth["planted"][corpus.classes()[c]] = synth.planted[c];
  }
  truth["label_noise"] = options.label_noise;
  truth["seed"] = options.seed;
  std::ofstream t(truth_path, std::ios::binary);
  if (!t) throw InputError("cannot write " + truth_path);
  t << truth.dump(2) << '\n';
}

}  // namespace anchoragg

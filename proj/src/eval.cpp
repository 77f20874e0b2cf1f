#include "anchoragg/eval.hpp"

#include <set>
#include <unordered_map>

#include "anchoragg/external.hpp"

namespace anchoragg {

namespace {

// f̂ memo keyed by document content; prefixes repeat across snapshots.
class ProbabilityMemo {
 public:
  explicit ProbabilityMemo(const Predictor& f) : f_(f) {}

  double class_prob(const WordSeq& words, ClassId c) {
    const std::string key = join_words(words);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second.at(c);
    auto probs = f_.predict_proba(words);
    const double p = probs.at(c);
    memo_.emplace(key, std::move(probs));
    return p;
  }

 private:
  const Predictor& f_;
  std::unordered_map<std::string, Probabilities> memo_;
};

AopcResult aopc_with(const TermList& terms, const Corpus& corpus,
                     std::span<const std::size_t> members, ClassId c, ProbabilityMemo& memo) {
  if (terms.size() == 0) throw InputError("aopc: empty term list");
  if (members.empty()) throw InputError("aopc: class has no documents");
  const std::size_t k = terms.size();
  AopcResult out;
  out.prefix_drops.assign(k, 0.0);
  out.documents = members.size();
  std::unordered_map<std::string, std::size_t> rank;
  for (std::size_t i = 0; i < k; ++i) rank.emplace(terms.words[i], i);  // first occurrence wins

  double total = 0.0;
  for (std::size_t doc : members) {
    const auto& d = corpus.document(doc);
    // Earliest prefix that touches d; shorter prefixes leave it unchanged.
    std::size_t first = k;
    for (const auto& t : d.tokens) {
      if (auto it = rank.find(t.word); it != rank.end()) first = std::min(first, it->second);
    }
    if (first == k) continue;
    const double base = memo.class_prob(d.words(), c);
    for (std::size_t i = first + 1; i <= k; ++i) {
      const double drop = base - memo.class_prob(remove_prefix(d, terms, i).words(), c);
      out.prefix_drops[i - 1] += drop;
      total += drop;
    }
  }
  const double n = static_cast<double>(members.size());
  for (double& v : out.prefix_drops) v /= n;
  out.value = total / n / static_cast<double>(k + 1);
  return out;
}

}  // namespace

TermList make_term_list(std::span<const RankedWord> ranked, const WordStats& stats,
                        std::string class_name, std::string aggregation) {
  TermList t;
  for (const auto& r : ranked) {
    t.words.push_back(stats.vocabulary.at(r.word));
    t.scores.push_back(r.score);
  }
  t.class_name = std::move(class_name);
  t.aggregation = std::move(aggregation);
  return t;
}

Document remove_prefix(const Document& d, const TermList& terms, std::size_t i) {
  if (i > terms.size()) throw InputError("remove_prefix: prefix longer than term list");
  const std::set<std::string> drop(terms.words.begin(), terms.words.begin() + static_cast<long>(i));
  Document out;
  out.id = d.id;
  for (const auto& t : d.tokens) {
    if (drop.contains(t.word)) continue;
    out.tokens.push_back(Token{t.word, out.tokens.size()});
  }
  out.raw_text = join_words(out.words());
  return out;
}

AopcResult aopc_k(const TermList& terms, const Corpus& corpus, std::span<const std::size_t> members,
                  const Predictor& f, ClassId c) {
  ProbabilityMemo memo(f);
  return aopc_with(terms, corpus, members, c, memo);
}

double shared_terms_ratio(const TermList& a, const TermList& b) {
  if (a.size() != b.size()) throw InputError("shared_terms_ratio: lists differ in length");
  if (a.size() == 0) throw InputError("shared_terms_ratio: empty lists");
  const std::set<std::string> sa(a.words.begin(), a.words.end());
  std::size_t shared = 0;
  for (const auto& w : std::set<std::string>(b.words.begin(), b.words.end())) {
    if (sa.contains(w)) ++shared;
  }
  return static_cast<double>(shared) / static_cast<double>(a.size());
}

AppendDropResult append_drop(const Corpus& corpus, const Predictor& f, const std::string& sentence,
                             ClassId target) {
  if (tokenize(sentence).empty()) throw InputError("append_drop: sentence has no tokens");
  if (target >= corpus.num_classes()) throw InputError("append_drop: class out of range");
  AppendDropResult out;
  out.accuracy_before = accuracy(f, corpus);
  std::vector<Document> docs;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& d = corpus.document(i);
    if (corpus.label(i) == target) {
      docs.push_back(d);
      continue;
    }
    docs.push_back(make_document(d.id, d.raw_text + " " + sentence));
    ++out.modified_documents;
  }
  const Corpus changed(std::move(docs), std::vector<ClassId>(corpus.labels().begin(),
                                                             corpus.labels().end()),
                       corpus.classes());
  out.accuracy_after = accuracy(f, changed);
  out.drop_points = (out.accuracy_before - out.accuracy_after) * 100.0;
  return out;
}

std::vector<TimelinePoint> quality_timeline(std::span<const Snapshot> snapshots,
                                            const Corpus& corpus,
                                            std::span<const std::size_t> members,
                                            const Predictor& f, ClassId c) {
  ProbabilityMemo memo(f);
  std::vector<TimelinePoint> out;
  for (const auto& s : snapshots) {
    TimelinePoint p{s.t_sec, s.calls, 0.0};
    if (!s.words.empty()) {
      TermList terms;
      terms.words = s.words;
      terms.scores = s.scores;
      p.aopc = aopc_with(terms, corpus, members, c, memo).value;
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace anchoragg

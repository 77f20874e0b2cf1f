#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "anchoragg/types.hpp"

namespace anchoragg {

struct Token {
  std::string word;
  std::size_t position = 0;

  bool operator==(const Token&) const = default;
};

struct Document {
  std::string id;
  std::vector<Token> tokens;
  std::string raw_text;

  WordSeq words() const;
  std::size_t size() const { return tokens.size(); }
};

/// Lowercase, split on whitespace (ASCII and the common Unicode spaces),
/// strip leading/trailing ASCII punctuation, drop empties.
std::vector<Token> tokenize(std::string_view text);

Document make_document(std::string id, std::string raw_text);

/// Documents in file order with one label each. Classes are sorted
/// lexicographically by label string.
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<Document> documents, std::vector<std::string> labels);
  Corpus(std::vector<Document> documents, std::vector<ClassId> labels,
         std::vector<std::string> classes);

  std::span<const Document> documents() const { return documents_; }
  const Document& document(std::size_t i) const { return documents_.at(i); }
  std::size_t size() const { return documents_.size(); }
  bool empty() const { return documents_.empty(); }

  std::span<const ClassId> labels() const { return labels_; }
  ClassId label(std::size_t i) const { return labels_.at(i); }
  std::optional<ClassId> label_of(std::string_view doc_id) const;

  const std::vector<std::string>& classes() const { return classes_; }
  std::size_t num_classes() const { return classes_.size(); }
  ClassId class_id(std::string_view name) const;

  /// Indices of documents whose assignment equals c.
  std::vector<std::size_t> members(ClassId c, std::span<const ClassId> assignment) const;
  std::vector<std::size_t> members(ClassId c) const { return members(c, labels_); }

  std::size_t total_tokens() const;

 private:
  void index_ids();

  std::vector<Document> documents_;
  std::vector<ClassId> labels_;
  std::vector<std::string> classes_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

enum class CorpusFormat { csv, jsonl };

CorpusFormat parse_format(std::string_view name);

struct IngestOptions {
  std::string text_field = "text";
  std::string label_field = "label";
  /// Optional id column/field; ids default to the 0-based row number.
  std::string id_field = "id";
  std::size_t max_chars = 200;
  /// When non-empty, labels outside this set are rejected.
  std::vector<std::string> allowed_labels;
};

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format,
                   const IngestOptions& options = {});

/// Occurrence statistics over a corpus. Word ids index `vocabulary`, which is
/// sorted, so ids order words lexicographically.
struct WordStats {
  std::vector<std::string> vocabulary;
  std::unordered_map<std::string, WordId> index;
  std::vector<std::uint64_t> occurrences;                       // N_w
  std::vector<std::vector<std::uint64_t>> class_occurrences;    // [c][w]
  std::vector<std::vector<std::uint64_t>> class_doc_frequency;  // [c][w]
  std::vector<std::uint64_t> doc_frequency;                     // over all of S
  std::size_t num_classes = 0;

  std::size_t size() const { return vocabulary.size(); }
  std::optional<WordId> find(std::string_view word) const;
  WordId id(std::string_view word) const;
};

/// Per-class tallies are partitioned by the given assignment (labels by
/// default, or the predictor's classification).
WordStats word_stats(const Corpus& corpus);
WordStats word_stats(const Corpus& corpus, std::span<const ClassId> assignment);

/// Sorted word ids eligible for top-k scoring.
using CandidateSet = std::vector<WordId>;

CandidateSet filter_candidates(const WordStats& stats, const std::set<std::string>& stopwords,
                               std::uint64_t min_freq);

/// Uniform sample without replacement of round(fraction * |S|) documents;
/// file order is preserved within the sample.
Corpus sample_documents(const Corpus& corpus, double fraction, std::uint64_t seed);

/// One word per line, '#' starts a comment.
std::set<std::string> load_stopwords(const std::filesystem::path& path);
std::filesystem::path default_stopwords_path();

}  // namespace anchoragg

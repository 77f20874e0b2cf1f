#include "anchoragg/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "anchoragg/rng.hpp"

namespace anchoragg {

namespace {

// Byte length of a UTF-8 whitespace sequence starting at text[i], or 0.
std::size_t whitespace_len(std::string_view text, std::size_t i) {
  const auto b = static_cast<unsigned char>(text[i]);
  if (b == ' ' || b == '\t' || b == '\n' || b == '\r' || b == '\v' || b == '\f') return 1;
  auto at = [&](std::size_t k) {
    return i + k < text.size() ? static_cast<unsigned char>(text[i + k]) : 0u;
  };
  if (b == 0xC2 && (at(1) == 0x85 || at(1) == 0xA0)) return 2;  // NEL, NBSP
  if (b == 0xE1 && at(1) == 0x9A && at(2) == 0x80) return 3;    // U+1680
  if (b == 0xE2 && at(1) == 0x80) {
    const auto c = at(2);
    if ((c >= 0x80 && c <= 0x8A) || c == 0xA8 || c == 0xA9 || c == 0xAF) return 3;
  }
  if (b == 0xE2 && at(1) == 0x81 && at(2) == 0x9F) return 3;  // U+205F
  if (b == 0xE3 && at(1) == 0x80 && at(2) == 0x80) return 3;  // U+3000
  return 0;
}

bool is_punct(char ch) { return std::ispunct(static_cast<unsigned char>(ch)) != 0; }

std::string normalize_word(std::string_view raw) {
  std::size_t begin = 0;
  std::size_t end = raw.size();
  while (begin < end && is_punct(raw[begin])) ++begin;
  while (end > begin && is_punct(raw[end - 1])) --end;
  std::string out(raw.substr(begin, end - begin));
  for (char& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

// RFC 4180 records: quoted fields may contain separators, quotes ("") and
// newlines.
std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  char ch;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
    row.clear();
  };
  while (in.get(ch)) {
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (ch == ',') {
      end_field();
    } else if (ch == '\n') {
      end_row();
    } else if (ch == '\r') {
      if (in.peek() == '\n') in.get(ch);
      end_row();
    } else {
      field.push_back(ch);
      field_started = true;
    }
  }
  if (quoted) throw InputError("csv: unterminated quoted field");
  if (field_started || !row.empty()) end_row();
  return rows;
}

struct RawRecord {
  std::string id;
  std::string text;
  std::string label;
};

std::vector<RawRecord> read_csv(std::istream& in, const IngestOptions& options) {
  auto rows = parse_csv(in);
  if (rows.empty()) throw InputError("csv: missing header row");
  const auto& header = rows.front();
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto text_col = column(options.text_field);
  const auto label_col = column(options.label_field);
  if (!text_col) throw InputError("csv: no text column '" + options.text_field + "'");
  if (!label_col) throw InputError("csv: no label column '" + options.label_field + "'");
  const auto id_col = column(options.id_field);

  std::vector<RawRecord> records;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::size_t need = std::max(*text_col, *label_col) + 1;
    if (row.size() < need) {
      throw InputError("csv: row " + std::to_string(r) + " has " + std::to_string(row.size()) +
                       " fields, expected at least " + std::to_string(need));
    }
    RawRecord rec;
    rec.id = id_col && *id_col < row.size() ? row[*id_col] : std::to_string(r - 1);
    rec.text = row[*text_col];
    rec.label = row[*label_col];
    records.push_back(std::move(rec));
  }
  return records;
}

std::string json_scalar(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump();
}

std::vector<RawRecord> read_jsonl(std::istream& in, const IngestOptions& options) {
  std::vector<RawRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError("jsonl line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!obj.is_object() || !obj.contains(options.text_field) ||
        !obj.contains(options.label_field) || !obj[options.text_field].is_string()) {
      throw InputError("jsonl line " + std::to_string(lineno) + ": expected fields '" +
                       options.text_field + "' and '" + options.label_field + "'");
    }
    RawRecord rec;
    rec.id = obj.contains(options.id_field) ? json_scalar(obj[options.id_field])
                                            : std::to_string(records.size());
    rec.text = obj[options.text_field].get<std::string>();
    rec.label = json_scalar(obj[options.label_field]);
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    if (std::size_t ws = whitespace_len(text, i)) {
      i += ws;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && whitespace_len(text, j) == 0) ++j;
    std::string word = normalize_word(text.substr(i, j - i));
    if (!word.empty()) tokens.push_back(Token{std::move(word), tokens.size()});
    i = j;
  }
  return tokens;
}

WordSeq Document::words() const {
  WordSeq out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.word);
  return out;
}

Document make_document(std::string id, std::string raw_text) {
  Document d;
  d.id = std::move(id);
  d.tokens = tokenize(raw_text);
  d.raw_text = std::move(raw_text);
  return d;
}

Corpus::Corpus(std::vector<Document> documents, std::vector<std::string> labels)
    : documents_(std::move(documents)) {
  if (labels.size() != documents_.size()) {
    throw InputError("corpus: label count does not match document count");
  }
  std::set<std::string> distinct(labels.begin(), labels.end());
  classes_.assign(distinct.begin(), distinct.end());
  labels_.reserve(labels.size());
  for (const auto& l : labels) labels_.push_back(class_id(l));
  index_ids();
}

Corpus::Corpus(std::vector<Document> documents, std::vector<ClassId> labels,
               std::vector<std::string> classes)
    : documents_(std::move(documents)), labels_(std::move(labels)), classes_(std::move(classes)) {
  if (labels_.size() != documents_.size()) {
    throw InputError("corpus: label count does not match document count");
  }
  for (ClassId c : labels_) {
    if (c >= classes_.size()) throw InputError("corpus: label index out of range");
  }
  index_ids();
}

void Corpus::index_ids() {
  by_id_.clear();
  for (std::size_t i = 0; i < documents_.size(); ++i) {
    if (!by_id_.emplace(documents_[i].id, i).second) {
      throw InputError("corpus: duplicate document id '" + documents_[i].id + "'");
    }
  }
}

std::optional<ClassId> Corpus::label_of(std::string_view doc_id) const {
  auto it = by_id_.find(std::string(doc_id));
  if (it == by_id_.end()) return std::nullopt;
  return labels_[it->second];
}

ClassId Corpus::class_id(std::string_view name) const {
  auto it = std::lower_bound(classes_.begin(), classes_.end(), name);
  if (it == classes_.end() || *it != name) {
    throw InputError("unknown class '" + std::string(name) + "'");
  }
  return static_cast<ClassId>(it - classes_.begin());
}

std::vector<std::size_t> Corpus::members(ClassId c, std::span<const ClassId> assignment) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == c) out.push_back(i);
  }
  return out;
}

std::size_t Corpus::total_tokens() const {
  std::size_t n = 0;
  for (const auto& d : documents_) n += d.size();
  return n;
}

CorpusFormat parse_format(std::string_view name) {
  if (name == "csv") return CorpusFormat::csv;
  if (name == "jsonl") return CorpusFormat::jsonl;
  throw InputError("unknown corpus format '" + std::string(name) + "' (expected csv or jsonl)");
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format,
                   const IngestOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read corpus file " + path.string());
  auto records = format == CorpusFormat::csv ? read_csv(in, options) : read_jsonl(in, options);

  std::vector<Document> docs;
  std::vector<std::string> labels;
  for (auto& rec : records) {
    if (rec.text.size() > options.max_chars) continue;
    if (rec.label.empty()) throw InputError("document '" + rec.id + "' has an empty label");
    if (!options.allowed_labels.empty() &&
        std::find(options.allowed_labels.begin(), options.allowed_labels.end(), rec.label) ==
            options.allowed_labels.end()) {
      throw InputError("document '" + rec.id + "' has unknown label '" + rec.label + "'");
    }
    docs.push_back(make_document(std::move(rec.id), std::move(rec.text)));
    labels.push_back(std::move(rec.label));
  }
  if (docs.empty()) throw InputError("corpus " + path.string() + " is empty after filtering");
  return Corpus(std::move(docs), std::move(labels));
}

std::optional<WordId> WordStats::find(std::string_view word) const {
  auto it = index.find(std::string(word));
  if (it == index.end()) return std::nullopt;
  return it->second;
}

WordId WordStats::id(std::string_view word) const {
  auto w = find(word);
  if (!w) throw InputError("word '" + std::string(word) + "' not in vocabulary");
  return *w;
}

WordStats word_stats(const Corpus& corpus) { return word_stats(corpus, corpus.labels()); }

WordStats word_stats(const Corpus& corpus, std::span<const ClassId> assignment) {
  if (corpus.empty()) throw InputError("word_stats: empty corpus");
  if (assignment.size() != corpus.size()) {
    throw InputError("word_stats: class assignment does not match corpus size");
  }
  WordStats stats;
  stats.num_classes = corpus.num_classes();
  std::set<std::string> vocab;
  for (const auto& d : corpus.documents()) {
    for (const auto& t : d.tokens) vocab.insert(t.word);
  }
  stats.vocabulary.assign(vocab.begin(), vocab.end());
  const std::size_t n = stats.vocabulary.size();
  stats.index.reserve(n);
  for (std::size_t w = 0; w < n; ++w) stats.index.emplace(stats.vocabulary[w], static_cast<WordId>(w));
  stats.occurrences.assign(n, 0);
  stats.doc_frequency.assign(n, 0);
  stats.class_occurrences.assign(stats.num_classes, std::vector<std::uint64_t>(n, 0));
  stats.class_doc_frequency.assign(stats.num_classes, std::vector<std::uint64_t>(n, 0));

  std::vector<std::size_t> last_doc(n, static_cast<std::size_t>(-1));
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const ClassId c = assignment[i];
    for (const auto& t : corpus.document(i).tokens) {
      const WordId w = stats.index.at(t.word);
      ++stats.occurrences[w];
      ++stats.class_occurrences[c][w];
      if (last_doc[w] != i) {
        last_doc[w] = i;
        ++stats.doc_frequency[w];
        ++stats.class_doc_frequency[c][w];
      }
    }
  }
  return stats;
}

CandidateSet filter_candidates(const WordStats& stats, const std::set<std::string>& stopwords,
                               std::uint64_t min_freq) {
  if (min_freq < 1) throw InputError("filter_candidates: min_freq must be >= 1");
  CandidateSet out;
  for (std::size_t w = 0; w < stats.size(); ++w) {
    if (stats.occurrences[w] < min_freq) continue;
    if (stopwords.contains(stats.vocabulary[w])) continue;
    out.push_back(static_cast<WordId>(w));
  }
  return out;
}

Corpus sample_documents(const Corpus& corpus, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw InputError("sample fraction must be in (0, 1]");
  }
  const auto n = corpus.size();
  const auto m = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = Rng::stream(seed, "sample");
  // Partial Fisher-Yates over the first m slots.
  for (std::size_t i = 0; i < m && i + 1 < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  if (m == 0) throw InputError("sample fraction selects no documents");
  idx.resize(m);
  std::sort(idx.begin(), idx.end());

  std::vector<Document> docs;
  std::vector<ClassId> labels;
  for (std::size_t i : idx) {
    docs.push_back(corpus.document(i));
    labels.push_back(corpus.label(i));
  }
  return Corpus(std::move(docs), std::move(labels), corpus.classes());
}

std::set<std::string> load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read stop-word file " + path.string());
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto toks = tokenize(line);
    for (auto& t : toks) out.insert(std::move(t.word));
  }
  return out;
}

std::filesystem::path default_stopwords_path() {
  return std::filesystem::path(ANCHORAGG_DATA_DIR) / "stopwords.txt";
}

}  // namespace anchoragg

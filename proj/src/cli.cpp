#include "anchoragg/cli.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "anchoragg/aggregate.hpp"
#include "anchoragg/anchor.hpp"
#include "anchoragg/corpus.hpp"
#include "anchoragg/eval.hpp"
#include "anchoragg/external.hpp"
#include "anchoragg/io.hpp"
#include "anchoragg/model.hpp"
#include "anchoragg/perturb.hpp"
#include "anchoragg/synth.hpp"
#include "anchoragg/topk.hpp"
#include "anchoragg/transport.hpp"

namespace anchoragg::cli {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

std::atomic<bool> g_stop{false};

extern "C" void on_sigint(int) { g_stop.store(true); }

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

struct Timings {
  json stages = json::object();
  Clock::time_point start = Clock::now();

  template <typename F>
  auto stage(const std::string& name, F&& f) {
    const auto t = Clock::now();
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      stages[name] = seconds_since(t);
    } else {
      auto r = f();
      stages[name] = seconds_since(t);
      return r;
    }
  }
};

// Shared option groups.

struct CorpusArgs {
  std::string path;
  std::string format;
  IngestOptions ingest;

  void add(CLI::App* app, bool required = true) {
    auto* opt = app->add_option("--corpus", path, "Corpus file (csv or jsonl)");
    if (required) opt->required();
    app->add_option("--format", format, "csv | jsonl (default: from extension)");
    app->add_option("--text-field", ingest.text_field, "Text column or key");
    app->add_option("--label-field", ingest.label_field, "Label column or key");
    app->add_option("--id-field", ingest.id_field, "Id column or key");
    app->add_option("--max-chars", ingest.max_chars, "Drop documents longer than this");
  }

  Corpus load(const std::vector<std::string>& classes = {}) const {
    if (!std::filesystem::exists(path)) throw InputError("corpus not found: " + path);
    CorpusFormat fmt;
    if (!format.empty()) {
      fmt = parse_format(format);
    } else {
      const auto ext = std::filesystem::path(path).extension().string();
      fmt = parse_format(ext == ".csv" ? "csv" : "jsonl");
    }
    IngestOptions opts = ingest;
    if (!classes.empty()) opts.allowed_labels = classes;
    Corpus corpus = load_corpus(path, fmt, opts);
    if (classes.empty() || corpus.classes() == classes) return corpus;
    // Re-index labels under the predictor's class list.
    std::vector<Document> docs(corpus.documents().begin(), corpus.documents().end());
    std::vector<ClassId> labels;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const auto& name = corpus.classes()[corpus.label(i)];
      const auto it = std::find(classes.begin(), classes.end(), name);
      if (it == classes.end()) throw InputError("label '" + name + "' unknown to the predictor");
      labels.push_back(static_cast<ClassId>(it - classes.begin()));
    }
    return Corpus(std::move(docs), std::move(labels), classes);
  }
};

struct PredictorArgs {
  std::string model;
  std::string external;
  std::size_t batch_size = 64;
  std::size_t in_flight = 4;
  int timeout_ms = 30000;

  void add(CLI::App* app) {
    auto* m = app->add_option("--model", model, "Model file written by train");
    auto* e = app->add_option("--external", external,
                              "External predictor endpoint (http://host:port/path or cmd:<command>)");
    m->excludes(e);
    app->add_option("--predict-batch", batch_size, "Texts per external request");
    app->add_option("--in-flight", in_flight, "Concurrent external requests");
    app->add_option("--timeout-ms", timeout_ms, "External request timeout");
  }

  std::unique_ptr<Predictor> make() const {
    if (!model.empty()) {
      if (!std::filesystem::exists(model)) throw InputError("model not found: " + model);
      return std::make_unique<BowClassifier>(BowClassifier::load(model));
    }
    if (!external.empty()) {
      return std::make_unique<ExternalPredictorClient>(
          make_transport(external, std::chrono::milliseconds(timeout_ms)),
          ExternalPredictorClient::Options{batch_size, in_flight});
    }
    throw InputError("one of --model or --external is required");
  }
};

struct AnchorArgs {
  AnchorConfig cfg;
  std::size_t zeta = kBaselineZeta;
  double mask_prob = 0.5;
  std::string perturbator = "unigram";

  void add(CLI::App* app) {
    app->add_option("--tau", cfg.tau, "Anchor precision threshold");
    app->add_option("--delta", cfg.delta, "Confidence test error probability");
    app->add_option("--sample-batch", cfg.batch_size, "Perturbations per batch");
    app->add_option("--max-samples", cfg.max_samples, "Perturbation budget per token");
    app->add_option("--omega", cfg.omega, "Adaptive threshold weight");
    app->add_option("--tau-floor", cfg.tau_floor, "Adaptive threshold floor");
    app->add_option("--zeta", zeta, "Replacement candidate pool size");
    app->add_option("--mask-prob", mask_prob, "Per-position masking probability");
    app->add_option("--perturbator", perturbator,
                    "unigram, or an external endpoint (http://... or cmd:...)");
  }

  std::unique_ptr<Perturbator> make(const WordStats& stats, int timeout_ms) const {
    if (zeta < 1) throw InputError("zeta must be >= 1");
    if (!(mask_prob > 0.0 && mask_prob <= 1.0)) throw InputError("mask-prob must be in (0, 1]");
    if (perturbator == "unigram") {
      return std::make_unique<UnigramPerturbator>(build_unigram_perturbator(stats, zeta, mask_prob));
    }
    return std::make_unique<ExternalPerturbatorClient>(
        make_transport(perturbator, std::chrono::milliseconds(timeout_ms)), zeta, mask_prob);
  }
};

json option_values(const CLI::App* app) {
  json out = json::object();
  for (const auto* opt : app->get_options()) {
    const auto name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    const auto& results = opt->results();
    if (opt->get_type_size() == 0) {
      out[name] = !results.empty() && opt->as<bool>();
    } else if (results.size() > 1 || opt->get_expected_max() > 1) {
      out[name] = results;
    } else if (!results.empty()) {
      out[name] = results.front();
    } else {
      out[name] = opt->get_default_str();
    }
  }
  return out;
}

void write_manifest(const std::string& path, const std::string& command, const CLI::App* app,
                    const Timings& timings, const json& extra) {
  if (path.empty()) return;
  json m;
  m["command"] = command;
  m["config"] = option_values(app);
  m["versions"] = {{"anchoragg", kVersion},
                   {"compiler", __VERSION__},
                   {"cxx_standard", static_cast<long>(__cplusplus)}};
  m["wall_clock_sec"] = seconds_since(timings.start);
  m["stages_sec"] = timings.stages;
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  write_text(path, m.dump(2) + "\n");
}

std::string default_manifest(const std::string& out) { return out + ".manifest.json"; }

/// Turns a JSON config object into argument tokens placed before the user's
/// flags, so that later flags take precedence.
std::vector<std::string> config_tokens(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw InputError("config " + path + ": " + e.what());
  }
  if (!j.is_object()) throw InputError("config must be a JSON object");
  std::vector<std::string> out;
  auto scalar = [&](const json& v) -> std::string {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
    if (v.is_number_float()) {
      std::ostringstream s;
      s << std::setprecision(17) << v.get<double>();
      return s.str();
    }
    throw InputError("config: unsupported value " + v.dump());
  };
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string flag = "--" + it.key();
    const json& v = it.value();
    if (v.is_boolean()) {
      if (v.get<bool>()) out.push_back(flag);
    } else if (v.is_array()) {
      for (const auto& item : v) {
        out.push_back(flag);
        out.push_back(scalar(item));
      }
    } else {
      out.push_back(flag);
      out.push_back(scalar(v));
    }
  }
  return out;
}

/// Expands `--config FILE` (anywhere after the subcommand) in place.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  if (args.empty()) return args;
  std::vector<std::string> user;
  std::vector<std::string> from_config;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      auto t = config_tokens(args[++i]);
      from_config.insert(from_config.end(), t.begin(), t.end());
    } else if (args[i].rfind("--config=", 0) == 0) {
      auto t = config_tokens(args[i].substr(9));
      from_config.insert(from_config.end(), t.begin(), t.end());
    } else {
      user.push_back(args[i]);
    }
  }
  if (from_config.empty()) return args;
  std::vector<std::string> out{args.front()};
  if (!user.empty()) out.push_back(user.front());  // subcommand
  out.insert(out.end(), from_config.begin(), from_config.end());
  if (user.size() > 1) out.insert(out.end(), user.begin() + 1, user.end());
  return out;
}

ClassId resolve_class(const std::vector<std::string>& classes, const std::string& name) {
  const auto it = std::find(classes.begin(), classes.end(), name);
  if (it == classes.end()) throw InputError("unknown class '" + name + "'");
  return static_cast<ClassId>(it - classes.begin());
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  return out;
}

// ---------------------------------------------------------------- train

struct TrainCmd {
  CorpusArgs corpus;
  TrainOptions opts;
  std::string out;
  std::string manifest;

  void add(CLI::App* app) {
    corpus.add(app);
    app->add_option("--epochs", opts.epochs, "Gradient steps");
    app->add_option("--lr", opts.learning_rate, "Initial step size");
    app->add_option("--l2", opts.l2, "L2 penalty");
    app->add_option("--validation-fraction", opts.validation_fraction,
                    "Held-out fraction for checkpoint selection");
    app->add_option("--seed", opts.seed, "Root seed");
    app->add_option("--out", out, "Model output path")->required();
    app->add_option("--manifest", manifest, "Manifest path (default <out>.manifest.json)");
  }

  int run(const CLI::App* app, std::ostream& os) {
    Timings t;
    const Corpus c = t.stage("load", [&] { return corpus.load(); });
    TrainReport report;
    const BowClassifier model = t.stage("train", [&] { return train_bow(c, opts, &report); });
    t.stage("save", [&] { model.save(out); });
    os << "train accuracy " << report.train_accuracy << "\n";
    write_manifest(manifest.empty() ? default_manifest(out) : manifest, "train", app, t,
                   {{"documents", c.size()},
                    {"train_accuracy", report.train_accuracy},
                    {"validation_accuracy", report.validation_accuracy},
                    {"best_epoch", report.best_epoch},
                    {"final_loss", report.loss_history.empty() ? 0.0 : report.loss_history.back()},
                    {"predictor_calls", 0}});
    return 0;
  }
};

// ---------------------------------------------------------------- topk

struct TopKCmd {
  CorpusArgs corpus;
  PredictorArgs predictor;
  AnchorArgs anchor;
  std::string class_name;
  std::size_t k = 20;
  std::string agg = "pr";
  double alpha = 0.5;
  std::uint64_t av_min_freq = kRareThreshold;
  std::string profile = "baseline";
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  std::size_t window = 1;
  std::string stopwords;
  bool per_class_occurrences = false;
  std::string snapshots;
  std::string out;
  std::string trace;
  std::string scores;
  std::string manifest;

  void add(CLI::App* app) {
    corpus.add(app);
    predictor.add(app);
    anchor.add(app);
    app->add_option("--class", class_name, "Target class name")->required();
    app->add_option("--k", k, "Number of terms");
    app->add_option("--agg", agg, "sq | av | av_minfreq | h | pr | base | pr_inverse");
    app->add_option("--alpha", alpha, "Anchor prior for pr and pr_inverse");
    app->add_option("--av-min-freq", av_min_freq, "Frequency cut for av_minfreq");
    app->add_option("--profile", profile,
                    "baseline | delta_relaxed | masking | adaptive_tau | filtered | sampled | optimized");
    app->add_option("--seed", seed, "Root seed")->required();
    app->add_option("--threads", threads, "Worker threads (default: all cores)");
    app->add_option("--window", window, "Documents estimated ahead of the reducer");
    app->add_option("--stopwords", stopwords, "Stop-word list (default: bundled)");
    app->add_flag("--per-class-occurrences", per_class_occurrences,
                  "Adaptive threshold divides by class-local counts");
    app->add_option("--snapshots", snapshots, "Snapshot log (JSONL)");
    app->add_option("--out", out, "Term list output (JSON)")->required();
    app->add_option("--trace", trace, "Per-token decision log (JSONL)");
    app->add_option("--scores", scores, "Final per-word scores (JSONL)");
    app->add_option("--manifest", manifest, "Manifest path (default <out>.manifest.json)");
  }

  int run(const CLI::App* app, std::ostream& os, std::ostream& es) {
    Timings t;
    const ProfileOverlay prof = optimization_profile(profile);
    AnchorConfig cfg = anchor.cfg;
    if (app->count("--delta") == 0) cfg.delta = prof.delta;
    AnchorArgs pert = anchor;
    if (app->count("--zeta") == 0) pert.zeta = prof.zeta;
    const Aggregation aggregation{parse_aggregation(agg), alpha, av_min_freq};

    auto f = t.stage("predictor", [&] { return predictor.make(); });
    Corpus full = t.stage("load", [&] { return corpus.load(f->classes()); });
    const ClassId c = resolve_class(f->classes(), class_name);
    const Corpus docs = prof.sample_fraction < 1.0
                            ? sample_documents(full, prof.sample_fraction, seed)
                            : std::move(full);

    auto cache = t.stage("classify", [&] {
      return std::make_unique<DocumentProbabilityCache>(*f, docs);
    });
    const WordStats stats = word_stats(docs, cache->assignment());
    std::set<std::string> stop;
    if (prof.stopwords) {
      stop = load_stopwords(stopwords.empty() ? default_stopwords_path()
                                             : std::filesystem::path(stopwords));
    }
    const CandidateSet candidates = filter_candidates(stats, stop, prof.min_freq);
    auto perturbator = pert.make(stats, predictor.timeout_ms);

    const auto pool = words_in_class(stats, candidates, c);
    if (k > pool.size()) {
      es << "warning: k=" << k << " exceeds the " << pool.size()
         << " candidate words of class '" << class_name << "'; emitting the full ranking\n";
    }

    TopKOptions options;
    options.k = k;
    options.candidate_filtering = prof.candidate_filtering;
    options.adaptive_tau = prof.adaptive_tau;
    options.skip_noncandidates = prof.stopwords || prof.min_freq > 1;
    options.per_class_occurrences = per_class_occurrences;
    options.seed = seed;
    options.threads = threads;
    options.window = window;

    std::ofstream snap_out;
    if (!snapshots.empty()) snap_out = open_out(snapshots);
    std::ofstream trace_out;
    if (!trace.empty()) trace_out = open_out(trace);

    SnapshotSink on_snapshot;
    if (snap_out.is_open()) {
      on_snapshot = [&](const Snapshot& s) {
        snap_out << snapshot_to_json(s).dump() << "\n";
        snap_out.flush();
      };
    }
    DecisionSink on_decisions;
    if (trace_out.is_open()) {
      on_decisions = [&](std::size_t doc, ClassId, std::span<const AnchorDecision> ds) {
        for (const auto& d : ds) {
          if (!d.skipped) trace_out << decision_to_json(docs.document(doc).id, d).dump() << "\n";
        }
        trace_out.flush();
      };
    }

    const TopKInputs inputs{docs, *f, *perturbator, *cache, stats, candidates};
    const TopKResult result = t.stage("topk", [&] {
      return run_anytime(inputs, cfg, aggregation, c, options, on_snapshot, on_decisions, &g_stop);
    });

    const TermList terms =
        make_term_list(result.terms, stats, class_name, std::string(aggregation_name(aggregation.kind)));
    write_term_list(terms, out);
    if (!scores.empty()) {
      const Scorer scorer(result.counts, stats, c, aggregation, candidates);
      write_text(scores, score_dump(scorer, result.counts, stats, pool, docs.classes(), c));
    }
    if (result.interrupted) es << "interrupted after " << result.documents_processed << " documents\n";
    os << "class " << class_name << ": " << terms.size() << " terms, " << result.calls
       << " predictor calls\n";
    for (std::size_t i = 0; i < terms.size(); ++i) {
      os << "  " << (i + 1) << ". " << terms.words[i] << " " << terms.scores[i] << "\n";
    }

    json extra = {{"predictor_calls", result.calls},
                  {"classification_calls", docs.size()},
                  {"documents", docs.size()},
                  {"documents_processed", result.documents_processed},
                  {"tokens_estimated", result.tokens_estimated},
                  {"tokens_skipped", result.tokens_skipped},
                  {"filtered_words", result.filtered.size()},
                  {"candidates", candidates.size()},
                  {"interrupted", result.interrupted},
                  {"profile",
                   {{"name", prof.name},
                    {"zeta", pert.zeta},
                    {"delta", cfg.delta},
                    {"adaptive_tau", prof.adaptive_tau},
                    {"candidate_filtering", prof.candidate_filtering},
                    {"stopwords", prof.stopwords},
                    {"min_freq", prof.min_freq},
                    {"sample_fraction", prof.sample_fraction}}}};
    write_manifest(manifest.empty() ? default_manifest(out) : manifest, "topk", app, t, extra);
    return 0;
  }
};

// ---------------------------------------------------------------- eval-aopc

struct EvalCmd {
  CorpusArgs corpus;
  PredictorArgs predictor;
  std::string terms_path;
  std::string class_name;
  std::size_t k = 0;
  std::string out;
  std::string snapshots;
  std::string timeline;
  std::string manifest;

  void add(CLI::App* app) {
    corpus.add(app);
    predictor.add(app);
    app->add_option("--terms", terms_path, "Term list (JSON)")->required();
    app->add_option("--class", class_name, "Class (default: the term list's class)");
    app->add_option("--k", k, "Use only the first k terms (default: all)");
    app->add_option("--out", out, "Result JSON")->required();
    app->add_option("--snapshots", snapshots, "Snapshot log for the quality timeline");
    app->add_option("--timeline", timeline, "Timeline CSV output (t_sec,calls,aopc)");
    app->add_option("--manifest", manifest, "Manifest path (default <out>.manifest.json)");
  }

  int run(const CLI::App* app, std::ostream& os) {
    Timings t;
    TermList terms = read_term_list(terms_path);
    if (k > 0 && k < terms.size()) {
      terms.words.resize(k);
      terms.scores.resize(k);
    }
    auto f = predictor.make();
    const Corpus docs = t.stage("load", [&] { return corpus.load(f->classes()); });
    const std::string name = class_name.empty() ? terms.class_name : class_name;
    const ClassId c = resolve_class(f->classes(), name);
    const CountingPredictor counted(*f);
    const auto assignment = classify(counted, docs);
    const auto members = docs.members(c, assignment);
    const AopcResult r = t.stage("aopc", [&] { return aopc_k(terms, docs, members, counted, c); });
    json result = {{"class", name},
                   {"aggregation", terms.aggregation},
                   {"k", terms.size()},
                   {"aopc", r.value},
                   {"prefix_drops", r.prefix_drops},
                   {"documents", r.documents}};
    if (!snapshots.empty()) {
      const auto snaps = read_snapshots(snapshots);
      const auto points =
          t.stage("timeline", [&] { return quality_timeline(snaps, docs, members, counted, c); });
      if (!timeline.empty()) write_text(timeline, timeline_csv(points));
      result["timeline_points"] = points.size();
    }
    write_text(out, result.dump(2) + "\n");
    os << "AOPC^" << terms.size() << " (" << name << ") = " << r.value << "\n";
    write_manifest(manifest.empty() ? default_manifest(out) : manifest, "eval-aopc", app, t,
                   {{"predictor_calls", counted.calls()}});
    return 0;
  }
};

// ---------------------------------------------------------------- compare

struct CompareCmd {
  CorpusArgs corpus;
  PredictorArgs predictor;
  std::vector<std::string> term_paths;
  std::string class_name;
  std::string csv;
  std::string out;
  std::string sentence;
  std::string target;
  std::string manifest;

  void add(CLI::App* app) {
    corpus.add(app, false);
    predictor.add(app);
    app->add_option("--terms", term_paths, "Term lists (JSON)")->required();
    app->add_option("--class", class_name, "Class for the AOPC table (default: per list)");
    app->add_option("--csv", csv, "Shared-terms matrix CSV");
    app->add_option("--out", out, "Result JSON")->required();
    app->add_option("--sentence", sentence, "Append this sentence to every document not in --target");
    app->add_option("--target", target, "Target class of the appended sentence");
    app->add_option("--manifest", manifest, "Manifest path (default <out>.manifest.json)");
  }

  int run(const CLI::App* app, std::ostream& os) {
    Timings t;
    std::vector<TermList> lists;
    for (const auto& p : term_paths) lists.push_back(read_term_list(p));
    const std::size_t n = lists.size();

    // Lists of unequal length are compared on their common prefix length.
    json matrix = json::array();
    std::ostringstream table;
    table << "list";
    for (const auto& p : term_paths) table << ',' << std::filesystem::path(p).filename().string();
    table << '\n' << std::setprecision(10);
    for (std::size_t i = 0; i < n; ++i) {
      json row = json::array();
      table << std::filesystem::path(term_paths[i]).filename().string();
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t len = std::min(lists[i].size(), lists[j].size());
        TermList a = lists[i], b = lists[j];
        a.words.resize(len);
        b.words.resize(len);
        const double ratio = len == 0 ? 0.0 : shared_terms_ratio(a, b);
        row.push_back(ratio);
        table << ',' << ratio;
      }
      table << '\n';
      matrix.push_back(row);
    }
    if (!csv.empty()) write_text(csv, table.str());

    json result = {{"lists", term_paths}, {"shared_terms_ratio", matrix}};
    std::uint64_t calls = 0;
    if (!corpus.path.empty()) {
      auto f = predictor.make();
      const Corpus docs = corpus.load(f->classes());
      const CountingPredictor counted(*f);
      const auto assignment = classify(counted, docs);
      json aopc = json::array();
      for (std::size_t i = 0; i < n; ++i) {
        const std::string name = class_name.empty() ? lists[i].class_name : class_name;
        const ClassId c = resolve_class(f->classes(), name);
        const auto members = docs.members(c, assignment);
        const auto r = t.stage("aopc_" + std::to_string(i),
                               [&] { return aopc_k(lists[i], docs, members, counted, c); });
        aopc.push_back({{"list", term_paths[i]},
                        {"class", name},
                        {"aggregation", lists[i].aggregation},
                        {"k", lists[i].size()},
                        {"aopc", r.value}});
        os << term_paths[i] << ": AOPC^" << lists[i].size() << " = " << r.value << "\n";
      }
      result["aopc"] = aopc;
      if (!sentence.empty()) {
        if (target.empty()) throw InputError("--sentence requires --target");
        const auto r = append_drop(docs, counted, sentence, resolve_class(f->classes(), target));
        result["append_drop"] = {{"sentence", sentence},
                                 {"target", target},
                                 {"accuracy_before", r.accuracy_before},
                                 {"accuracy_after", r.accuracy_after},
                                 {"modified_documents", r.modified_documents}};
        os << "append-drop: accuracy " << r.accuracy_before << " -> " << r.accuracy_after << "\n";
      }
      calls = counted.calls();
    } else if (!sentence.empty()) {
      throw InputError("--sentence requires --corpus");
    }
    write_text(out, result.dump(2) + "\n");
    write_manifest(manifest.empty() ? default_manifest(out) : manifest, "compare", app, t,
                   {{"predictor_calls", calls}});
    return 0;
  }
};

// ---------------------------------------------------------------- synth

struct SynthCmd {
  SynthOptions opts;
  std::string out;
  std::string truth;
  std::string manifest;

  void add(CLI::App* app) {
    app->add_option("--documents", opts.documents, "Number of documents");
    app->add_option("--planted", opts.planted_per_class, "Planted signal words per class");
    app->add_option("--classes", opts.classes, "Class names");
    app->add_option("--noise", opts.label_noise, "Label noise rate");
    app->add_option("--min-tokens", opts.min_tokens, "Minimum document length");
    app->add_option("--max-tokens", opts.max_tokens, "Maximum document length");
    app->add_option("--min-signal", opts.min_signal, "Minimum signal words per document");
    app->add_option("--max-signal", opts.max_signal, "Maximum signal words per document");
    app->add_option("--stopword-rate", opts.stopword_rate, "Share of stop-word filler tokens");
    app->add_option("--filler-vocabulary", opts.filler_vocabulary, "Distinct filler words");
    app->add_option("--zipf", opts.zipf_exponent, "Filler frequency exponent");
    app->add_option("--stopword-zipf", opts.stopword_zipf_exponent, "Stop-word frequency exponent");
    app->add_option("--seed", opts.seed, "Root seed");
    app->add_option("--out", out, "Corpus output (JSONL)")->required();
    app->add_option("--truth", truth, "Ground truth output (JSON)")->required();
    app->add_option("--manifest", manifest, "Manifest path (default <out>.manifest.json)");
  }

  int run(const CLI::App* app, std::ostream& os) {
    Timings t;
    const SynthCorpus s = t.stage("synthesize", [&] { return synthesize(opts); });
    write_synth(s, opts, out, truth);
    os << "wrote " << s.corpus.size() << " documents\n";
    write_manifest(manifest.empty() ? default_manifest(out) : manifest, "synth", app, t,
                   {{"predictor_calls", 0}});
    return 0;
  }
};

// ---------------------------------------------------------------- anchors

struct AnchorsCmd {
  CorpusArgs corpus;
  PredictorArgs predictor;
  AnchorArgs anchor;
  std::vector<std::string> doc_ids;
  std::uint64_t seed = 0;
  std::string out;
  std::string manifest;

  void add(CLI::App* app) {
    corpus.add(app);
    predictor.add(app);
    anchor.add(app);
    app->add_option("--doc", doc_ids, "Document ids (default: all)");
    app->add_option("--seed", seed, "Root seed")->required();
    app->add_option("--out", out, "Trace output (JSONL)")->required();
    app->add_option("--manifest", manifest, "Manifest path (default <out>.manifest.json)");
  }

  int run(const CLI::App* app, std::ostream& os) {
    Timings t;
    auto f = predictor.make();
    const Corpus docs = corpus.load(f->classes());
    const WordStats stats = word_stats(docs);
    auto perturbator = anchor.make(stats, predictor.timeout_ms);
    const CountingPredictor counted(*f);

    std::vector<std::size_t> selected;
    if (doc_ids.empty()) {
      for (std::size_t i = 0; i < docs.size(); ++i) selected.push_back(i);
    } else {
      std::map<std::string, std::size_t> by_id;
      for (std::size_t i = 0; i < docs.size(); ++i) by_id[docs.document(i).id] = i;
      for (const auto& id : doc_ids) {
        const auto it = by_id.find(id);
        if (it == by_id.end()) throw InputError("unknown document id '" + id + "'");
        selected.push_back(it->second);
      }
    }

    std::ofstream trace = open_out(out);
    std::size_t anchors = 0;
    t.stage("anchors", [&] {
      for (std::size_t i : selected) {
        const auto& d = docs.document(i);
        const ClassId original = predict(counted, d);
        const auto ds = anchors_of_document(d, original, counted, *perturbator, anchor.cfg,
                                            constant_threshold(anchor.cfg.tau), seed);
        for (const auto& dec : ds) {
          anchors += dec.is_anchor ? 1 : 0;
          trace << decision_to_json(d.id, dec).dump() << "\n";
        }
      }
    });
    os << anchors << " anchors in " << selected.size() << " documents\n";
    write_manifest(manifest.empty() ? default_manifest(out) : manifest, "anchors", app, t,
                   {{"predictor_calls", counted.calls()}});
    return 0;
  }
};

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Global top-k impactful words of a text classifier from aggregated anchors",
               "anchoragg"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  TrainCmd train;
  TopKCmd topk;
  EvalCmd eval;
  CompareCmd compare;
  SynthCmd synth;
  AnchorsCmd anchors;

  // --config is consumed before parsing; registered here for --help.
  std::string config_help;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_help, "JSON config; explicit flags take precedence");
  };
  auto* train_app = app.add_subcommand("train", "Train the bag-of-words classifier");
  train.add(train_app);
  add_config(train_app);
  auto* topk_app = app.add_subcommand("topk", "Anytime top-k impactful words for one class");
  topk.add(topk_app);
  add_config(topk_app);
  auto* eval_app = app.add_subcommand("eval-aopc", "AOPC of a term list");
  eval.add(eval_app);
  add_config(eval_app);
  auto* compare_app = app.add_subcommand("compare", "Shared-terms matrix and AOPC table");
  compare.add(compare_app);
  add_config(compare_app);
  auto* synth_app = app.add_subcommand("synth", "Generate a planted-signal corpus");
  synth.add(synth_app);
  add_config(synth_app);
  auto* anchors_app = app.add_subcommand("anchors", "Per-document anchor trace");
  anchors.add(anchors_app);
  add_config(anchors_app);
  for (auto* sub : app.get_subcommands({})) {
    sub->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }

  try {
    std::vector<std::string> args = expand_config(raw_args);
    // CLI11 consumes arguments from the back.
    std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
    try {
      app.parse(reversed);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? 0 : 2;
    }
    if (train_app->parsed()) return train.run(train_app, out);
    if (topk_app->parsed()) return topk.run(topk_app, out, err);
    if (eval_app->parsed()) return eval.run(eval_app, out);
    if (compare_app->parsed()) return compare.run(compare_app, out);
    if (synth_app->parsed()) return synth.run(synth_app, out);
    if (anchors_app->parsed()) return anchors.run(anchors_app, out);
    return 2;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    err << "error: malformed input: " << e.what() << "\n";
    return 2;
  } catch (const RuntimeFailure& e) {
    err << "runtime failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "runtime failure: " << e.what() << "\n";
    return 3;
  }
}

int run(int argc, char** argv) {
  std::signal(SIGINT, on_sigint);
  std::vector<std::string> args(argv, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace anchoragg::cli

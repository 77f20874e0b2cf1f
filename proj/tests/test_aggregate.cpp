#include <doctest.h>

#include <cmath>
#include <limits>

#include <json.hpp>

#include "anchoragg/aggregate.hpp"
#include "anchoragg/anchor.hpp"
#include "anchoragg/perturb.hpp"
#include "helpers.hpp"

using namespace anchoragg;
using testing::toy_corpus;

namespace {

/// Stats over a vocabulary where every word occurs once in every class.
WordStats vocab_stats(const std::vector<std::string>& words, std::size_t classes = 2) {
  std::vector<std::pair<std::string, std::string>> rows;
  for (const auto& w : words) {
    for (std::size_t c = 0; c < classes; ++c) rows.emplace_back(w, "c" + std::to_string(c));
  }
  return word_stats(toy_corpus(rows));
}

std::vector<WordId> all_ids(std::size_t n) {
  std::vector<WordId> out(n);
  for (WordId w = 0; w < n; ++w) out[w] = w;
  return out;
}

double log_likelihood(const std::vector<std::uint64_t>& plus, const std::vector<std::uint64_t>& minus,
                      const std::vector<double>& p, const std::vector<double>& q, double alpha) {
  double ll = 0.0;
  for (std::size_t w = 0; w < plus.size(); ++w) {
    const double mix = alpha * q[w] + (1.0 - alpha) * p[w];
    if (plus[w] > 0) {
      if (mix <= 0.0) return -std::numeric_limits<double>::infinity();
      ll += static_cast<double>(plus[w]) * std::log(mix);
    }
    if (minus[w] > 0) {
      if (p[w] <= 0.0) return -std::numeric_limits<double>::infinity();
      ll += static_cast<double>(minus[w]) * std::log(p[w]);
    }
  }
  return ll;
}

std::vector<std::vector<double>> simplex_grid(std::size_t dim, int steps) {
  std::vector<std::vector<double>> out;
  if (dim == 2) {
    for (int i = 0; i <= steps; ++i) out.push_back({i / double(steps), (steps - i) / double(steps)});
  } else {
    for (int i = 0; i <= steps; ++i) {
      for (int j = 0; i + j <= steps; ++j) {
        out.push_back({i / double(steps), j / double(steps), (steps - i - j) / double(steps)});
      }
    }
  }
  return out;
}

AnchorDecision decision(const std::string& word, std::size_t pos, bool anchor) {
  AnchorDecision d;
  d.token = {word, pos};
  d.is_anchor = anchor;
  return d;
}

}  // namespace

TEST_CASE("update tallies anchors and non-anchors positionally") {
  const WordStats s = vocab_stats({"bad", "great"});
  AnchorCounts counts(s.size(), 2);
  const std::vector<AnchorDecision> d{decision("great", 0, true), decision("great", 1, true),
                                      decision("bad", 2, false)};
  counts.update(d, 1, "d1", s);
  CHECK(counts.a_plus(s.id("great"), 1) == 2);
  CHECK(counts.a_minus(s.id("bad"), 1) == 1);
  CHECK(counts.total_plus(1) == 2);
  CHECK(counts.total_minus(1) == 1);
  CHECK(counts.documents_processed(1) == 1);

  const AnchorCounts before = counts;
  counts.update({}, 1, "empty", s);
  CHECK(counts.a_plus(s.id("great"), 1) == 2);
  CHECK(counts.total_minus(1) == 1);

  const std::vector<AnchorDecision> mixed{decision("great", 0, true), decision("great", 1, false)};
  counts.update(mixed, 0, "d2", s);
  CHECK(counts.a_plus(s.id("great"), 0) == 1);
  CHECK(counts.a_minus(s.id("great"), 0) == 1);
  CHECK(counts.distinct_words(0) == 1);

  CHECK_THROWS_AS(counts.update(d, 1, "d1", s), InputError);
  CHECK(before.a_plus(s.id("great"), 1) == 2);
}

TEST_CASE("count conservation over a class") {
  const Corpus c = toy_corpus({{"good film good cast", "pos"},
                               {"bad film", "neg"},
                               {"good plot and bad acting", "pos"},
                               {"meh", "neg"}});
  const WordStats s = word_stats(c);
  const auto f = testing::keyword_predictor("good");
  const auto p = build_unigram_perturbator(s, 10, 0.5);
  AnchorCounts counts(s.size(), 2);
  std::uint64_t tokens_pos = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c.label(i) != 1) continue;
    const auto ds = anchors_of_document(c.document(i), 1, f, p, {}, constant_threshold(0.95), 3);
    counts.update(ds, 1, c.document(i).id, s);
    tokens_pos += c.document(i).size();
  }
  std::uint64_t total = 0, plus = 0, minus = 0;
  for (WordId w = 0; w < s.size(); ++w) {
    total += counts.occurrences(w, 1);
    plus += counts.a_plus(w, 1);
    minus += counts.a_minus(w, 1);
    CHECK(counts.occurrences(w, 1) == s.class_occurrences[1][w]);
  }
  CHECK(total == tokens_pos);
  CHECK(plus == counts.total_plus(1));
  CHECK(minus == counts.total_minus(1));
  CHECK(counts.a_plus(s.id("good"), 1) == 3);
}

TEST_CASE("g_sq and g_av examples") {
  AnchorCounts counts(4, 1);
  counts.add(0, 0, 0, 3);
  counts.add(1, 0, 4, 0);
  counts.add(2, 0, 2, 0);
  CHECK(g_sq(counts, 0, 0) == 0.0);
  CHECK(g_sq(counts, 1, 0) == 2.0);
  CHECK(*g_sq(counts, 2, 0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK_FALSE(g_sq(counts, 3, 0).has_value());

  AnchorCounts av(4, 1);
  av.add(0, 0, 1, 0);
  av.add(1, 0, 0, 7);
  av.add(2, 0, 3, 1);
  CHECK(g_av(av, 0, 0) == 1.0);
  CHECK(g_av(av, 1, 0) == 0.0);
  CHECK(g_av(av, 2, 0) == 0.75);
  CHECK_FALSE(g_av(av, 3, 0).has_value());
}

TEST_CASE("g_av with a minimum frequency excludes rare words") {
  const WordStats s = word_stats(toy_corpus({{"rare often often often often often", "x"}}));
  AnchorCounts counts(s.size(), 1);
  counts.add(s.id("rare"), 0, 1, 0);
  counts.add(s.id("often"), 0, 3, 2);
  CHECK_FALSE(g_av(counts, s.id("rare"), 0, 5, &s).has_value());
  CHECK(g_av(counts, s.id("often"), 0, 5, &s) == 0.6);
  CHECK_THROWS_AS(g_av(counts, s.id("often"), 0, 5, nullptr), InputError);

  const std::vector<WordId> cands{s.id("often"), s.id("rare")};
  const Scorer scorer(counts, s, 0, {AggregationKind::av_minfreq, 0.5, 5}, cands);
  CHECK_FALSE(scorer.score(s.id("rare")).has_value());
  CHECK(scorer.score(s.id("often")) == 0.6);
}

TEST_CASE("g_h examples") {
  // a: anchored only in class 0; b: equal in both classes; c: 4 vs 1.
  AnchorCounts counts(3, 2);
  counts.add(0, 0, 4, 0);
  counts.add(1, 0, 1, 0);
  counts.add(1, 1, 1, 0);
  counts.add(2, 0, 4, 0);
  counts.add(2, 1, 1, 0);
  const auto ids = all_ids(3);
  const double h_max = std::log(2.0);
  CHECK(*g_h(counts, 0, 0, ids) == doctest::Approx(2.0));
  CHECK(*g_h(counts, 1, 0, ids) == doctest::Approx(0.0));
  const double hc = -(2.0 / 3.0) * std::log(2.0 / 3.0) - (1.0 / 3.0) * std::log(1.0 / 3.0);
  CHECK(*g_h(counts, 2, 0, ids) == doctest::Approx(2.0 * (1.0 - hc / h_max)).epsilon(1e-12));

  const WordStats stats = vocab_stats({"a", "b", "c"});
  const Scorer scorer(counts, stats, 0, {AggregationKind::h}, ids);
  CHECK(*scorer.score(2) == doctest::Approx(2.0 * (1.0 - hc / h_max)).epsilon(1e-12));

  AnchorCounts single(3, 1);
  single.add(0, 0, 4, 1);
  single.add(1, 0, 9, 0);
  single.add(2, 0, 0, 2);
  CHECK(*g_h(single, 0, 0, ids) == 2.0);
  CHECK(*g_h(single, 1, 0, ids) == 3.0);
  CHECK_FALSE(g_h(single, 2, 0, ids).has_value());
}

TEST_CASE("mle estimates for the two-word example") {
  AnchorCounts counts(2, 1);
  counts.add(0, 0, 3, 1);
  counts.add(1, 0, 1, 3);
  const auto params = mle_params(counts, 0.5, 0);
  // Oracle: q = 2·A⁺/ΣA⁺ − A⁻/ΣA⁻, p = A⁻/ΣA⁻.
  CHECK(params.q_tilde[0] == doctest::Approx(2.0 * 3 / 4 - 1.0 / 4));
  CHECK(params.q_tilde[1] == doctest::Approx(2.0 * 1 / 4 - 3.0 / 4));
  CHECK(params.q_tilde[0] == doctest::Approx(1.25));
  CHECK(params.q_tilde[1] == doctest::Approx(-0.25));
  CHECK(params.p_tilde[0] == doctest::Approx(0.25));
  CHECK(params.p_tilde[1] == doctest::Approx(0.75));
  CHECK(params.q_min == doctest::Approx(-0.25));

  const auto smoothed = laplace_smooth(params);
  CHECK(smoothed.beta == doctest::Approx(0.25));
  CHECK(smoothed.q_star[0] == doctest::Approx((1.25 + 0.25) / (1 + 2 * 0.25)));
  CHECK(smoothed.q_star[0] == doctest::Approx(1.0));
  CHECK(smoothed.q_star[1] == doctest::Approx(0.0));
  CHECK(*g_pr(counts, 0.5, 0, 0) == doctest::Approx(1.0));
  CHECK(*g_pr(counts, 0.5, 1, 0) == doctest::Approx(0.0));

  CHECK(g_pr_inverse(counts, 0.5, 0, 0) == doctest::Approx(1.0));
  CHECK_FALSE(g_pr_inverse(counts, 0.5, 1, 0).has_value());
}

TEST_CASE("mle with alpha one is the anchor share") {
  AnchorCounts counts(3, 1);
  counts.add(0, 0, 5, 2);
  counts.add(1, 0, 3, 9);
  counts.add(2, 0, 0, 1);
  const auto params = laplace_smooth(mle_params(counts, 1.0, 0));
  CHECK(params.q_tilde[0] == doctest::Approx(5.0 / 8.0));
  CHECK(params.q_tilde[1] == doctest::Approx(3.0 / 8.0));
  CHECK(params.q_tilde[2] == 0.0);
  CHECK(params.beta == 0.0);
  CHECK(params.q_star[0] == params.q_tilde[0]);
}

TEST_CASE("mle preconditions") {
  AnchorCounts counts(2, 1);
  counts.add(0, 0, 2, 0);
  CHECK_THROWS_AS(mle_params(counts, 0.5, 0), InputError);
  CHECK_FALSE(g_pr(counts, 0.5, 0, 0).has_value());
  counts.add(1, 0, 0, 1);
  CHECK_THROWS_AS(mle_params(counts, 0.0, 0), InputError);
  CHECK_THROWS_AS(mle_params(counts, 1.5, 0), InputError);
}

TEST_CASE("estimates sum to one and smoothing preserves ranks") {
  Rng rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.below(7);
    AnchorCounts counts(n, 1);
    for (WordId w = 0; w < n; ++w) counts.add(w, 0, rng.below(9), rng.below(9));
    if (counts.total_plus(0) == 0 || counts.total_minus(0) == 0) continue;
    const double alpha = 0.1 + 0.9 * rng.uniform();
    const auto raw = mle_params(counts, alpha, 0);
    const auto sm = laplace_smooth(raw);
    double sp = 0.0, sq = 0.0, ss = 0.0;
    for (WordId w = 0; w < n; ++w) {
      sp += raw.p_tilde[w];
      sq += raw.q_tilde[w];
      ss += sm.q_star[w];
      if (counts.occurrences(w, 0) > 0) CHECK(sm.q_star[w] >= -1e-12);
    }
    CHECK(sp == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(sq == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(ss == doctest::Approx(1.0).epsilon(1e-9));
    for (WordId a = 0; a < n; ++a) {
      for (WordId b = 0; b < n; ++b) {
        if (counts.occurrences(a, 0) == 0 || counts.occurrences(b, 0) == 0) continue;
        const double dq = raw.q_tilde[a] - raw.q_tilde[b];
        const double ds = sm.q_star[a] - sm.q_star[b];
        CHECK((dq > 1e-12) == (ds > 1e-12));
        CHECK((dq < -1e-12) == (ds < -1e-12));
      }
    }
  }
}

TEST_CASE("closed-form estimates maximize the likelihood against grid search") {
  Rng rng(5);
  int checked = 0;
  while (checked < 8) {
    const std::size_t n = 2 + rng.below(2);
    std::vector<std::uint64_t> plus(n), minus(n);
    AnchorCounts counts(n, 1);
    for (std::size_t w = 0; w < n; ++w) {
      plus[w] = 1 + rng.below(8);
      minus[w] = 1 + rng.below(8);
      counts.add(w, 0, plus[w], minus[w]);
    }
    const double alpha = 0.5;
    const auto params = mle_params(counts, alpha, 0);
    if (params.q_min < 0.0) continue;
    const double closed = log_likelihood(plus, minus, params.p_tilde, params.q_tilde, alpha);
    double best = -std::numeric_limits<double>::infinity();
    const auto grid = simplex_grid(n, 50);
    for (const auto& p : grid) {
      for (const auto& q : grid) best = std::max(best, log_likelihood(plus, minus, p, q, alpha));
    }
    CHECK(closed >= best - 1e-6);
    ++checked;
  }
}

TEST_CASE("a pure anchor outranks an equally frequent mixed word") {
  for (std::uint64_t n = 2; n <= 10; ++n) {
    for (std::uint64_t x = 1; x < n; ++x) {
      for (std::uint64_t u = 1; u <= 10; u += 3) {
        for (std::uint64_t v = 1; v <= 10; v += 3) {
          AnchorCounts counts(3, 1);
          counts.add(0, 0, n, 0);
          counts.add(1, 0, x, n - x);
          counts.add(2, 0, u, v);
          CHECK(*g_pr(counts, 0.5, 0, 0) > *g_pr(counts, 0.5, 1, 0));
        }
      }
    }
  }
}

TEST_CASE("never-anchored words score non-negative under smoothing") {
  AnchorCounts counts(3, 1);
  counts.add(0, 0, 0, 9);
  counts.add(1, 0, 4, 1);
  counts.add(2, 0, 1, 1);
  CHECK(mle_params(counts, 0.5, 0).q_min < 0.0);
  CHECK(*g_pr(counts, 0.5, 0, 0) >= 0.0);
}

TEST_CASE("g_base examples") {
  const Corpus c = toy_corpus({{"w", "a"}, {"w x", "a"}, {"w", "b"}, {"w", "b"}, {"y", "b"}});
  const WordStats s = word_stats(c);
  CHECK(g_base(s, s.id("w"), 0) == 0.5);
  CHECK(g_base(s, s.id("x"), 0) == 1.0);
  CHECK(g_base(s, s.id("x"), 1) == 0.0);
  CHECK_FALSE(g_base(s, 99, 0).has_value());
}

TEST_CASE("g_pr_inverse is the reciprocal") {
  AnchorCounts counts(3, 1);
  counts.add(0, 0, 2, 2);
  counts.add(1, 0, 2, 2);
  counts.add(2, 0, 0, 0);
  CHECK(*g_pr(counts, 0.5, 0, 0) == doctest::Approx(0.5));
  CHECK(*g_pr_inverse(counts, 0.5, 0, 0) == doctest::Approx(2.0));
}

TEST_CASE("range properties of the simple aggregations") {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    AnchorCounts counts(5, 3);
    for (WordId w = 0; w < 5; ++w) {
      for (ClassId c = 0; c < 3; ++c) counts.add(w, c, rng.below(6), rng.below(6));
    }
    const auto ids = all_ids(5);
    for (WordId w = 0; w < 5; ++w) {
      for (ClassId c = 0; c < 3; ++c) {
        if (auto av = g_av(counts, w, c)) {
          CHECK(*av >= 0.0);
          CHECK(*av <= 1.0);
        }
        const auto sq = g_sq(counts, w, c);
        if (auto h = g_h(counts, w, c, ids)) CHECK(*h <= *sq + 1e-12);
      }
    }
  }
  AnchorCounts inc(1, 1);
  double prev = -1.0;
  for (int i = 0; i < 10; ++i) {
    inc.add(0, 0, 1, 0);
    CHECK(*g_sq(inc, 0, 0) > prev);
    prev = *g_sq(inc, 0, 0);
  }
}

TEST_CASE("scorer matches the free functions") {
  Rng rng(17);
  const WordStats s = vocab_stats({"a", "b", "c", "d", "e"});
  const auto ids = all_ids(5);
  for (int trial = 0; trial < 50; ++trial) {
    AnchorCounts counts(5, 2);
    for (WordId w = 0; w < 5; ++w) {
      for (ClassId c = 0; c < 2; ++c) counts.add(w, c, rng.below(5), rng.below(5));
    }
    for (ClassId c = 0; c < 2; ++c) {
      const Scorer sq(counts, s, c, {AggregationKind::sq}, ids);
      const Scorer av(counts, s, c, {AggregationKind::av}, ids);
      const Scorer h(counts, s, c, {AggregationKind::h}, ids);
      const Scorer pr(counts, s, c, {AggregationKind::pr, 0.5}, ids);
      const Scorer inv(counts, s, c, {AggregationKind::pr_inverse, 0.5}, ids);
      const Scorer base(counts, s, c, {AggregationKind::base}, ids);
      for (WordId w = 0; w < 5; ++w) {
        CHECK(sq.score(w) == g_sq(counts, w, c));
        CHECK(av.score(w) == g_av(counts, w, c));
        const auto gh = g_h(counts, w, c, ids);
        CHECK(h.score(w).has_value() == gh.has_value());
        if (gh) CHECK(*h.score(w) == doctest::Approx(*gh).epsilon(1e-12));
        const auto gp = g_pr(counts, 0.5, w, c);
        if (gp) {
          CHECK(*pr.score(w) == doctest::Approx(*gp).epsilon(1e-12));
          CHECK(pr.pr_value(w) == doctest::Approx(*gp).epsilon(1e-12));
        }
        const auto gi = g_pr_inverse(counts, 0.5, w, c);
        CHECK(inv.score(w).has_value() == gi.has_value());
        if (gi) CHECK(*inv.score(w) == doctest::Approx(*gi).epsilon(1e-9));
        if (counts.occurrences(w, c) > 0) {
          CHECK(base.score(w) == g_base(s, w, c));
        } else {
          CHECK_FALSE(base.score(w).has_value());
        }
      }
    }
  }
}

TEST_CASE("undefined model scores zero until both totals are positive") {
  const WordStats s = vocab_stats({"a", "b"});
  AnchorCounts counts(2, 2);
  counts.add(0, 0, 3, 0);
  const Scorer pr(counts, s, 0, {AggregationKind::pr, 0.5}, all_ids(2));
  CHECK_FALSE(pr.model_defined());
  CHECK(pr.score(0) == 0.0);
  CHECK_FALSE(pr.score(1).has_value());
}

TEST_CASE("upper bound examples") {
  const WordStats s = vocab_stats({"a", "b"});
  AnchorCounts counts(2, 1);
  counts.add(0, 0, 1, 1);
  const auto ids = all_ids(2);
  const Scorer av(counts, s, 0, {AggregationKind::av}, ids);
  CHECK(*av.upper_bound(0, 2) == doctest::Approx(0.75));
  CHECK(av.upper_bound(0, 0) == av.score(0));

  AnchorCounts sqc(2, 1);
  sqc.add(0, 0, 1, 0);
  const Scorer sq(sqc, s, 0, {AggregationKind::sq}, ids);
  CHECK(*sq.upper_bound(0, 3) == 2.0);
}

TEST_CASE("upper bounds of monotone aggregations are admissible") {
  const WordStats s = vocab_stats({"a", "b"});
  const auto ids = all_ids(2);
  for (std::uint64_t plus = 0; plus <= 3; ++plus) {
    for (std::uint64_t minus = 0; minus <= 3; ++minus) {
      for (std::uint64_t remaining = 1; remaining <= 12; remaining += 1) {
        AnchorCounts counts(2, 1);
        counts.add(0, 0, plus, minus);
        counts.add(1, 0, 2, 2);
        for (auto kind : {AggregationKind::sq, AggregationKind::av}) {
          const Scorer early(counts, s, 0, {kind}, ids);
          const auto bound = early.upper_bound(0, remaining);
          REQUIRE(bound.has_value());
          for (std::uint64_t mask = 0; mask < (1ull << remaining); ++mask) {
            const auto anchors = static_cast<std::uint64_t>(std::popcount(mask));
            AnchorCounts later = counts;
            later.add(0, 0, anchors, remaining - anchors);
            const Scorer final_scorer(later, s, 0, {kind}, ids);
            CHECK(*final_scorer.score(0) <= *bound + 1e-12);
          }
        }
      }
    }
  }
}

TEST_CASE("ranking order and offline top-k") {
  const WordStats s = vocab_stats({"a", "b", "c", "d"});
  AnchorCounts counts(4, 1);
  counts.add(0, 0, 1, 0);
  counts.add(1, 0, 4, 0);
  counts.add(2, 0, 1, 0);
  const Scorer sq(counts, s, 0, {AggregationKind::sq}, all_ids(4));
  const auto top = rank_words(sq, all_ids(4), 10);
  REQUIRE(top.size() == 3);
  CHECK(top[0].word == 1);
  CHECK(top[1].word == 0);
  CHECK(top[2].word == 2);
  CHECK(rank_words(sq, all_ids(4), 1).size() == 1);
  CHECK(ranks_before({0, 1.0}, {2, 1.0}));
  CHECK_FALSE(ranks_before({2, 1.0}, {0, 1.0}));
}

TEST_CASE("aggregation names round-trip") {
  for (auto k : {AggregationKind::sq, AggregationKind::av, AggregationKind::av_minfreq,
                 AggregationKind::h, AggregationKind::pr, AggregationKind::base,
                 AggregationKind::pr_inverse}) {
    CHECK(parse_aggregation(aggregation_name(k)) == k);
  }
  CHECK_THROWS_AS(parse_aggregation("max"), InputError);
}

TEST_CASE("score dump lines") {
  const WordStats s = vocab_stats({"a", "b"});
  AnchorCounts counts(2, 2);
  counts.add(0, 1, 4, 1);
  const Scorer sq(counts, s, 1, {AggregationKind::sq}, all_ids(2));
  const std::string dump = score_dump(sq, counts, s, all_ids(2), {"neg", "pos"}, 1);
  CHECK(std::count(dump.begin(), dump.end(), '\n') == 1);
  const auto j = nlohmann::json::parse(dump.substr(0, dump.find('\n')));
  CHECK(j["word"] == "a");
  CHECK(j["class"] == "pos");
  CHECK(j["a_plus"] == 4);
  CHECK(j["a_minus"] == 1);
  CHECK(j["score"] == 2.0);
  CHECK(j["agg"] == "sq");
}

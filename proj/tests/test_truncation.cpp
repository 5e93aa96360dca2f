#include <doctest.h>

#include <cmath>

#include "blindspot/error.hpp"
#include "blindspot/random.hpp"
#include "blindspot/synth.hpp"
#include "blindspot/truncation.hpp"
#include "test_helpers.hpp"

using namespace blindspot;
using blindspot::testing::corpus_of;
using blindspot::testing::event_with_rank;
using blindspot::testing::human_doc;

TEST_CASE("membership at the boundaries") {
  CHECK_FALSE(membership(event_with_rank(0, 12), TruncationPolicy::top_k(10)));
  CHECK(membership(event_with_rank(0, 10), TruncationPolicy::top_k(10)));
  CHECK(membership(event_with_rank(0, 4, 0.85), TruncationPolicy::top_p(0.9)));
  CHECK_FALSE(membership(event_with_rank(0, 4, 0.9), TruncationPolicy::top_p(0.9)));
  CHECK(membership(event_with_rank(0, 1), TruncationPolicy::top_p(1e-9)));
  CHECK(membership(event_with_rank(0, 5), TruncationPolicy::contrastive(5)));
  CHECK_FALSE(membership(event_with_rank(0, 6), TruncationPolicy::contrastive(5)));
}

TEST_CASE("policy parsing") {
  CHECK(TruncationPolicy::parse("topk:10") == TruncationPolicy::top_k(10));
  CHECK(TruncationPolicy::parse("topp:0.95") == TruncationPolicy::top_p(0.95));
  CHECK(TruncationPolicy::parse("contrastive:4") == TruncationPolicy::contrastive(4));
  CHECK(TruncationPolicy::top_p(0.9).to_string() == "topp:0.9");
  for (const char* bad : {"topk:0", "topp:0", "topp:1.5", "topk", "beam:3", "topk:x", "topp:nan"}) {
    CHECK_THROWS_AS(TruncationPolicy::parse(bad), Error);
  }
}

TEST_CASE("pooled exclusion rate") {
  // 10 tokens, ranks {1,1,2,3,15,1,1,40,2,1}: two outside top-10.
  const Corpus c = corpus_of({human_doc("a", {1, 1, 2, 3, 15, 1, 1, 40, 2, 1})});
  const auto est = exclusion_rate(c, TruncationPolicy::top_k(10));
  CHECK(est.point == doctest::Approx(0.2));
  CHECK(est.n_tokens == 10);
  CHECK(est.n_docs == 1);
  CHECK(exclusion_rate(c, TruncationPolicy::top_k(1)).point == doctest::Approx(0.5));
}

TEST_CASE("pooled rate weights tokens, not documents") {
  const Corpus c = corpus_of({human_doc("a", {20}), human_doc("b", {1, 1, 1})});
  CHECK(exclusion_rate(c, TruncationPolicy::top_k(10)).point == doctest::Approx(0.25));
}

TEST_CASE("filter selecting nothing") {
  const Corpus c = corpus_of({human_doc("a", {1, 2})});
  const DocFilter none = [](const DocRecord&) { return false; };
  try {
    exclusion_rate(c, TruncationPolicy::top_k(10), none);
    FAIL("expected EmptySelection");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kEmptySelection);
  }
  CHECK_THROWS_AS(rank_distribution(c, none), Error);
}

TEST_CASE("bootstrap interval") {
  const Corpus two = corpus_of({human_doc("a", {1, 1}), human_doc("b", {50, 50})});
  const auto est = exclusion_rate_ci(two, TruncationPolicy::top_k(10), 1000, 5);
  CHECK(est.point == doctest::Approx(0.5));
  REQUIRE(est.ci_low.has_value());
  CHECK(*est.ci_low == 0.0);
  CHECK(*est.ci_high == 1.0);

  const Corpus one = corpus_of({human_doc("a", {1, 20})});
  try {
    exclusion_rate_ci(one, TruncationPolicy::top_k(10), 1000, 5);
    FAIL("expected TooFewDocs");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kTooFewDocs);
  }
  CHECK_THROWS_AS(exclusion_rate_ci(two, TruncationPolicy::top_k(10), 50, 5), Error);
}

TEST_CASE("bootstrap is reproducible and thread-count invariant") {
  const auto m = synth::make_zipf_model(200, 1.0, 1);
  const synth::HumanDist h(std::vector<double>(200, 1.0 / 200));
  const Corpus c = synth::generate_synthetic_corpus(m, h, 50, 30, 9, {});
  const auto p = TruncationPolicy::top_k(20);
  const auto a = exclusion_rate_ci(c, p, 500, 11, {}, 1);
  const auto b = exclusion_rate_ci(c, p, 500, 11, {}, 4);
  CHECK(*a.ci_low == *b.ci_low);
  CHECK(*a.ci_high == *b.ci_high);
  CHECK(*a.ci_low <= a.point);
  CHECK(a.point <= *a.ci_high);
}

TEST_CASE("rank distribution bins and summary") {
  CHECK(rank_bin(1) == 0);
  CHECK(rank_bin(5) == 0);
  CHECK(rank_bin(6) == 1);
  CHECK(rank_bin(20) == 2);
  CHECK(rank_bin(50) == 3);
  CHECK(rank_bin(100) == 4);
  CHECK(rank_bin(101) == 5);

  const Corpus c = corpus_of({human_doc("a", {1, 1, 2, 3, 15, 1, 1, 40, 2, 1})});
  const auto h = rank_distribution(c);
  CHECK(h.bin_counts[0] == 8);
  CHECK(h.bin_counts[2] == 1);
  CHECK(h.bin_counts[3] == 1);
  CHECK(h.bin_shares[0] == doctest::Approx(0.8));
  CHECK(h.median_rank == 1.0);
  CHECK(h.mean_rank == doctest::Approx(6.7));
  CHECK_FALSE(h.median_exceeds_mean);
  double total = 0.0;
  for (double s : h.bin_shares) total += s;
  CHECK(total == doctest::Approx(1.0));
}

TEST_CASE("uniform model ranks") {
  const auto m = synth::make_zipf_model(100, 0.0, 0);
  const synth::HumanDist h(m.probs());
  const std::int64_t n = 100000;
  const Corpus c = synth::generate_synthetic_corpus(m, h, n, 17);
  const auto hist = rank_distribution(c);
  const double se = std::sqrt((100.0 * 100.0 - 1.0) / 12.0 / static_cast<double>(n));
  CHECK(std::abs(hist.mean_rank - 50.5) < 3.0 * se);
  const std::array<double, 6> expect{0.05, 0.05, 0.10, 0.30, 0.50, 0.0};
  for (std::size_t b = 0; b < 6; ++b) {
    const double tol = 4.0 * std::sqrt(expect[b] * (1 - expect[b]) / static_cast<double>(n)) + 1e-12;
    CHECK(std::abs(hist.bin_shares[b] - expect[b]) <= tol);
  }
}

TEST_CASE("monotone in k and p, and nested") {
  SplitMix64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = synth::make_zipf_model(60, 0.5 + uniform01(rng), trial);
    const synth::HumanDist h(std::vector<double>(60, 1.0 / 60));
    const Corpus c = synth::generate_synthetic_corpus(m, h, 200, trial);
    double prev = 1.0;
    for (std::int64_t k = 1; k <= 61; ++k) {
      const double r = exclusion_rate(c, TruncationPolicy::top_k(k)).point;
      CHECK(r <= prev);
      prev = r;
    }
    prev = 1.0;
    for (double p = 0.05; p <= 1.0; p += 0.05) {
      const double r = exclusion_rate(c, TruncationPolicy::top_p(p)).point;
      CHECK(r <= prev);
      prev = r;
    }
    for (const auto& ev : c.docs[0].events) {
      if (membership(ev, TruncationPolicy::top_k(5))) CHECK(membership(ev, TruncationPolicy::top_k(6)));
      if (membership(ev, TruncationPolicy::top_p(0.6))) CHECK(membership(ev, TruncationPolicy::top_p(0.61)));
    }
  }
}

TEST_CASE("jaccard") {
  CHECK(jaccard({1, 2, 3}, {1, 2, 3}) == 1.0);
  CHECK(jaccard({1, 2}, {3, 4}) == 0.0);
  CHECK(jaccard({1, 2, 3}, {2, 3, 4}) == doctest::Approx(0.5));
  CHECK(jaccard({5, 1}, {1, 9, 7}) == jaccard({1, 9, 7}, {5, 1}));
  CHECK(jaccard({}, {}) == 1.0);
}

namespace {

DocRecord topn_doc(const std::string& id, const std::string& tok, std::vector<std::vector<std::int64_t>> lists) {
  DocRecord d = human_doc(id, std::vector<std::int64_t>(lists.size(), 1));
  d.tokenizer_id = tok;
  for (std::size_t i = 0; i < lists.size(); ++i) {
    d.events[i].token_id = lists[i][0];
    d.events[i].topn_ids = lists[i];
  }
  return d;
}

}  // namespace

TEST_CASE("truncation overlap") {
  const Corpus a = corpus_of({topn_doc("x", "tk", {{1, 2, 3}, {4, 5, 6}})});
  const Corpus b = corpus_of({topn_doc("x", "tk", {{1, 2, 9}, {4, 5, 6}})});
  const auto s = truncation_overlap(a, b, TruncationPolicy::top_k(3));
  CHECK(s.n_positions == 2);
  CHECK(s.mean_jaccard == doctest::Approx(0.75));
  CHECK(s.std_jaccard == doctest::Approx(0.25));
  CHECK(truncation_overlap(a, a, TruncationPolicy::top_k(3)).mean_jaccard == 1.0);

  const auto deep = truncation_overlap(a, b, TruncationPolicy::top_k(10));
  CHECK(deep.n_positions == 0);
  CHECK(deep.n_skipped == 2);

  const Corpus other_tok = corpus_of({topn_doc("x", "other", {{1, 2, 3}, {4, 5, 6}})});
  try {
    truncation_overlap(a, other_tok, TruncationPolicy::top_k(3));
    FAIL("expected TokenizerMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kTokenizerMismatch);
  }
  const Corpus unrelated = corpus_of({topn_doc("y", "tk", {{1}})});
  CHECK_THROWS_AS(truncation_overlap(a, unrelated, TruncationPolicy::top_k(1)), Error);

  Corpus missing = b;
  missing.docs[0].events[1].topn_ids.reset();
  try {
    truncation_overlap(a, missing, TruncationPolicy::top_k(3));
    FAIL("expected MissingTopN");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kMissingTopN);
  }
}

TEST_CASE("top-p sets from stored log-probabilities") {
  TokenEvent ev = event_with_rank(0, 1);
  ev.topn_ids = std::vector<std::int64_t>{7, 8, 9};
  ev.topn_logprobs = std::vector<double>{std::log(0.5), std::log(0.3), std::log(0.1)};
  auto s = truncation_set_from_topn(ev, TruncationPolicy::top_p(0.7));
  REQUIRE(s.has_value());
  CHECK(*s == std::vector<std::int64_t>{7, 8});
  CHECK_FALSE(truncation_set_from_topn(ev, TruncationPolicy::top_p(0.95)).has_value());
  ev.topn_logprobs.reset();
  CHECK_FALSE(truncation_set_from_topn(ev, TruncationPolicy::top_p(0.7)).has_value());
}

TEST_CASE("membership examples") {
  CHECK(membership(event_with_rank(0, 3), TruncationPolicy::top_k(10)));
  CHECK_FALSE(membership(event_with_rank(0, 7, 0.92), TruncationPolicy::top_p(0.9)));
  for (const auto& p : {TruncationPolicy::top_k(1), TruncationPolicy::top_p(1e-12), TruncationPolicy::top_p(1.0),
                        TruncationPolicy::contrastive(1)}) {
    CHECK(membership(event_with_rank(0, 1), p));
  }
}

TEST_CASE("exclusion rate examples") {
  const Corpus c = corpus_of({human_doc("a", {1, 11, 2, 3, 50, 4, 1, 99, 2, 1})});
  CHECK(exclusion_rate(c, TruncationPolicy::top_k(10)).point == doctest::Approx(0.3));
  CHECK(exclusion_rate(c, TruncationPolicy::top_p(1.0)).point == 0.0);

  const auto m = synth::make_zipf_model(100, 0.0, 0);
  const synth::HumanDist h(m.probs());
  const Corpus big = synth::generate_synthetic_corpus(m, h, 50000, 123);
  const double tol = 4.0 * std::sqrt(0.9 * 0.1 / 50000.0);
  CHECK(std::abs(exclusion_rate(big, TruncationPolicy::top_k(10)).point - 0.9) <= tol);
  CHECK(exclusion_rate(big, TruncationPolicy::top_p(1.0)).point == 0.0);
}

TEST_CASE("interval examples") {
  // Every document at rate 0.2.
  std::vector<DocRecord> docs;
  for (int d = 0; d < 6; ++d) docs.push_back(human_doc("d" + std::to_string(d), {1, 1, 1, 1, 20}));
  const Corpus flat = corpus_of(docs);
  const auto est = exclusion_rate_ci(flat, TruncationPolicy::top_k(10), 1000, 1);
  CHECK(*est.ci_low == doctest::Approx(0.2));
  CHECK(*est.ci_high == doctest::Approx(0.2));

  const auto again = exclusion_rate_ci(flat, TruncationPolicy::top_k(2), 1000, 1);
  const auto same = exclusion_rate_ci(flat, TruncationPolicy::top_k(2), 1000, 1);
  CHECK(*again.ci_low == *same.ci_low);
  CHECK(*again.ci_high == *same.ci_high);

  const Corpus two = corpus_of({human_doc("a", {1, 1, 1}), human_doc("b", {70, 70, 70})});
  const auto wide = exclusion_rate_ci(two, TruncationPolicy::top_k(10), 10000, 2);
  CHECK(wide.point == 0.5);
  CHECK(*wide.ci_low == 0.0);
  CHECK(*wide.ci_high == 1.0);
}

TEST_CASE("rank distribution examples") {
  const auto h = rank_distribution(corpus_of({human_doc("a", {1, 2, 7, 30, 500})}));
  const std::array<double, 6> shares{0.4, 0.2, 0.0, 0.2, 0.0, 0.2};
  for (std::size_t b = 0; b < 6; ++b) CHECK(h.bin_shares[b] == doctest::Approx(shares[b]));
  CHECK(h.median_rank == 7.0);
  CHECK(h.mean_rank == doctest::Approx(108.0));
  CHECK(h.rank_one_share == doctest::Approx(0.2));

  const auto ones = rank_distribution(corpus_of({human_doc("a", {1, 1, 1}), human_doc("b", {1})}));
  CHECK(ones.bin_shares[0] == 1.0);
  CHECK(ones.median_rank == 1.0);
  CHECK(ones.mean_rank == 1.0);
  CHECK(ones.n_docs == 2);
}

TEST_CASE("jaccard on ten-id sets") {
  std::vector<std::int64_t> a, b;
  for (int i = 0; i < 10; ++i) {
    a.push_back(i);
    b.push_back(i + 5);
  }
  CHECK(jaccard(a, b) == doctest::Approx(5.0 / 15.0));
  std::vector<std::int64_t> c;
  for (int i = 0; i < 10; ++i) c.push_back(100 + i);
  const Corpus ca = corpus_of({topn_doc("x", "tk", {a})});
  Corpus cc = corpus_of({topn_doc("x", "tk", {c})});
  cc.docs[0].events[0].token_id = a[0];
  cc.docs[0].events[0].rank = 11;
  const auto s = truncation_overlap(ca, cc, TruncationPolicy::top_k(10));
  CHECK(s.n_positions == 1);
  CHECK(s.mean_jaccard == 0.0);
}

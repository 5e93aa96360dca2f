#include <doctest.h>

#include <cmath>
#include <optional>

#include "blindspot/error.hpp"
#include "blindspot/metrics.hpp"
#include "blindspot/random.hpp"
#include "test_helpers.hpp"

using namespace blindspot;
using blindspot::testing::human_doc;

namespace {

DocRecord doc_with_logprobs(std::vector<double> lps) {
  DocRecord d = human_doc("d", std::vector<std::int64_t>(lps.size(), 2));
  for (std::size_t i = 0; i < lps.size(); ++i) {
    d.events[i].logprob = lps[i];
    d.events[i].cum_mass_before = 0.0;
  }
  return d;
}

double div_of(std::string_view text) {
  const auto w = split_words(text);
  return diversity(w);
}

}  // namespace

TEST_CASE("predictability is the mean log-probability") {
  CHECK(predictability(doc_with_logprobs({-1.0, -2.0, -3.0})) == doctest::Approx(-2.0));
  CHECK(predictability(doc_with_logprobs({std::log(0.5)})) == doctest::Approx(std::log(0.5)));
  DocRecord empty = doc_with_logprobs({});
  try {
    predictability(empty);
    FAIL("expected EmptyDoc");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kEmptyDoc);
  }
}

TEST_CASE("predictability shifts with the log-probabilities") {
  const std::vector<double> base{-0.3, -1.7, -4.2, -0.01};
  const double p0 = predictability(doc_with_logprobs(base));
  for (double c : {-0.5, -2.0, -7.25}) {
    std::vector<double> shifted = base;
    for (double& x : shifted) x += c;
    CHECK(predictability(doc_with_logprobs(shifted)) == doctest::Approx(p0 + c).epsilon(1e-12));
  }
}

TEST_CASE("diversity hand values") {
  CHECK(div_of("a b a b a b") == doctest::Approx(40.0 / 3.0).epsilon(1e-12));
  CHECK(std::abs(div_of("a b a b a b") - 13.333333333333334) < 1e-9);
  CHECK(div_of("a a a a a") == doctest::Approx(100.0 * (1.0 / 4) * (1.0 / 3) * (1.0 / 2)));
  CHECK(div_of("the cat sat on a mat") == doctest::Approx(100.0));
}

TEST_CASE("diversity of short texts") {
  const auto s = diversity_score(split_words("just three words"));
  CHECK(s.short_text);
  CHECK(s.value == doctest::Approx(100.0));
  const auto one = diversity_score(split_words("x"));
  CHECK(one.short_text);
  CHECK(one.value == 100.0);
  CHECK_FALSE(diversity_score(split_words("one two three four")).short_text);
}

TEST_CASE("whitespace segmentation keeps case and punctuation") {
  const auto w = split_words("  The cat,\tthe\ncat. ");
  REQUIRE(w.size() == 4);
  CHECK(w[0] == "The");
  CHECK(w[1] == "cat,");
  CHECK(w[3] == "cat.");
}

TEST_CASE("completing an existing 4-gram never raises diversity") {
  // When the text ends in (a,b,c) and (a,b,c,d) already occurs, appending d
  // adds no new 2-, 3- or 4-gram, so every ratio can only fall.
  blindspot::SplitMix64 rng(12);
  const char* alphabet[] = {"a", "b", "c", "d"};
  int appended = 0;
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::string> words;
    const auto n = 6 + blindspot::uniform_index(rng, 20);
    for (std::uint64_t i = 0; i < n; ++i) words.emplace_back(alphabet[blindspot::uniform_index(rng, 4)]);
    for (int step = 0; step < 10; ++step) {
      const std::size_t m = words.size();
      std::optional<std::string> next;
      for (std::size_t i = 0; i + 4 <= m; ++i) {
        if (words[i] == words[m - 3] && words[i + 1] == words[m - 2] && words[i + 2] == words[m - 1]) {
          next = words[i + 3];
          break;
        }
      }
      if (!next) break;
      const double before = diversity(words);
      words.push_back(*next);
      CHECK(diversity(words) <= before);
      ++appended;
    }
  }
  CHECK(appended > 100);
}

TEST_CASE("appending a whole 4-gram can create new junction n-grams") {
  // Literal repetition of the final 4-gram is not monotone: "z y" is new.
  const auto words = split_words("x y x y x y x y z");
  std::vector<std::string> longer = words;
  longer.insert(longer.end(), words.end() - 4, words.end());
  CHECK(diversity(longer) > diversity(words));
}

TEST_CASE("feature table and detokenization") {
  DocRecord d = human_doc("h1", {1, 2});
  d.events[0].surface = "hello";
  d.events[1].surface = " world";
  Corpus c;
  c.docs.push_back(d);
  auto rows = feature_table(c);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].detokenized);
  CHECK(rows[0].label == Origin::kHuman);
  CHECK(rows[0].strategy == "human");

  bool detok = false;
  CHECK(document_text(d, &detok) == "hello world");
  d.raw_text = "raw text here";
  CHECK(document_text(d, &detok) == "raw text here");
  CHECK_FALSE(detok);

  DocRecord blank = human_doc("b", {1});
  blank.events[0].surface = "";
  try {
    document_text(blank);
    FAIL("expected MissingSurface");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kMissingSurface);
  }
}

TEST_CASE("mixed conditioning is rejected") {
  Corpus a;
  a.docs.push_back(human_doc("a", {1}));
  a.docs[0].prompt_in_window = true;
  Corpus b;
  b.docs.push_back(human_doc("b", {1}));
  b.docs[0].prompt_in_window = false;
  Corpus silent;
  silent.docs.push_back(human_doc("c", {1}));
  const std::vector<const Corpus*> ok{&a, &silent};
  CHECK_NOTHROW(check_conditioning_consistent(ok));
  const std::vector<const Corpus*> mixed{&a, &b};
  try {
    check_conditioning_consistent(mixed);
    FAIL("expected MixedConditioning");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kMixedConditioning);
  }
}

TEST_CASE("feature csv round trip") {
  std::vector<FeatureRow> rows(2);
  rows[0].doc_id = "a,\"b\"";
  rows[0].label = Origin::kMachine;
  rows[0].strategy = "topk";
  rows[0].config = "k=10";
  rows[0].predictability = -2.302585092994046;
  rows[0].diversity = 87.5;
  rows[1].doc_id = "h";
  rows[1].strategy = "human";
  rows[1].predictability = -3.1;
  rows[1].diversity = 91.25;
  const std::string csv = features_to_csv(rows);
  CHECK(csv.rfind("doc_id,label,strategy,config,dataset,generator,predictability,diversity\n", 0) == 0);
  const auto back = features_from_csv(csv);
  REQUIRE(back.size() == 2);
  CHECK(back[0].doc_id == rows[0].doc_id);
  CHECK(back[0].label == Origin::kMachine);
  CHECK(back[0].predictability == rows[0].predictability);
  CHECK(back[1].diversity == 91.25);
  CHECK_THROWS_AS(features_from_csv("doc_id,label\nx,human\n"), Error);
}

TEST_CASE("predictability and diversity examples") {
  CHECK(predictability(doc_with_logprobs({-2.0})) == -2.0);
  CHECK(div_of("w x y z") == 100.0);
  const auto empty = diversity_score(std::vector<std::string>{});
  CHECK(empty.value == 100.0);
  CHECK(empty.short_text);

  Corpus c;
  c.docs.push_back(human_doc("first", {1, 2, 3}));
  c.docs.push_back(human_doc("second", {4, 5}));
  const auto rows = feature_table(c);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].doc_id == "first");
  CHECK(rows[1].doc_id == "second");
}

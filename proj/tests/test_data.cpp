#include <algorithm>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "dictdis/augment.hpp"
#include "dictdis/batch.hpp"
#include "dictdis/common.hpp"
#include "dictdis/constraints.hpp"
#include "dictdis/data_io.hpp"
#include "dictdis/dictionary.hpp"
#include "dictdis/vocab.hpp"
#include "doctest.h"

using namespace dictdis;

namespace {

std::vector<std::vector<std::string>> corpus_of(const std::vector<std::string>& lines) {
  std::vector<std::vector<std::string>> out;
  for (const auto& l : lines) out.push_back(tokenize(l));
  return out;
}

}  // namespace

TEST_CASE("tokenize splits on blanks and collapses runs") {
  CHECK(tokenize("a b  c") == std::vector<std::string>{"a", "b", "c"});
  CHECK(tokenize("  a\tb ") == std::vector<std::string>{"a", "b"});
  CHECK(tokenize("") == std::vector<std::string>{});
  CHECK(tokenize("   ") == std::vector<std::string>{});
}

TEST_CASE("vocabulary reserves the six specials at fixed ids") {
  Vocabulary v;
  CHECK(v.size() == Vocabulary::kNumSpecials);
  CHECK(v.token(Vocabulary::kPad) == "<pad>");
  CHECK(v.token(Vocabulary::kUnk) == "<unk>");
  CHECK(v.token(Vocabulary::kBos) == "<bos>");
  CHECK(v.token(Vocabulary::kEos) == "<eos>");
  CHECK(v.token(Vocabulary::kSep) == "<sep>");
  CHECK(v.token(Vocabulary::kIsep) == "<isep>");
}

TEST_CASE("build_vocabulary orders by frequency then lexicographically") {
  // counts: b=2, a=2, c=1; ties alphabetical, so a comes before b
  auto v = build_vocabulary(corpus_of({"b b a", "a c"}), 1);
  CHECK(v.size() == Vocabulary::kNumSpecials + 3);
  CHECK(v.id("a") == 6);
  CHECK(v.id("b") == 7);
  CHECK(v.id("c") == 8);
}

TEST_CASE("build_vocabulary applies the frequency threshold") {
  auto v = build_vocabulary(corpus_of({"b b a a c"}), 2);
  CHECK(v.contains("a"));
  CHECK(v.contains("b"));
  CHECK(!v.contains("c"));
  CHECK(v.id("c") == Vocabulary::kUnk);
}

TEST_CASE("build_vocabulary rejects an empty corpus") {
  CHECK_THROWS_AS(build_vocabulary({}, 1), Error);
}

TEST_CASE("encode maps unknowns and special surfaces to <unk>") {
  auto v = build_vocabulary(corpus_of({"a b"}), 1);
  auto ids = v.encode({"a", "zzz", "<sep>", "b"});
  CHECK(ids == std::vector<int>{v.id("a"), Vocabulary::kUnk, Vocabulary::kUnk, v.id("b")});
}

TEST_CASE("encode then decode restores in-vocabulary tokens") {
  auto v = build_vocabulary(corpus_of({"x y z"}), 1);
  std::vector<std::string> toks{"z", "x", "y"};
  CHECK(v.decode(v.encode(toks)) == toks);
}

TEST_CASE("vocabulary serialization round-trips with the same fingerprint") {
  auto v = build_vocabulary(corpus_of({"foo bar foo"}), 1);
  auto w = Vocabulary::deserialize(v.serialize());
  CHECK(w.tokens() == v.tokens());
  CHECK(w.fingerprint() == v.fingerprint());
  CHECK(v.serialize() == w.serialize());
}

TEST_CASE("fingerprint changes when the token list changes") {
  auto a = build_vocabulary(corpus_of({"aa"}), 1);
  auto b = build_vocabulary(corpus_of({"ab"}), 1);
  CHECK(a.fingerprint() != b.fingerprint());
}

TEST_CASE("load_dictionary parses entries, comments, and blank lines") {
  auto d = load_dictionary("# header\n\na b\tx|y z\nq\tr\n");
  REQUIRE(d.size() == 2);
  CHECK(d.entries[0].source == std::vector<std::string>{"a", "b"});
  REQUIRE(d.entries[0].degree() == 2);
  CHECK(d.entries[0].candidates[0] == std::vector<std::string>{"x"});
  CHECK(d.entries[0].candidates[1] == std::vector<std::string>{"y", "z"});
  CHECK(d.entries[0].line == 3);
  CHECK(d.entries[1].source == std::vector<std::string>{"q"});
  CHECK(d.entries[1].degree() == 1);
}

TEST_CASE("load_dictionary rejects malformed lines with the line number") {
  CHECK_THROWS_WITH_AS(load_dictionary("a b no tab\n"),
                       doctest::Contains("line 1"), Error);
  CHECK_THROWS_WITH_AS(load_dictionary("ok\tx\n\tx\n"),
                       doctest::Contains("line 2"), Error);
  CHECK_THROWS_WITH_AS(load_dictionary("a\tx||y\n"),
                       doctest::Contains("empty candidate"), Error);
  CHECK_THROWS_WITH_AS(load_dictionary("a\tx\na\ty\n"),
                       doctest::Contains("duplicate"), Error);
}

TEST_CASE("IdDictionary drops entries with out-of-vocabulary source tokens") {
  auto vocab = build_vocabulary(corpus_of({"a b c"}), 1);
  auto dict = load_dictionary("a\tx\nzzz\ty\nb c\tw\n");
  auto idd = IdDictionary::from(dict, vocab);
  CHECK(idd.entries.size() == 2);
  CHECK(idd.dropped_oov == 1);
  CHECK(idd.entries[0].source == std::vector<int>{vocab.id("a")});
  CHECK(idd.entries[1].source == std::vector<int>{vocab.id("b"), vocab.id("c")});
}

TEST_CASE("dictionary_stats reports the polysemy histogram and coverage") {
  // degrees 1, 1, 2 -> histogram {1: 66.67, 2: 33.33}; 2 of 4 sentences match
  auto dict = load_dictionary("a\tx\nb\ty\nc\tu|v\n");
  auto corpus = corpus_of({"a q", "q c", "q q", "w w"});
  auto stats = dictionary_stats(dict, corpus);
  CHECK(stats.total_entries == 3);
  CHECK(stats.sentences == 4);
  CHECK(stats.sentences_with_match == 2);
  CHECK(stats.coverage_percent == doctest::Approx(50.0));
  CHECK(stats.polysemy_histogram.at(1) == doctest::Approx(200.0 / 3.0));
  CHECK(stats.polysemy_histogram.at(2) == doctest::Approx(100.0 / 3.0));
  double total = 0.0;
  for (const auto& [deg, pct] : stats.polysemy_histogram) total += pct;
  CHECK(total == doctest::Approx(100.0).epsilon(1e-4));
}

TEST_CASE("phrase scan prefers the longest match at each position") {
  std::vector<std::vector<std::string>> phrases{{"a"}, {"a", "b"}};
  PhraseScanner<std::string> sc(phrases);
  auto hits = sc.scan({"a", "b"}, 10);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].phrase_index == 1);
  CHECK(hits[0].start == 0);
  CHECK(hits[0].end == 2);
}

TEST_CASE("phrase scan is greedy left-to-right and spans never overlap") {
  std::vector<std::vector<std::string>> phrases{{"a", "b"}, {"b", "c"}};
  PhraseScanner<std::string> sc(phrases);
  // "a b c": after consuming "a b", "b c" is no longer reachable
  auto hits = sc.scan({"a", "b", "c"}, 10);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].phrase_index == 0);
}

TEST_CASE("phrase scan properties on random inputs") {
  std::mt19937_64 rng(11);
  std::vector<std::vector<int>> phrases;
  for (int i = 0; i < 8; ++i) {
    std::vector<int> p;
    std::size_t len = 1 + rng_index(rng, 3);
    for (std::size_t k = 0; k < len; ++k) p.push_back(static_cast<int>(rng_index(rng, 5)));
    phrases.push_back(p);
  }
  PhraseScanner<int> sc(phrases);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> text;
    std::size_t len = rng_index(rng, 12);
    for (std::size_t k = 0; k < len; ++k) text.push_back(static_cast<int>(rng_index(rng, 5)));
    auto hits = sc.scan(text, 100);
    std::size_t prev_end = 0;
    for (const auto& h : hits) {
      CHECK(h.start >= prev_end);  // sorted, no overlap
      CHECK(h.end > h.start);
      const auto& p = phrases[h.phrase_index];
      REQUIRE(h.end - h.start == p.size());
      CHECK(std::equal(p.begin(), p.end(), text.begin() + static_cast<std::ptrdiff_t>(h.start)));
      prev_end = h.end;
    }
  }
}

TEST_CASE("match_constraints caps the number of matches") {
  Vocabulary vocab({"<pad>", "<unk>", "<bos>", "<eos>", "<sep>", "<isep>", "a", "x"});
  auto dict = IdDictionary::from(load_dictionary("a\tx\n"), vocab);
  std::vector<int> source(5, vocab.id("a"));
  auto all = match_constraints(source, dict, 8);
  CHECK(all.size() == 5);
  auto capped = match_constraints(source, dict, 2);
  REQUIRE(capped.size() == 2);
  CHECK(capped[0].start == 0);  // leftmost kept first
  CHECK(capped[1].start == 1);
}

// Layout oracle spelled out token by token:
//   source x0 x1 x2, constraint 1 = {c11, c12}, constraint 2 = {c21}
//   [x0 x1 x2 <sep> c11 <isep> c12 <sep> c21 <eos>]
TEST_CASE("augmented input layout for two constraints") {
  const int S = Vocabulary::kSep, I = Vocabulary::kIsep, E = Vocabulary::kEos;
  std::vector<int> src{10, 11, 12};
  std::vector<ConstraintMatch> matches{
      {0, 1, {{20}, {21}}},
      {2, 3, {{22}}},
  };
  auto in = build_augmented_input(src, matches, 128, 16, 192);

  CHECK(in.token_ids == std::vector<int>{10, 11, 12, S, 20, I, 21, S, 22, E});
  CHECK(in.position_ids ==
        std::vector<int>{0, 1, 2, 128, 129, 130, 131, 132, 133, 134});
  CHECK(in.segment_ids == std::vector<int>{0, 0, 0, 1, 1, 1, 1, 2, 2, 0});
  CHECK(in.region ==
        std::vector<Region>{Region::Source, Region::Source, Region::Source, Region::Sep,
                            Region::Constraint, Region::Isep, Region::Constraint,
                            Region::Sep, Region::Constraint, Region::Eos});
  using P = std::pair<int, int>;
  CHECK(in.cand_index ==
        std::vector<P>{P{-1, -1}, P{-1, -1}, P{-1, -1}, P{-1, -1}, P{0, 0}, P{-1, -1},
                       P{0, 1}, P{-1, -1}, P{1, 0}, P{-1, -1}});
  CHECK(in.source_len == 3);
  CHECK(in.degrees == std::vector<std::size_t>{2, 1});
  CHECK(in.dropped_constraints == 0);
}

TEST_CASE("augmented input with no matches is source plus <eos>") {
  auto in = build_augmented_input({7, 8}, {}, 128, 16, 192);
  CHECK(in.token_ids == std::vector<int>{7, 8, Vocabulary::kEos});
  CHECK(in.position_ids == std::vector<int>{0, 1, 128});
  CHECK(in.segment_ids == std::vector<int>{0, 0, 0});
  CHECK(!in.has_constraints());
}

TEST_CASE("segment ids clamp at max_segments - 1") {
  std::vector<ConstraintMatch> matches;
  for (int i = 0; i < 4; ++i)
    matches.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(i + 1), {{30 + i}}});
  auto in = build_augmented_input({1, 1, 1, 1}, matches, 128, 3, 192);
  // constraints 1..4 get segments 1, 2, 2, 2
  std::vector<int> seen;
  for (std::size_t p = 0; p < in.size(); ++p)
    if (in.region[p] == Region::Constraint) seen.push_back(in.segment_ids[p]);
  CHECK(seen == std::vector<int>{1, 2, 2, 2});
  for (int s : in.segment_ids) CHECK(s < 3);
}

TEST_CASE("augmented length follows the block formula") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t slen = 1 + rng_index(rng, 6);
    std::vector<int> src(slen, 9);
    std::vector<ConstraintMatch> matches;
    std::size_t expected = slen + 1;  // source + <eos>
    std::size_t pos = 0;
    while (pos < slen && matches.size() < 3) {
      ConstraintMatch m;
      m.start = pos;
      m.end = pos + 1;
      std::size_t k = 1 + rng_index(rng, 3);
      for (std::size_t j = 0; j < k; ++j)
        m.candidates.push_back(std::vector<int>(1 + rng_index(rng, 2), 15));
      std::size_t block = 1 + (k - 1);  // <sep> plus internal <isep>s
      for (const auto& c : m.candidates) block += c.size();
      expected += block;
      matches.push_back(std::move(m));
      pos += 2;
    }
    auto in = build_augmented_input(src, matches, 128, 16, 400);
    CHECK(in.size() == expected);

    // appended tail is numbered consecutively from p_offset
    for (std::size_t p = slen; p < in.size(); ++p)
      CHECK(in.position_ids[p] == 128 + static_cast<int>(p - slen));
    // segments never decrease along the tail and source stays segment 0
    for (std::size_t p = 0; p < slen; ++p) CHECK(in.segment_ids[p] == 0);
    for (std::size_t p = slen + 1; p + 1 < in.size(); ++p)
      CHECK(in.segment_ids[p] >= in.segment_ids[p - 1] * (in.segment_ids[p] != 0));
  }
}

TEST_CASE("truncation drops whole trailing constraints") {
  std::vector<int> src{10, 11, 12};
  std::vector<ConstraintMatch> matches{
      {0, 1, {{21, 22}, {23}}},  // block: sep + 3 tokens + isep = 5
      {1, 2, {{24}}},            // block: sep + 1 = 2
      {2, 3, {{25}}},
  };
  // full length 3 + 5 + 2 + 2 + 1 = 13; cap at 11 drops only the last block
  auto in = build_augmented_input(src, matches, 128, 16, 11);
  CHECK(in.size() == 11);
  CHECK(in.dropped_constraints == 1);
  CHECK(in.degrees == std::vector<std::size_t>{2, 1});
  auto parsed = parse_augmented(in.token_ids);
  REQUIRE(parsed.constraints.size() == 2);
  CHECK(parsed.constraints[0] ==
        std::vector<std::vector<int>>{{21, 22}, {23}});
  CHECK(parsed.constraints[1] == std::vector<std::vector<int>>{{24}});

  // cap below the first block keeps the bare source
  auto bare = build_augmented_input(src, matches, 128, 16, 5);
  CHECK(bare.token_ids == std::vector<int>{10, 11, 12, Vocabulary::kEos});
  CHECK(bare.dropped_constraints == 3);
}

TEST_CASE("parse_augmented inverts build_augmented_input") {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t slen = 1 + rng_index(rng, 8);
    std::vector<int> src;
    for (std::size_t i = 0; i < slen; ++i)
      src.push_back(10 + static_cast<int>(rng_index(rng, 20)));
    std::vector<ConstraintMatch> matches;
    std::size_t pos = 0;
    while (pos < slen) {
      if (rng_uniform(rng) < 0.5) {
        ConstraintMatch m;
        m.start = pos;
        m.end = pos + 1;
        std::size_t k = 1 + rng_index(rng, 3);
        for (std::size_t j = 0; j < k; ++j) {
          std::vector<int> cand;
          std::size_t cl = 1 + rng_index(rng, 3);
          for (std::size_t q = 0; q < cl; ++q)
            cand.push_back(40 + static_cast<int>(rng_index(rng, 20)));
          m.candidates.push_back(std::move(cand));
        }
        matches.push_back(std::move(m));
      }
      ++pos;
    }
    auto in = build_augmented_input(src, matches, 128, 16, 500);
    REQUIRE(in.dropped_constraints == 0);
    auto parsed = parse_augmented(in.token_ids);
    CHECK(parsed.source == src);
    REQUIRE(parsed.constraints.size() == matches.size());
    for (std::size_t i = 0; i < matches.size(); ++i)
      CHECK(parsed.constraints[i] == matches[i].candidates);
  }
}

TEST_CASE("pad_batch pads to the longest member and masks real positions") {
  auto a = build_augmented_input({10, 11}, {}, 128, 16, 192);
  auto b = build_augmented_input({12, 13, 14, 15}, {{0, 1, {{20}}}}, 128, 16, 192);
  std::size_t want = std::max(a.size(), b.size());
  auto batch = pad_batch({a, b}, {{10}, {12, 13, 14}}, Vocabulary::kPad);
  REQUIRE(batch.size() == 2);
  CHECK(batch.inputs[0].size() == want);
  CHECK(batch.inputs[1].size() == want);
  CHECK(batch.target_lens == std::vector<std::size_t>{1, 3});
  CHECK(batch.total_steps() == 1 + 1 + 3 + 1);
  for (std::size_t p = a.size(); p < want; ++p) {
    CHECK(batch.inputs[0].token_ids[p] == Vocabulary::kPad);
    CHECK(batch.inputs[0].region[p] == Region::Pad);
    CHECK(batch.enc_mask[0][p] == 0);
  }
  for (std::size_t p = 0; p < a.size(); ++p) CHECK(batch.enc_mask[0][p] == 1);
  CHECK(batch.targets[0].size() == batch.targets[1].size());
  CHECK(batch.targets[0][2] == Vocabulary::kPad);
}

TEST_CASE("prepared-data JSONL round-trips and serializes deterministically") {
  std::vector<Example> examples;
  Example e1;
  e1.source = {6, 7, 8};
  e1.target = {9, 10};
  ConstraintMatch m;
  m.start = 1;
  m.end = 2;
  m.candidates = {{9}, {11, 12}};
  e1.constraints.push_back(m);
  examples.push_back(e1);
  Example e2;
  e2.source = {13};
  e2.target = {14};
  examples.push_back(e2);

  std::string text = examples_to_jsonl(examples);
  auto back = examples_from_jsonl(text);
  REQUIRE(back.size() == 2);
  CHECK(back[0].source == e1.source);
  CHECK(back[0].target == e1.target);
  REQUIRE(back[0].constraints.size() == 1);
  CHECK(back[0].constraints[0].start == 1);
  CHECK(back[0].constraints[0].end == 2);
  CHECK(back[0].constraints[0].candidates == m.candidates);
  CHECK(back[1].constraints.empty());
  CHECK(examples_to_jsonl(back) == text);
}

TEST_CASE("derived_seed separates streams") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 50; ++a)
    for (std::uint64_t b = 0; b < 4; ++b) seen.insert(derived_seed(123, a, b));
  CHECK(seen.size() == 200);
  CHECK(derived_seed(1, 2, 3) == derived_seed(1, 2, 3));
  CHECK(derived_seed(1, 2, 3) != derived_seed(2, 2, 3));
}

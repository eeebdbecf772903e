#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "quill/graph.hpp"
#include "quill/metrics.hpp"
#include "test_util.hpp"

using namespace quill;
using testutil::poem_from;

TEST_SUITE_BEGIN("metrics");

namespace {

std::vector<std::string> toks(const std::string& s) {
  std::vector<std::string> out;
  for (char c : s) out.emplace_back(1, c);
  return out;
}

// Brute-force BLEU oracle: recount every n-gram by scanning, no maps shared
// with the implementation.
double bleu_oracle(const std::vector<std::string>& cand, const std::vector<std::string>& ref,
                   int max_n) {
  double logsum = 0.0;
  int orders = 0;
  for (int n = 1; n <= max_n; ++n) {
    const int c_total = static_cast<int>(cand.size()) - n + 1;
    if (c_total <= 0) continue;  // no n-grams at this order
    int clipped = 0;
    std::map<std::vector<std::string>, int> used;
    for (int i = 0; i < c_total; ++i) {
      std::vector<std::string> gram(cand.begin() + i, cand.begin() + i + n);
      int ref_count = 0;
      for (int j = 0; j + n <= static_cast<int>(ref.size()); ++j) {
        if (std::equal(gram.begin(), gram.end(), ref.begin() + j)) ++ref_count;
      }
      if (used[gram] < ref_count) {
        ++clipped;
        ++used[gram];
      }
    }
    if (clipped == 0) return 0.0;
    ++orders;
    logsum += std::log(static_cast<double>(clipped) / c_total);
  }
  if (orders == 0) return 0.0;
  double bp = 1.0;
  if (cand.size() < ref.size()) {
    bp = std::exp(1.0 - static_cast<double>(ref.size()) / static_cast<double>(cand.size()));
  }
  return bp * std::exp(logsum / orders);
}

TonalPattern all_ping_pattern(int total, std::vector<int> rhyming = {2, 4}) {
  TonalPattern p;
  p.tones.assign(static_cast<std::size_t>(total), ToneRequirement::Ping);
  p.rhyming_lines = std::move(rhyming);
  return p;
}

}  // namespace

TEST_CASE("bleu: perfect match is 1.0") {
  auto c = toks("abcdefg");
  CHECK(bleu(c, c, 1) == doctest::Approx(1.0));
  CHECK(bleu(c, c, 2) == doctest::Approx(1.0));
}

TEST_CASE("bleu hand examples: one substitution in seven") {
  auto cand = toks("abcdefg");
  auto ref = toks("abxdefg");
  CHECK(bleu(cand, ref, 1) == doctest::Approx(6.0 / 7.0).epsilon(1e-4));
  CHECK(bleu(cand, ref, 2) == doctest::Approx(std::sqrt((6.0 / 7.0) * (4.0 / 6.0))).epsilon(1e-4));
  // pinned to 4 decimals
  CHECK(std::abs(bleu(cand, ref, 1) - 0.8571) < 5e-5);
  CHECK(std::abs(bleu(cand, ref, 2) - 0.7559) < 5e-5);
}

TEST_CASE("bleu brevity penalty applies only to short candidates") {
  auto cand = toks("abc");
  auto ref = toks("abcdef");
  const double expected = std::exp(1.0 - 6.0 / 3.0) * 1.0;  // all unigrams match
  CHECK(bleu(cand, ref, 1) == doctest::Approx(expected));
  CHECK(bleu(ref, toks("abc"), 1) == doctest::Approx(0.5));  // long candidate: no BP
}

TEST_CASE("bleu matches the brute-force oracle on 1000 random cases") {
  std::mt19937_64 rng(20240811);
  for (int i = 0; i < 1000; ++i) {
    const int alphabet = 2 + static_cast<int>(rng() % 5);
    auto draw = [&](int len) {
      std::vector<std::string> out;
      for (int j = 0; j < len; ++j) {
        out.emplace_back(1, static_cast<char>('a' + rng() % static_cast<unsigned>(alphabet)));
      }
      return out;
    };
    auto cand = draw(1 + static_cast<int>(rng() % 10));
    auto ref = draw(1 + static_cast<int>(rng() % 10));
    const int max_n = 1 + static_cast<int>(rng() % 2);
    CHECK(std::abs(bleu(cand, ref, max_n) - bleu_oracle(cand, ref, max_n)) < 1e-9);
  }
}

TEST_CASE("bleu stays in [0,1] and bleu(x,x)=1") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) {
    auto draw = [&](int len) {
      std::vector<std::string> out;
      for (int j = 0; j < len; ++j) out.emplace_back(1, static_cast<char>('a' + rng() % 3));
      return out;
    };
    auto x = draw(1 + static_cast<int>(rng() % 8));
    auto y = draw(1 + static_cast<int>(rng() % 8));
    const double b = bleu(x, y, 2);
    CHECK(b >= 0.0);
    CHECK(b <= 1.0);
    CHECK(bleu(x, x, 2) == doctest::Approx(1.0));
  }
}

TEST_CASE("line_similarity basics") {
  Poem p = poem_from({"xx", "xy"});  // only need tokens x, y
  auto vocab = Vocabulary::build({poem_from({"xyxyxyx", "xyxyxyx", "xyxyxyx", "xyxyxyx"})});
  const int V = vocab.size();

  SUBCASE("identical sequences give 1") {
    Mat<float> emb = Mat<float>::Random(V, 4);
    CHECK(line_similarity(toks("xyx"), toks("xyx"), emb, vocab) == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("antipodal sums give -1") {
    Mat<float> emb = Mat<float>::Zero(V, 2);
    emb(vocab.id_of("x"), 0) = 1.0f;
    emb(vocab.id_of("y"), 0) = -1.0f;
    CHECK(line_similarity(toks("x"), toks("y"), emb, vocab) == doctest::Approx(-1.0));
  }
  SUBCASE("one-hot worked example: xx vs xy") {
    Mat<float> emb = Mat<float>::Zero(V, 2);
    emb(vocab.id_of("x"), 0) = 1.0f;
    emb(vocab.id_of("y"), 1) = 1.0f;
    // sum(xx) = (2,0), sum(xy) = (1,1): cos = 2 / sqrt(4*2)
    CHECK(line_similarity(toks("xx"), toks("xy"), emb, vocab) ==
          doctest::Approx(2.0 / std::sqrt(8.0)).epsilon(1e-6));
  }
  SUBCASE("zero-sum vector gives 0") {
    Mat<float> emb = Mat<float>::Zero(V, 3);
    emb(vocab.id_of("y"), 1) = 1.0f;
    CHECK(line_similarity(toks("x"), toks("y"), emb, vocab) == 0.0);
  }
  SUBCASE("symmetry and scale invariance") {
    Mat<float> emb = Mat<float>::Random(V, 5);
    auto a = toks("xyx");
    auto b = toks("yyx");
    CHECK(line_similarity(a, b, emb, vocab) ==
          doctest::Approx(line_similarity(b, a, emb, vocab)));
    Mat<float> scaled = emb * 3.25f;
    CHECK(line_similarity(a, b, scaled, vocab) ==
          doctest::Approx(line_similarity(a, b, emb, vocab)).epsilon(1e-5));
    // order invariance: sums ignore permutation applied to both
    auto a_perm = toks("xxy");
    auto b_perm = toks("yxy");
    CHECK(line_similarity(a_perm, b_perm, emb, vocab) ==
          doctest::Approx(line_similarity(a, b, emb, vocab)).epsilon(1e-6));
  }
}

TEST_CASE("poem_similarities wiring") {
  auto vocab = Vocabulary::build({poem_from({"abababa", "abababa", "abababa", "abababa"})});
  const int V = vocab.size();

  SUBCASE("all lines identical -> (1,1,1)") {
    Poem p = poem_from({"aababab", "aababab", "aababab", "aababab"});
    Mat<float> emb = Mat<float>::Random(V, 4);
    auto sims = poem_similarities(p, emb, vocab);
    for (double s : sims) CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("disjoint one-hot supports -> zeros") {
    Poem p = poem_from({"aaaaaaa", "bbbbbbb", "aaaaaaa", "bbbbbbb"});
    Mat<float> emb = Mat<float>::Zero(V, 2);
    emb(vocab.id_of("a"), 0) = 1.0f;
    emb(vocab.id_of("b"), 1) = 1.0f;
    auto sims = poem_similarities(p, emb, vocab);
    CHECK(sims[0] == doctest::Approx(0.0));
    CHECK(sims[1] == doctest::Approx(0.0));
    // halves are identical here: sim2L = 1
    CHECK(sims[2] == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("hand-computed 3-char toy case") {
    // one-hot embeddings: line sums count characters
    Poem p = poem_from({"aab", "abc", "bbc", "ccc"});
    auto v3 = Vocabulary::build({poem_from({"abcabca", "abcabca", "abcabca", "abcabca"})});
    Mat<float> emb = Mat<float>::Zero(v3.size(), 3);
    emb(v3.id_of("a"), 0) = 1.0f;
    emb(v3.id_of("b"), 1) = 1.0f;
    emb(v3.id_of("c"), 2) = 1.0f;
    auto sims = poem_similarities(p, emb, v3);
    // sum(l1)=(2,1,0), sum(l2)=(1,1,1): dot=3, norms sqrt(5), sqrt(3)
    CHECK(sims[0] == doctest::Approx(3.0 / std::sqrt(15.0)).epsilon(1e-6));
    // sum(l3)=(0,2,1), sum(l4)=(0,0,3): dot=3, norms sqrt(5), 3
    CHECK(sims[1] == doctest::Approx(3.0 / (3.0 * std::sqrt(5.0))).epsilon(1e-6));
    // halves: (3,2,1) vs (0,2,4): dot=8, norms sqrt(14), sqrt(20)
    CHECK(sims[2] == doctest::Approx(8.0 / std::sqrt(14.0 * 20.0)).epsilon(1e-6));
  }
}

TEST_CASE("tone_accuracy counts required, lexicon-known positions") {
  PhonologyLexicon lex;
  lex.set("p", ToneClass::Ping, RhymeClass::R1);
  lex.set("z", ToneClass::Ze, RhymeClass::R2);

  SUBCASE("all match -> 1.0") {
    Poem poem = poem_from({"ppppppp", "ppppppp", "ppppppp", "ppppppp"});
    CHECK(tone_accuracy({poem}, lex, all_ping_pattern(28)) == doctest::Approx(1.0));
  }
  SUBCASE("all chars Ping, all-Ze pattern -> 0.0") {
    Poem poem = poem_from({"ppppppp", "ppppppp", "ppppppp", "ppppppp"});
    TonalPattern pat = all_ping_pattern(28);
    pat.tones.assign(28, ToneRequirement::Ze);
    CHECK(tone_accuracy({poem}, lex, pat) == doctest::Approx(0.0));
  }
  SUBCASE("mixed toy case: 3 of 4 required positions correct") {
    // pattern: Ping at the four line-initial positions, Any elsewhere;
    // unknowns excluded from the denominator
    Poem poem = poem_from({"puuuuuu", "puuuuuu", "puuuuuu", "zuuuuuu"});
    TonalPattern pat;
    pat.tones.assign(28, ToneRequirement::Any);
    for (int line = 0; line < 4; ++line) pat.tones[static_cast<std::size_t>(line * 7)] = ToneRequirement::Ping;
    pat.rhyming_lines = {2, 4};
    CHECK(tone_accuracy({poem}, lex, pat) == doctest::Approx(0.75));
  }
  SUBCASE("empty denominator reports NaN") {
    Poem poem = poem_from({"uuuuuuu", "uuuuuuu", "uuuuuuu", "uuuuuuu"});
    CHECK(std::isnan(tone_accuracy({poem}, lex, all_ping_pattern(28))));
  }
  SUBCASE("brute-force recount agreement on random fixtures") {
    std::mt19937_64 rng(5);
    auto poems = testutil::synthetic_poems(8, 7, 31, 6);
    auto vocab = Vocabulary::build(poems);
    auto rich = testutil::alternating_lexicon(vocab);
    TonalPattern pat;
    for (int i = 0; i < 28; ++i) {
      pat.tones.push_back(static_cast<ToneRequirement>(rng() % 3));
    }
    pat.rhyming_lines = {2, 4};
    std::int64_t num = 0, den = 0;
    for (const auto& poem : poems) {
      auto flat = poem.flat();
      for (int i = 0; i < 28; ++i) {
        const auto req = pat.tones[static_cast<std::size_t>(i)];
        if (req == ToneRequirement::Any) continue;
        const auto tone = rich.tone_of(flat[static_cast<std::size_t>(i)]);
        if (tone == ToneClass::None) continue;
        ++den;
        if (static_cast<int>(tone) == static_cast<int>(req)) ++num;
      }
    }
    REQUIRE(den > 0);
    CHECK(tone_accuracy(poems, rich, pat) ==
          doctest::Approx(static_cast<double>(num) / static_cast<double>(den)));
  }
}

TEST_CASE("rhyme_accuracy scores modal-class fractions") {
  PhonologyLexicon lex;
  lex.set("r", ToneClass::Ping, RhymeClass::R3);
  lex.set("s", ToneClass::Ping, RhymeClass::R5);

  SUBCASE("all rhyming finals share a class -> 1.0") {
    Poem poem = poem_from({"uuuuuuu", "uuuuuur", "uuuuuuu", "uuuuuur"});
    CHECK(rhyme_accuracy({poem}, lex, all_ping_pattern(28, {2, 4})) == doctest::Approx(1.0));
  }
  SUBCASE("two different classes -> 0.5") {
    Poem poem = poem_from({"uuuuuuu", "uuuuuur", "uuuuuuu", "uuuuuus"});
    CHECK(rhyme_accuracy({poem}, lex, all_ping_pattern(28, {2, 4})) == doctest::Approx(0.5));
  }
  SUBCASE("unknown final counts as non-matching") {
    Poem poem = poem_from({"uuuuuuu", "uuuuuur", "uuuuuuu", "uuuuuuu"});
    CHECK(rhyme_accuracy({poem}, lex, all_ping_pattern(28, {2, 4})) == doctest::Approx(0.5));
    Poem all_unknown = poem_from({"uuuuuuu", "uuuuuuu", "uuuuuuu", "uuuuuuu"});
    CHECK(rhyme_accuracy({all_unknown}, lex, all_ping_pattern(28, {2, 4})) ==
          doctest::Approx(0.0));
  }
  SUBCASE("three rhyming lines, mean over poems") {
    Poem a = poem_from({"uuuuuur", "uuuuuur", "uuuuuuu", "uuuuuur"});  // 3/3
    Poem b = poem_from({"uuuuuur", "uuuuuus", "uuuuuuu", "uuuuuur"});  // 2/3
    CHECK(rhyme_accuracy({a, b}, lex, all_ping_pattern(28, {1, 2, 4})) ==
          doctest::Approx((1.0 + 2.0 / 3.0) / 2.0));
  }
}

TEST_CASE("tonal pattern json round trip") {
  TonalPattern p;
  p.tones = {ToneRequirement::Any, ToneRequirement::Ping, ToneRequirement::Ze};
  p.rhyming_lines = {2, 4};
  auto j = p.to_json();
  auto q = TonalPattern::from_json(j);
  CHECK(q.tones == p.tones);
  CHECK(q.rhyming_lines == p.rhyming_lines);
  CHECK_THROWS_AS(TonalPattern::from_json(nlohmann::json{{"tones", {"Up"}},
                                                        {"rhyming_lines", {2}}}),
                  FormatError);
}

TEST_CASE("eval report json and table carry the same numbers") {
  EvalReport report;
  EvalRow row;
  row.name = "quill";
  for (auto& st : row.stages) st = {0.25, 0.125};
  row.average = {0.25, 0.125};
  row.sim12 = 0.5;
  row.sim34 = 0.25;
  row.sim2l = 0.75;
  row.tone_acc = 0.9;
  row.rhyme_acc = 0.8;
  report.rows.push_back(row);
  report.n_samples = 3;
  auto j = report.to_json();
  CHECK(j["rows"][0]["sim12"].get<double>() == 0.5);
  CHECK(j["n_samples"].get<std::size_t>() == 3);
  auto table = report.to_table();
  CHECK(table.find("0.500") != std::string::npos);
  CHECK(table.find("quill") != std::string::npos);
}

TEST_SUITE_END();

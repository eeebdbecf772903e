#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "quill/corpus.hpp"
#include "quill/errors.hpp"
#include "quill/phonology.hpp"

namespace quill {

// Sentence BLEU with modified n-gram precision, uniform weights over
// 1..max_n (geometric mean) and the brevity penalty exp(1 - |ref|/|cand|)
// for short candidates. max_n is 1 or 2 here (BL-1 / BL-2).
double bleu(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
            int max_n);

enum class ToneRequirement : std::uint8_t { Ping = 0, Ze = 1, Any = 2 };

struct TonalPattern {
  std::vector<ToneRequirement> tones;  // length 4L
  std::vector<int> rhyming_lines;      // 1-based line indices

  static TonalPattern load(const std::string& path);
  static TonalPattern from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// Fraction of required (Ping/Ze) positions whose lexicon tone matches; Any
// positions and lexicon-unknown characters are excluded from the count.
// NaN (with a warning on stderr) when no position qualifies.
double tone_accuracy(const std::vector<Poem>& poems, const PhonologyLexicon& lex,
                     const TonalPattern& pattern);

// Mean over poems of the fraction of rhyming-line-final characters that
// share the modal rhyme class among those lines; None never matches.
double rhyme_accuracy(const std::vector<Poem>& poems, const PhonologyLexicon& lex,
                      const TonalPattern& pattern);

// Cosine of the summed character embeddings of the two sequences; 0 when
// either sum is the zero vector. Unknown tokens fall back to the UNK row.
template <class S>
double line_similarity(const std::vector<std::string>& a, const std::vector<std::string>& b,
                       const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& emb,
                       const Vocabulary& vocab) {
  if (a.empty() || b.empty()) {
    throw ValidationError("line_similarity: empty sequence");
  }
  using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1>;
  auto sum_of = [&](const std::vector<std::string>& seq) {
    Vec v = Vec::Zero(emb.cols());
    for (const auto& tok : seq) {
      v += emb.row(vocab.id_of(tok)).transpose().template cast<double>();
    }
    return v;
  };
  const Vec va = sum_of(a);
  const Vec vb = sum_of(b);
  const double na = va.norm();
  const double nb = vb.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return va.dot(vb) / (na * nb);
}

// (sim12, sim34, sim2L): line1 vs line2, line3 vs line4, first half vs
// second half.
template <class S>
std::array<double, 3> poem_similarities(
    const Poem& poem, const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& emb,
    const Vocabulary& vocab) {
  auto cat = [](const std::vector<std::string>& x, const std::vector<std::string>& y) {
    std::vector<std::string> out = x;
    out.insert(out.end(), y.begin(), y.end());
    return out;
  };
  return {line_similarity(poem.lines[0], poem.lines[1], emb, vocab),
          line_similarity(poem.lines[2], poem.lines[3], emb, vocab),
          line_similarity(cat(poem.lines[0], poem.lines[1]),
                          cat(poem.lines[2], poem.lines[3]), emb, vocab)};
}

struct StageBleu {
  double bl1 = 0.0;
  double bl2 = 0.0;
};

// Mirrors the columns of the reference evaluation tables: per-stage BLEU
// plus similarity and phonology conformity, for one model row.
struct EvalRow {
  std::string name;
  std::array<StageBleu, 4> stages;  // key->1, 1->2, 1&2->3, 3->4
  StageBleu average;
  double sim12 = 0.0, sim34 = 0.0, sim2l = 0.0;
  double tone_acc = 0.0, rhyme_acc = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::size_t n_samples = 0;

  nlohmann::json to_json() const;
  std::string to_table() const;
};

}  // namespace quill

#pragma once

#include <random>
#include <vector>

#include "quill/corpus.hpp"
#include "quill/graph.hpp"
#include "quill/phonology.hpp"

namespace quill {

inline constexpr int kToneNoneRow = static_cast<int>(ToneClass::None);
inline constexpr int kRhymeNoneRow = static_cast<int>(RhymeClass::None);
inline constexpr int kSegmentCount = 4;  // line index 0-3; A/B reuse 0/1

// Per-token tone/rhyme table rows, precomputed once per (vocabulary,
// lexicon) pair so embedding lookups stay integer-only. Specials and
// characters outside the lexicon land on the None rows.
struct PhonologyIds {
  std::vector<int> tone_row;
  std::vector<int> rhyme_row;

  static PhonologyIds build(const Vocabulary& vocab, const PhonologyLexicon& lex) {
    PhonologyIds out;
    out.tone_row.resize(static_cast<std::size_t>(vocab.size()), kToneNoneRow);
    out.rhyme_row.resize(static_cast<std::size_t>(vocab.size()), kRhymeNoneRow);
    for (TokenId id = 0; id < vocab.size(); ++id) {
      if (Vocabulary::is_special(id)) continue;
      const std::string& tok = vocab.token_of(id);
      out.tone_row[static_cast<std::size_t>(id)] = static_cast<int>(lex.tone_of(tok));
      out.rhyme_row[static_cast<std::size_t>(id)] = static_cast<int>(lex.rhyme_of(tok));
    }
    return out;
  }
};

template <class S>
struct EmbeddingTables {
  Parameter<S> token;     // V x d
  Parameter<S> segment;   // 4 x d
  Parameter<S> position;  // max_len x d
  Parameter<S> tone;      // 3 x d
  Parameter<S> rhyme;     // 14 x d
};

// One embeddable sequence: token ids plus the context the composite
// embedding needs. line_final marks the last character of each complete
// poem line; the rhyme row is the None row everywhere else.
struct EmbedInput {
  std::vector<TokenId> tokens;
  std::vector<int> segments;
  std::vector<char> line_final;

  std::size_t size() const { return tokens.size(); }
};

// Standard inputs. Sources that are complete poem lines get line-final
// flags at each line end; two2one sources carry segment 1 after the SEP.
// Decoder prefixes and keywords contain no completed line, so their rhyme
// rows are all None.
EmbedInput make_line_input(const std::vector<TokenId>& tokens, int line_len);
EmbedInput make_two_line_input(const std::vector<TokenId>& tokens, int line_len);
EmbedInput make_keyword_input(const std::vector<TokenId>& tokens);
EmbedInput make_prefix_input(const std::vector<TokenId>& tokens);
EmbedInput make_quatrain_input(const std::vector<TokenId>& tokens, int line_len);

inline EmbedInput make_line_input(const std::vector<TokenId>& tokens, int line_len) {
  EmbedInput in{tokens, std::vector<int>(tokens.size(), 0),
                std::vector<char>(tokens.size(), 0)};
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if ((i + 1) % static_cast<std::size_t>(line_len) == 0) in.line_final[i] = 1;
  }
  return in;
}

inline EmbedInput make_two_line_input(const std::vector<TokenId>& tokens, int line_len) {
  EmbedInput in{tokens, std::vector<int>(tokens.size(), 0),
                std::vector<char>(tokens.size(), 0)};
  const std::size_t L = static_cast<std::size_t>(line_len);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > L) in.segments[i] = 1;  // positions after the SEP at index L
    if (i + 1 == L || i + 1 == 2 * L + 1) in.line_final[i] = 1;
  }
  return in;
}

inline EmbedInput make_keyword_input(const std::vector<TokenId>& tokens) {
  return EmbedInput{tokens, std::vector<int>(tokens.size(), 0),
                    std::vector<char>(tokens.size(), 0)};
}

inline EmbedInput make_prefix_input(const std::vector<TokenId>& tokens) {
  return EmbedInput{tokens, std::vector<int>(tokens.size(), 0),
                    std::vector<char>(tokens.size(), 0)};
}

inline EmbedInput make_quatrain_input(const std::vector<TokenId>& tokens, int line_len) {
  EmbedInput in{tokens, std::vector<int>(tokens.size(), 0),
                std::vector<char>(tokens.size(), 0)};
  const std::size_t L = static_cast<std::size_t>(line_len);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    in.segments[i] = static_cast<int>(i / L);
    if ((i + 1) % L == 0) in.line_final[i] = 1;
  }
  return in;
}

// Row i = token[t_i] + segment[g_i] + position[i] + tone[tone(t_i)] +
// rhyme[line_final_i ? rhyme(t_i) : None].
template <class S>
typename Graph<S>::Var embed(Graph<S>& g, const EmbedInput& in, const PhonologyIds& ph,
                             EmbeddingTables<S>& tables) {
  const std::size_t n = in.size();
  if (n == 0) throw std::invalid_argument("embed: empty sequence");
  if (in.segments.size() != n || in.line_final.size() != n) {
    throw std::invalid_argument("embed: segments/line_final length mismatch");
  }
  if (static_cast<Eigen::Index>(n) > tables.position.value.rows()) {
    throw std::invalid_argument("embed: sequence exceeds max_len");
  }
  std::vector<int> tok_rows(n), seg_rows(n), pos_rows(n), tone_rows(n), rhyme_rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    const TokenId t = in.tokens[i];
    if (t < 0 || static_cast<std::size_t>(t) >= ph.tone_row.size()) {
      throw std::invalid_argument("embed: token id out of range");
    }
    tok_rows[i] = t;
    seg_rows[i] = in.segments[i];
    pos_rows[i] = static_cast<int>(i);
    tone_rows[i] = ph.tone_row[static_cast<std::size_t>(t)];
    rhyme_rows[i] = in.line_final[i] ? ph.rhyme_row[static_cast<std::size_t>(t)]
                                     : kRhymeNoneRow;
  }
  auto tok = g.gather_rows(g.leaf(tables.token), tok_rows);
  auto seg = g.gather_rows(g.leaf(tables.segment), seg_rows);
  auto pos = g.gather_rows(g.leaf(tables.position), pos_rows);
  auto ton = g.gather_rows(g.leaf(tables.tone), tone_rows);
  auto rhy = g.gather_rows(g.leaf(tables.rhyme), rhyme_rows);
  return g.add(g.add(g.add(g.add(tok, seg), pos), ton), rhy);
}

}  // namespace quill

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "quill/corpus.hpp"
#include "quill/phonology.hpp"

namespace quill::testutil {

// Scratch file that removes itself; keeps filesystem tests tidy.
struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) {
    path = (std::filesystem::temp_directory_path() / name).string();
  }
  ~TempFile() {
    std::error_code ec;
    std::filesystem::remove(path, ec);
  }
  void write(const std::string& content) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
  }
};

// Latin-letter corpus: poems over single-byte tokens keep expectations easy
// to read while exercising the same code paths as CJK input.
inline Poem poem_from(const std::vector<std::string>& lines) {
  Poem p;
  for (const auto& line : lines) {
    std::vector<std::string> chars;
    for (char c : line) chars.emplace_back(1, c);
    p.lines.push_back(std::move(chars));
  }
  return p;
}

inline std::vector<Poem> synthetic_poems(int count, int line_len, std::uint64_t seed,
                                         int alphabet = 20) {
  std::mt19937_64 rng(seed);
  std::vector<Poem> poems;
  for (int i = 0; i < count; ++i) {
    Poem p;
    for (int l = 0; l < 4; ++l) {
      std::vector<std::string> line;
      for (int c = 0; c < line_len; ++c) {
        line.emplace_back(1, static_cast<char>('a' + rng() % static_cast<unsigned>(alphabet)));
      }
      p.lines.push_back(std::move(line));
    }
    poems.push_back(std::move(p));
  }
  return poems;
}

inline PhonologyLexicon alternating_lexicon(const Vocabulary& vocab) {
  PhonologyLexicon lex;
  lex.set_source_id("test-alternating");
  for (TokenId id = Vocabulary::kNumSpecials; id < vocab.size(); ++id) {
    const std::string& tok = vocab.token_of(id);
    lex.set(tok, id % 2 == 0 ? ToneClass::Ping : ToneClass::Ze,
            static_cast<RhymeClass>(id % 13));
  }
  return lex;
}

}  // namespace quill::testutil

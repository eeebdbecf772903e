#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace quill {

using TokenId = std::int32_t;

// A quatrain: 4 lines x L character tokens, L in {5, 7}.
struct Poem {
  std::vector<std::vector<std::string>> lines;

  int line_len() const { return lines.empty() ? 0 : static_cast<int>(lines[0].size()); }
  std::vector<std::string> flat() const;
  bool operator==(const Poem&) const = default;
};

bool is_valid_quatrain(const Poem& p);

struct IngestStats {
  std::size_t poems_read = 0;      // JSON objects / text lines seen
  std::size_t poems_kept = 0;      // quatrains returned
  std::size_t poems_dropped = 0;   // failed structural filters
  std::size_t malformed_lines = 0; // unparseable JSONL rows, skipped
};

// Reads a corpus file (JSONL `{"id":..,"lines":[..]}` or plain text with
// '|' between lines, sniffed from the first non-empty line), applies the
// quatrain filters and splits poems with 4k lines into k quatrains.
std::vector<Poem> ingest(const std::string& path, IngestStats* stats = nullptr);

void write_jsonl(const std::vector<Poem>& poems, const std::string& path);

class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kBos = 2;
  static constexpr TokenId kEos = 3;
  static constexpr TokenId kMask = 4;
  static constexpr TokenId kSep = 5;
  static constexpr int kNumSpecials = 6;

  Vocabulary();

  // Ids: specials 0..5, then characters by descending corpus frequency,
  // ties by codepoint. min_count >= 1; throws on an empty corpus.
  static Vocabulary build(const std::vector<Poem>& poems, int min_count = 1);

  TokenId id_of(const std::string& token) const;  // UNK for unknown tokens
  const std::string& token_of(TokenId id) const;
  bool contains(const std::string& token) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  int non_special_count() const { return size() - kNumSpecials; }
  static bool is_special(TokenId id) { return id >= 0 && id < kNumSpecials; }

  std::vector<TokenId> encode(const std::vector<std::string>& tokens) const;
  std::vector<std::string> decode(const std::vector<TokenId>& ids) const;

  void save_tsv(const std::string& path) const;
  static Vocabulary load_tsv(const std::string& path);

  std::uint64_t content_hash() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
  void add(const std::string& token);
};

struct SplitSet {
  std::vector<Poem> train, valid, test;
  std::uint64_t seed = 0;
};

// Deterministic seeded shuffle, then floor(5%) valid, floor(5%) test,
// remainder train. Requires at least 20 poems.
SplitSet split(const std::vector<Poem>& poems, std::uint64_t seed);

enum class PairKind { Key2One, One2One, Two2One };

std::string_view pair_kind_name(PairKind k);

struct Seq2SeqPair {
  std::vector<std::string> source;
  std::vector<std::string> target;  // always exactly one poem line
  PairKind kind = PairKind::One2One;
};

// keyword_fn maps a list of lines to a keyword token sequence; required for
// Key2One only.
using KeywordFn =
    std::function<std::vector<std::string>(const std::vector<std::vector<std::string>>&)>;

std::vector<Seq2SeqPair> make_pairs(const std::vector<Poem>& poems, PairKind kind,
                                    const KeywordFn& keyword_fn = {});

}  // namespace quill

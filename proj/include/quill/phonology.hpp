#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>

namespace quill {

// Level (Ping) vs downward (Ze) tone; None covers punctuation, specials and
// characters outside the lexicon.
enum class ToneClass : std::uint8_t { Ping = 0, Ze = 1, None = 2 };

// Thirteen rhyme classes plus an explicit no-rhyme value.
enum class RhymeClass : std::uint8_t {
  R1 = 0, R2, R3, R4, R5, R6, R7, R8, R9, R10, R11, R12, R13,
  None = 13
};

inline constexpr int kToneClassCount = 3;    // rows of the tone table
inline constexpr int kRhymeClassCount = 14;  // 13 classes + None

std::string_view tone_name(ToneClass t);
std::string_view rhyme_name(RhymeClass r);
std::optional<ToneClass> parse_tone(std::string_view name);
std::optional<RhymeClass> parse_rhyme(std::string_view name);

// Immutable after load; safe for unrestricted concurrent reads.
class PhonologyLexicon {
 public:
  PhonologyLexicon() = default;

  // TSV: <char>\t<Ping|Ze|None>\t<R1..R13|None>, '#' lines are comments.
  // Duplicate characters resolve last-wins. Throws ValidationError with the
  // offending line number on malformed rows.
  static PhonologyLexicon load(const std::string& path);

  // Lookups never fail: unknown characters map to (None, None).
  ToneClass tone_of(const std::string& ch) const;
  RhymeClass rhyme_of(const std::string& ch) const;

  void set(const std::string& ch, ToneClass tone, RhymeClass rhyme);

  std::size_t size() const { return entries_.size(); }
  const std::string& source_id() const { return source_id_; }
  void set_source_id(std::string id) { source_id_ = std::move(id); }

  // Order-independent content hash, recorded in checkpoint metadata.
  std::uint64_t content_hash() const;

 private:
  std::unordered_map<std::string, std::pair<ToneClass, RhymeClass>> entries_;
  std::string source_id_;
};

}  // namespace quill

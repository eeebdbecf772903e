#include "quill/phonology.hpp"

#include <array>
#include <fstream>
#include <sstream>
#include <vector>

#include "quill/errors.hpp"
#include "quill/utf8.hpp"

namespace quill {

namespace {

constexpr std::array<std::string_view, 3> kToneNames = {"Ping", "Ze", "None"};

std::string rhyme_label(int idx) {
  if (idx == static_cast<int>(RhymeClass::None)) return "None";
  return "R" + std::to_string(idx + 1);
}

}  // namespace

std::string_view tone_name(ToneClass t) {
  return kToneNames[static_cast<std::size_t>(t)];
}

std::string_view rhyme_name(RhymeClass r) {
  static const std::array<std::string, 14> names = [] {
    std::array<std::string, 14> out;
    for (int i = 0; i < 14; ++i) out[static_cast<std::size_t>(i)] = rhyme_label(i);
    return out;
  }();
  return names[static_cast<std::size_t>(r)];
}

std::optional<ToneClass> parse_tone(std::string_view name) {
  for (std::size_t i = 0; i < kToneNames.size(); ++i) {
    if (name == kToneNames[i]) return static_cast<ToneClass>(i);
  }
  return std::nullopt;
}

std::optional<RhymeClass> parse_rhyme(std::string_view name) {
  if (name == "None") return RhymeClass::None;
  if (name.size() < 2 || name[0] != 'R') return std::nullopt;
  int value = 0;
  for (char c : name.substr(1)) {
    if (c < '0' || c > '9') return std::nullopt;
    value = value * 10 + (c - '0');
  }
  if (value < 1 || value > 13) return std::nullopt;
  return static_cast<RhymeClass>(value - 1);
}

PhonologyLexicon PhonologyLexicon::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("cannot open lexicon file: " + path);
  }
  PhonologyLexicon lex;
  lex.source_id_ = path;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    while (true) {
      std::size_t tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cols.size() != 3) {
      throw ValidationError("lexicon " + path + " line " + std::to_string(lineno) +
                            ": expected 3 tab-separated columns, got " +
                            std::to_string(cols.size()));
    }
    if (utf8_length(cols[0]) != 1) {
      throw ValidationError("lexicon " + path + " line " + std::to_string(lineno) +
                            ": key must be a single character, got '" + cols[0] + "'");
    }
    auto tone = parse_tone(cols[1]);
    if (!tone) {
      throw ValidationError("lexicon " + path + " line " + std::to_string(lineno) +
                            ": unknown tone class '" + cols[1] + "'");
    }
    auto rhyme = parse_rhyme(cols[2]);
    if (!rhyme) {
      throw ValidationError("lexicon " + path + " line " + std::to_string(lineno) +
                            ": unknown rhyme class '" + cols[2] + "'");
    }
    lex.entries_[cols[0]] = {*tone, *rhyme};
  }
  return lex;
}

ToneClass PhonologyLexicon::tone_of(const std::string& ch) const {
  auto it = entries_.find(ch);
  return it == entries_.end() ? ToneClass::None : it->second.first;
}

RhymeClass PhonologyLexicon::rhyme_of(const std::string& ch) const {
  auto it = entries_.find(ch);
  return it == entries_.end() ? RhymeClass::None : it->second.second;
}

void PhonologyLexicon::set(const std::string& ch, ToneClass tone, RhymeClass rhyme) {
  entries_[ch] = {tone, rhyme};
}

std::uint64_t PhonologyLexicon::content_hash() const {
  // FNV-1a per row, combined with XOR so iteration order does not matter.
  std::uint64_t combined = 0x9e3779b97f4a7c15ull ^ entries_.size();
  for (const auto& [ch, tr] : entries_) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::string_view s) {
      for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
      }
      h ^= 0xff;
      h *= 1099511628211ull;
    };
    mix(ch);
    mix(tone_name(tr.first));
    mix(rhyme_name(tr.second));
    combined ^= h;
  }
  return combined;
}

}  // namespace quill

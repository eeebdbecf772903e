#include "quill/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <json.hpp>

#include "quill/errors.hpp"
#include "quill/io.hpp"
#include "quill/utf8.hpp"

namespace quill {

std::vector<std::string> Poem::flat() const {
  std::vector<std::string> out;
  for (const auto& line : lines) {
    out.insert(out.end(), line.begin(), line.end());
  }
  return out;
}

bool is_valid_quatrain(const Poem& p) {
  if (p.lines.size() != 4) return false;
  const std::size_t len = p.lines[0].size();
  if (len != 5 && len != 7) return false;
  for (const auto& line : p.lines) {
    if (line.size() != len) return false;
  }
  return true;
}

namespace {

// Splits a raw poem (list of line strings) into consecutive quatrains;
// returns nothing if any filter fails.
void append_quatrains(const std::vector<std::string>& raw_lines, std::vector<Poem>& out,
                      IngestStats& stats) {
  if (raw_lines.empty() || raw_lines.size() % 4 != 0) {
    ++stats.poems_dropped;
    return;
  }
  std::vector<std::vector<std::string>> tokenized;
  tokenized.reserve(raw_lines.size());
  for (const auto& line : raw_lines) {
    tokenized.push_back(utf8_chars(line));
  }
  const std::size_t len = tokenized[0].size();
  if (len != 5 && len != 7) {
    ++stats.poems_dropped;
    return;
  }
  for (const auto& line : tokenized) {
    if (line.size() != len) {
      ++stats.poems_dropped;
      return;
    }
  }
  for (std::size_t i = 0; i + 4 <= tokenized.size(); i += 4) {
    Poem p;
    p.lines.assign(tokenized.begin() + static_cast<long>(i),
                   tokenized.begin() + static_cast<long>(i + 4));
    out.push_back(std::move(p));
    ++stats.poems_kept;
  }
}

}  // namespace

std::vector<Poem> ingest(const std::string& path, IngestStats* stats_out) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("cannot open corpus file: " + path);
  }
  IngestStats stats;
  std::vector<Poem> poems;
  std::string line;
  // format by extension, first-line sniff otherwise
  bool format_known = false;
  bool jsonl = false;
  if (path.size() >= 6 && path.substr(path.size() - 6) == ".jsonl") {
    jsonl = true;
    format_known = true;
  } else if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    jsonl = true;
    format_known = true;
  }
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!format_known) {
      jsonl = line.front() == '{';
      format_known = true;
    }
    ++stats.poems_read;
    std::vector<std::string> raw_lines;
    if (jsonl) {
      nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
      if (obj.is_discarded() || !obj.is_object() || !obj.contains("lines") ||
          !obj["lines"].is_array()) {
        ++stats.malformed_lines;
        continue;
      }
      bool ok = true;
      for (const auto& item : obj["lines"]) {
        if (!item.is_string()) {
          ok = false;
          break;
        }
        raw_lines.push_back(item.get<std::string>());
      }
      if (!ok) {
        ++stats.malformed_lines;
        continue;
      }
    } else {
      std::size_t start = 0;
      while (true) {
        std::size_t bar = line.find('|', start);
        raw_lines.push_back(line.substr(start, bar == std::string::npos ? bar : bar - start));
        if (bar == std::string::npos) break;
        start = bar + 1;
      }
    }
    append_quatrains(raw_lines, poems, stats);
  }
  if (stats_out) *stats_out = stats;
  return poems;
}

void write_jsonl(const std::vector<Poem>& poems, const std::string& path) {
  std::string buf;
  for (std::size_t i = 0; i < poems.size(); ++i) {
    nlohmann::json obj;
    obj["id"] = "p" + std::to_string(i);
    auto& lines = obj["lines"] = nlohmann::json::array();
    for (const auto& line : poems[i].lines) {
      std::string joined;
      for (const auto& ch : line) joined += ch;
      lines.push_back(joined);
    }
    buf += obj.dump();
    buf += '\n';
  }
  atomic_write_file(path, buf);
}

Vocabulary::Vocabulary() {
  for (const char* s : {"<pad>", "<unk>", "<bos>", "<eos>", "<mask>", "<sep>"}) {
    add(s);
  }
}

void Vocabulary::add(const std::string& token) {
  ids_.emplace(token, static_cast<TokenId>(tokens_.size()));
  tokens_.push_back(token);
}

Vocabulary Vocabulary::build(const std::vector<Poem>& poems, int min_count) {
  if (poems.empty()) {
    throw ValidationError("cannot build vocabulary from an empty corpus");
  }
  if (min_count < 1) {
    throw ValidationError("min_count must be >= 1");
  }
  // std::map keeps ties ordered by codepoint.
  std::map<std::string, std::int64_t> freq;
  for (const auto& poem : poems) {
    for (const auto& line : poem.lines) {
      for (const auto& ch : line) {
        ++freq[ch];
      }
    }
  }
  std::vector<std::pair<std::string, std::int64_t>> entries(freq.begin(), freq.end());
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary vocab;
  for (const auto& [token, count] : entries) {
    if (count >= min_count) vocab.add(token);
  }
  return vocab;
}

TokenId Vocabulary::id_of(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token_of(TokenId id) const {
  if (id < 0 || id >= size()) {
    throw ValidationError("token id out of range: " + std::to_string(id));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(const std::string& token) const { return ids_.count(token) > 0; }

std::vector<TokenId> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<TokenId> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id_of(t));
  return out;
}

std::vector<std::string> Vocabulary::decode(const std::vector<TokenId>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (TokenId id : ids) out.push_back(token_of(id));
  return out;
}

void Vocabulary::save_tsv(const std::string& path) const {
  std::string buf;
  for (int i = 0; i < size(); ++i) {
    buf += tokens_[static_cast<std::size_t>(i)];
    buf += '\t';
    buf += std::to_string(i);
    buf += '\n';
  }
  atomic_write_file(path, buf);
}

Vocabulary Vocabulary::load_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("cannot open vocab file: " + path);
  }
  Vocabulary vocab;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw FormatError("vocab " + path + " line " + std::to_string(lineno) +
                        ": expected <token>\\t<id>");
    }
    std::string token = line.substr(0, tab);
    int id = 0;
    try {
      id = std::stoi(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw FormatError("vocab " + path + " line " + std::to_string(lineno) +
                        ": id is not an integer");
    }
    if (id < kNumSpecials) {
      if (token != vocab.tokens_[static_cast<std::size_t>(id)]) {
        throw FormatError("vocab " + path + " line " + std::to_string(lineno) +
                          ": special id " + std::to_string(id) + " renamed");
      }
      continue;
    }
    if (id != vocab.size()) {
      throw FormatError("vocab " + path + " line " + std::to_string(lineno) +
                        ": ids must be dense and ascending");
    }
    vocab.add(token);
  }
  return vocab;
}

std::uint64_t Vocabulary::content_hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (int i = 0; i < size(); ++i) {
    for (unsigned char c : tokens_[static_cast<std::size_t>(i)]) {
      h ^= c;
      h *= 1099511628211ull;
    }
    h ^= 0xfe;
    h *= 1099511628211ull;
  }
  return h;
}

SplitSet split(const std::vector<Poem>& poems, std::uint64_t seed) {
  if (poems.size() < 20) {
    throw ValidationError("split requires at least 20 poems, got " +
                          std::to_string(poems.size()));
  }
  std::vector<std::size_t> order(poems.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  // Explicit Fisher-Yates: std::shuffle is not pinned across standard
  // library implementations.
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(order[i], order[j]);
  }
  const std::size_t n = poems.size();
  const std::size_t n_valid = n * 5 / 100;
  const std::size_t n_test = n * 5 / 100;
  const std::size_t n_train = n - n_valid - n_test;
  SplitSet out;
  out.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    const Poem& p = poems[order[i]];
    if (i < n_train) {
      out.train.push_back(p);
    } else if (i < n_train + n_valid) {
      out.valid.push_back(p);
    } else {
      out.test.push_back(p);
    }
  }
  return out;
}

std::string_view pair_kind_name(PairKind k) {
  switch (k) {
    case PairKind::Key2One: return "key2one";
    case PairKind::One2One: return "one2one";
    case PairKind::Two2One: return "two2one";
  }
  return "?";
}

std::vector<Seq2SeqPair> make_pairs(const std::vector<Poem>& poems, PairKind kind,
                                    const KeywordFn& keyword_fn) {
  if (kind == PairKind::Key2One && !keyword_fn) {
    throw ValidationError("key2one pairs require a keyword function");
  }
  std::vector<Seq2SeqPair> pairs;
  for (const auto& poem : poems) {
    switch (kind) {
      case PairKind::Key2One: {
        std::vector<std::vector<std::string>> first_line = {poem.lines[0]};
        pairs.push_back({keyword_fn(first_line), poem.lines[0], kind});
        break;
      }
      case PairKind::One2One: {
        pairs.push_back({poem.lines[0], poem.lines[1], kind});
        pairs.push_back({poem.lines[2], poem.lines[3], kind});
        break;
      }
      case PairKind::Two2One: {
        std::vector<std::string> src = poem.lines[0];
        src.push_back("<sep>");
        src.insert(src.end(), poem.lines[1].begin(), poem.lines[1].end());
        pairs.push_back({std::move(src), poem.lines[2], kind});
        break;
      }
    }
  }
  return pairs;
}

}  // namespace quill

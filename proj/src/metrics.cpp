#include "quill/metrics.hpp"

#include <algorithm>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

#include "quill/errors.hpp"
#include "quill/io.hpp"

namespace quill {

namespace {

std::map<std::vector<std::string>, int> ngram_counts(const std::vector<std::string>& seq,
                                                     int n) {
  std::map<std::vector<std::string>, int> counts;
  if (static_cast<int>(seq.size()) < n) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= seq.size(); ++i) {
    std::vector<std::string> gram(seq.begin() + static_cast<long>(i),
                                  seq.begin() + static_cast<long>(i + static_cast<std::size_t>(n)));
    ++counts[gram];
  }
  return counts;
}

}  // namespace

double bleu(const std::vector<std::string>& candidate,
            const std::vector<std::string>& reference, int max_n) {
  if (candidate.empty() || reference.empty()) {
    throw ValidationError("bleu: empty sequence");
  }
  if (max_n < 1) throw ValidationError("bleu: max_n must be >= 1");
  double log_precision_sum = 0.0;
  int orders_used = 0;
  for (int n = 1; n <= max_n; ++n) {
    const auto cand = ngram_counts(candidate, n);
    const auto ref = ngram_counts(reference, n);
    std::int64_t total = 0;
    std::int64_t clipped = 0;
    for (const auto& [gram, count] : cand) {
      total += count;
      auto it = ref.find(gram);
      if (it != ref.end()) clipped += std::min(count, it->second);
    }
    // orders where the candidate is too short to have any n-gram carry no
    // evidence and are skipped, so bleu(x, x) = 1 holds at every length
    if (total == 0) continue;
    if (clipped == 0) return 0.0;
    ++orders_used;
    log_precision_sum += std::log(static_cast<double>(clipped) / static_cast<double>(total));
  }
  if (orders_used == 0) return 0.0;
  double bp = 1.0;
  if (candidate.size() < reference.size()) {
    bp = std::exp(1.0 - static_cast<double>(reference.size()) /
                            static_cast<double>(candidate.size()));
  }
  return bp * std::exp(log_precision_sum / orders_used);
}

TonalPattern TonalPattern::from_json(const nlohmann::json& j) {
  TonalPattern p;
  for (const auto& t : j.at("tones")) {
    const std::string name = t.get<std::string>();
    if (name == "Ping") {
      p.tones.push_back(ToneRequirement::Ping);
    } else if (name == "Ze") {
      p.tones.push_back(ToneRequirement::Ze);
    } else if (name == "Any") {
      p.tones.push_back(ToneRequirement::Any);
    } else {
      throw FormatError("pattern: unknown tone requirement '" + name + "'");
    }
  }
  for (const auto& l : j.at("rhyming_lines")) {
    const int line = l.get<int>();
    if (line < 1 || line > 4) throw FormatError("pattern: rhyming line out of range");
    p.rhyming_lines.push_back(line);
  }
  if (p.rhyming_lines.empty()) throw FormatError("pattern: rhyming_lines must be non-empty");
  return p;
}

TonalPattern TonalPattern::load(const std::string& path) {
  nlohmann::json j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw FormatError("pattern " + path + ": invalid JSON");
  return from_json(j);
}

nlohmann::json TonalPattern::to_json() const {
  nlohmann::json j;
  auto& arr = j["tones"] = nlohmann::json::array();
  for (ToneRequirement t : tones) {
    arr.push_back(t == ToneRequirement::Ping ? "Ping"
                                             : (t == ToneRequirement::Ze ? "Ze" : "Any"));
  }
  j["rhyming_lines"] = rhyming_lines;
  return j;
}

double tone_accuracy(const std::vector<Poem>& poems, const PhonologyLexicon& lex,
                     const TonalPattern& pattern) {
  std::int64_t matched = 0;
  std::int64_t counted = 0;
  for (const auto& poem : poems) {
    const auto flat = poem.flat();
    if (flat.size() != pattern.tones.size()) {
      throw ValidationError("tone_accuracy: pattern length != 4*L");
    }
    for (std::size_t i = 0; i < flat.size(); ++i) {
      const ToneRequirement req = pattern.tones[i];
      if (req == ToneRequirement::Any) continue;
      const ToneClass tone = lex.tone_of(flat[i]);
      if (tone == ToneClass::None) continue;
      ++counted;
      if ((req == ToneRequirement::Ping && tone == ToneClass::Ping) ||
          (req == ToneRequirement::Ze && tone == ToneClass::Ze)) {
        ++matched;
      }
    }
  }
  if (counted == 0) {
    std::cerr << "[quill] tone_accuracy: no scorable position (pattern all-Any or "
                 "lexicon has no tones); reporting NaN\n";
    return std::numeric_limits<double>::quiet_NaN();
  }
  return static_cast<double>(matched) / static_cast<double>(counted);
}

double rhyme_accuracy(const std::vector<Poem>& poems, const PhonologyLexicon& lex,
                      const TonalPattern& pattern) {
  if (pattern.rhyming_lines.empty()) {
    throw ValidationError("rhyme_accuracy: pattern has no rhyming lines");
  }
  if (poems.empty()) {
    std::cerr << "[quill] rhyme_accuracy: no poems; reporting NaN\n";
    return std::numeric_limits<double>::quiet_NaN();
  }
  double sum = 0.0;
  for (const auto& poem : poems) {
    std::array<int, kRhymeClassCount> counts{};
    for (int line : pattern.rhyming_lines) {
      const auto& chars = poem.lines[static_cast<std::size_t>(line - 1)];
      const RhymeClass r = lex.rhyme_of(chars.back());
      ++counts[static_cast<std::size_t>(r)];
    }
    int modal = 0;
    for (int c = 0; c < kRhymeClassCount - 1; ++c) {  // None never matches
      modal = std::max(modal, counts[static_cast<std::size_t>(c)]);
    }
    sum += static_cast<double>(modal) / static_cast<double>(pattern.rhyming_lines.size());
  }
  return sum / static_cast<double>(poems.size());
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["n_samples"] = n_samples;
  auto& rows_json = j["rows"] = nlohmann::json::array();
  static const char* stage_names[4] = {"key->1", "1->2", "1&2->3", "3->4"};
  for (const auto& row : rows) {
    nlohmann::json r;
    r["model"] = row.name;
    for (int s = 0; s < 4; ++s) {
      r["bleu"][stage_names[s]] = {{"bl1", row.stages[static_cast<std::size_t>(s)].bl1},
                                   {"bl2", row.stages[static_cast<std::size_t>(s)].bl2}};
    }
    r["bleu"]["average"] = {{"bl1", row.average.bl1}, {"bl2", row.average.bl2}};
    r["sim12"] = row.sim12;
    r["sim34"] = row.sim34;
    r["sim2L"] = row.sim2l;
    r["tone_acc"] = row.tone_acc;
    r["rhyme_acc"] = row.rhyme_acc;
    rows_json.push_back(std::move(r));
  }
  return j;
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  auto fmt = [](double v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%6.3f", v);
    return std::string(buf);
  };
  out << "BLEU (per stage)\n";
  out << "Model        key->1 BL1/BL2   1->2 BL1/BL2   1&2->3 BL1/BL2  3->4 BL1/BL2   "
         "Avg BL1/BL2\n";
  for (const auto& row : rows) {
    out << row.name;
    for (std::size_t i = row.name.size(); i < 13; ++i) out << ' ';
    for (const auto& st : row.stages) {
      out << fmt(st.bl1) << '/' << fmt(st.bl2) << "  ";
    }
    out << fmt(row.average.bl1) << '/' << fmt(row.average.bl2) << '\n';
  }
  out << "\nSimilarity and phonology\n";
  out << "Model         Sim12   Sim34   Sim2L     TA.     RA.\n";
  for (const auto& row : rows) {
    out << row.name;
    for (std::size_t i = row.name.size(); i < 13; ++i) out << ' ';
    out << fmt(row.sim12) << "  " << fmt(row.sim34) << "  " << fmt(row.sim2l) << "  "
        << fmt(row.tone_acc) << "  " << fmt(row.rhyme_acc) << '\n';
  }
  out << "\nn_samples: " << n_samples << '\n';
  return out.str();
}

}  // namespace quill

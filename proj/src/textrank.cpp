#include "quill/textrank.hpp"

#include <algorithm>
#include <fstream>
#include <memory>
#include <unordered_map>
#include <unordered_set>

#include "quill/errors.hpp"
#include "quill/utf8.hpp"

namespace quill {

Segmenter char_segmenter() {
  return [](const std::vector<std::string>& chars) {
    std::vector<Word> out;
    out.reserve(chars.size());
    for (const auto& ch : chars) out.push_back({{ch}, ch});
    return out;
  };
}

Segmenter make_longest_match_segmenter(const std::vector<std::string>& words) {
  // Bucket word character sequences by length, longest first.
  auto table = std::make_shared<std::unordered_set<std::string>>();
  std::size_t max_len = 1;
  for (const auto& w : words) {
    table->insert(w);
    max_len = std::max(max_len, utf8_length(w));
  }
  return [table, max_len](const std::vector<std::string>& chars) {
    std::vector<Word> out;
    std::size_t i = 0;
    while (i < chars.size()) {
      std::size_t best = 1;
      std::string joined = chars[i];
      std::string probe = chars[i];
      for (std::size_t len = 2; len <= max_len && i + len <= chars.size(); ++len) {
        probe += chars[i + len - 1];
        if (table->count(probe)) {
          best = len;
          joined = probe;
        }
      }
      Word w;
      w.joined = joined;
      w.chars.assign(chars.begin() + static_cast<long>(i),
                     chars.begin() + static_cast<long>(i + best));
      out.push_back(std::move(w));
      i += best;
    }
    return out;
  };
}

Segmenter load_segmenter(const std::string& wordlist_path) {
  if (wordlist_path.empty()) return char_segmenter();
  std::ifstream in(wordlist_path);
  if (!in) {
    throw ValidationError("cannot open word list: " + wordlist_path);
  }
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && line[0] != '#') words.push_back(line);
  }
  return make_longest_match_segmenter(words);
}

KeywordGraph build_keyword_graph(const std::vector<std::vector<std::string>>& lines,
                                 const Segmenter& segmenter, int window) {
  if (window < 2) throw ValidationError("co-occurrence window must be >= 2");
  KeywordGraph g;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::vector<std::size_t>> line_nodes;
  std::size_t word_pos = 0;
  for (const auto& line : lines) {
    std::vector<std::size_t> ids;
    for (Word& w : segmenter(line)) {
      auto it = index.find(w.joined);
      std::size_t id;
      if (it == index.end()) {
        id = g.nodes.size();
        index.emplace(w.joined, id);
        g.nodes.push_back(std::move(w));
        g.first_occurrence.push_back(word_pos);
      } else {
        id = it->second;
      }
      ids.push_back(id);
      ++word_pos;
    }
    line_nodes.push_back(std::move(ids));
  }
  const Eigen::Index n = static_cast<Eigen::Index>(g.nodes.size());
  g.weights = Eigen::MatrixXd::Zero(n, n);
  for (const auto& ids : line_nodes) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      for (std::size_t j = i + 1; j < ids.size() && j < i + static_cast<std::size_t>(window);
           ++j) {
        if (ids[i] == ids[j]) continue;
        const auto a = static_cast<Eigen::Index>(ids[i]);
        const auto b = static_cast<Eigen::Index>(ids[j]);
        g.weights(a, b) += 1.0;
        g.weights(b, a) += 1.0;
      }
    }
  }
  return g;
}

Eigen::VectorXd textrank_scores(const Eigen::MatrixXd& weights, double damping, int iters) {
  const Eigen::Index n = weights.rows();
  Eigen::VectorXd scores = Eigen::VectorXd::Ones(n);
  if (n == 0) return scores;
  Eigen::VectorXd out_weight = weights.rowwise().sum();
  // Column-normalized transition: T(v,u) = w_uv / deg(u) for deg(u) > 0.
  Eigen::MatrixXd transition = weights;
  for (Eigen::Index u = 0; u < n; ++u) {
    if (out_weight(u) > 0.0) {
      transition.col(u) /= out_weight(u);
    }
  }
  for (int it = 0; it < iters; ++it) {
    scores = Eigen::VectorXd::Constant(n, 1.0 - damping) + damping * (transition * scores);
  }
  return scores;
}

std::vector<std::string> extract_keyword(const std::vector<std::vector<std::string>>& lines,
                                         const Segmenter& segmenter, int window,
                                         double damping, int iters) {
  KeywordGraph g = build_keyword_graph(lines, segmenter, window);
  if (g.nodes.empty()) {
    throw ValidationError("keyword extraction: segmentation produced no words");
  }
  g.scores = textrank_scores(g.weights, damping, iters);
  std::size_t best = 0;
  for (std::size_t i = 1; i < g.nodes.size(); ++i) {
    const double s = g.scores(static_cast<Eigen::Index>(i));
    const double sb = g.scores(static_cast<Eigen::Index>(best));
    if (s > sb || (s == sb && g.first_occurrence[i] < g.first_occurrence[best])) {
      best = i;
    }
  }
  return g.nodes[best].chars;
}

}  // namespace quill

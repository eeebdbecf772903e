#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace quill {

// A segmented word: its character tokens plus the joined form used as the
// graph node identity.
struct Word {
  std::vector<std::string> chars;
  std::string joined;
};

using Segmenter = std::function<std::vector<Word>(const std::vector<std::string>&)>;

// Every character is its own word.
Segmenter char_segmenter();

// Greedy longest match against a word list (each entry a string of
// concatenated characters), falling back to single characters.
Segmenter make_longest_match_segmenter(const std::vector<std::string>& words);

Segmenter load_segmenter(const std::string& wordlist_path);  // empty path -> chars

struct KeywordGraph {
  std::vector<Word> nodes;
  std::vector<std::size_t> first_occurrence;  // word-position of first sighting
  Eigen::MatrixXd weights;                    // symmetric co-occurrence counts
  Eigen::VectorXd scores;
};

// Undirected co-occurrence graph: words within `window` positions of each
// other in a line are linked, weight = number of co-occurrences.
KeywordGraph build_keyword_graph(const std::vector<std::vector<std::string>>& lines,
                                 const Segmenter& segmenter, int window);

// Damped rank iteration S(v) = (1-d) + d * sum_u w_uv / deg(u) * S(u),
// run for a fixed number of iterations from all-ones.
Eigen::VectorXd textrank_scores(const Eigen::MatrixXd& weights, double damping, int iters);

// The highest-scoring word of the graph; ties break to the earliest corpus
// occurrence. Throws if segmentation yields zero words.
std::vector<std::string> extract_keyword(const std::vector<std::vector<std::string>>& lines,
                                         const Segmenter& segmenter, int window = 3,
                                         double damping = 0.85, int iters = 50);

}  // namespace quill

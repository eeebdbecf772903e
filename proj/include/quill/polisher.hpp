#pragma once

#include <deque>

#include "quill/qamlm.hpp"

namespace quill {

struct PolishLimits {
  int max_iters = 0;             // 0 -> 2 * sequence length
  int oscillation_window = 8;

  int effective_max_iters(int seq_len) const {
    return max_iters > 0 ? max_iters : 2 * seq_len;
  }
};

enum class PolishTermination { EndSignal, MaxIters, OscillationGuard };

inline std::string_view polish_termination_name(PolishTermination t) {
  switch (t) {
    case PolishTermination::EndSignal: return "EndSignal";
    case PolishTermination::MaxIters: return "MaxIters";
    case PolishTermination::OscillationGuard: return "OscillationGuard";
  }
  return "?";
}

struct PolishStep {
  int iteration = 0;  // 1-based
  int position = 0;   // 1-based position in the flattened sequence
  std::string old_char;
  std::string new_char;
};

struct PolishTrace {
  std::vector<PolishStep> steps;
  PolishTermination terminated_by = PolishTermination::EndSignal;
  std::vector<std::string> final_tokens;
};

namespace detail {

inline std::uint64_t sequence_hash(const std::vector<TokenId>& seq) {
  std::uint64_t h = 1469598103934665603ull;
  for (TokenId t : seq) {
    h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(t));
    h *= 1099511628211ull;
  }
  return h;
}

template <class S>
int argmax_index(const Eigen::Matrix<S, 1, Eigen::Dynamic>& row) {
  // ties break to the lowest index
  int best = 0;
  for (int i = 1; i < row.cols(); ++i) {
    if (row(0, i) > row(0, best)) best = i;
  }
  return best;
}

}  // namespace detail

// Algorithm: locate the worst position with the QA head; stop on class 0;
// otherwise mask it, re-predict with the MLM head, write the prediction
// back, repeat. The max-iteration cap and the repeated-state guard bound
// the loop regardless of model behavior.
template <class S>
std::pair<std::vector<TokenId>, PolishTrace> polish(ModelBundle<S>& model,
                                                    const Vocabulary& vocab,
                                                    const PhonologyIds& ph,
                                                    std::vector<TokenId> draft,
                                                    const PolishLimits& limits = {}) {
  if (model.meta.kind != ModelKind::Qamlm) {
    throw ValidationError("polish requires a qamlm model");
  }
  require_matching_vocab(model, vocab);
  const int seq_len = 4 * model.meta.line_len;
  if (static_cast<int>(draft.size()) != seq_len) {
    throw ValidationError("polish: draft length must be 4*L = " + std::to_string(seq_len));
  }
  PolishTrace trace;
  const int max_iters = limits.effective_max_iters(seq_len);
  std::deque<std::uint64_t> window;
  auto remember = [&](std::uint64_t h) {
    window.push_back(h);
    while (static_cast<int>(window.size()) > limits.oscillation_window) {
      window.pop_front();
    }
  };
  remember(detail::sequence_hash(draft));

  trace.terminated_by = PolishTermination::MaxIters;
  for (int iter = 1; iter <= max_iters; ++iter) {
    auto q = qa_forward(model, ph, draft);
    const int p = detail::argmax_index(q);
    if (p == 0) {
      trace.terminated_by = PolishTermination::EndSignal;
      break;
    }
    const std::size_t idx = static_cast<std::size_t>(p - 1);
    const TokenId old_tok = draft[idx];
    std::vector<TokenId> masked = draft;
    masked[idx] = Vocabulary::kMask;
    auto dist = mlm_forward(model, ph, masked, p - 1);
    const TokenId new_tok = detail::argmax_index(dist);
    draft[idx] = new_tok;
    trace.steps.push_back(
        {iter, p, vocab.token_of(old_tok), vocab.token_of(new_tok)});
    const std::uint64_t h = detail::sequence_hash(draft);
    if (std::find(window.begin(), window.end(), h) != window.end()) {
      trace.terminated_by = PolishTermination::OscillationGuard;
      break;
    }
    remember(h);
  }
  trace.final_tokens = vocab.decode(draft);
  return {std::move(draft), std::move(trace)};
}

// Flattens the quatrain, polishes, and re-folds into 4 x L lines.
template <class S>
std::pair<Poem, PolishTrace> polish_poem(ModelBundle<S>& model, const Vocabulary& vocab,
                                         const PhonologyIds& ph, const Poem& poem,
                                         const PolishLimits& limits = {}) {
  auto [ids, trace] = polish(model, vocab, ph, vocab.encode(poem.flat()), limits);
  const int L = model.meta.line_len;
  Poem out;
  out.lines.resize(4);
  auto tokens = vocab.decode(ids);
  for (int line = 0; line < 4; ++line) {
    out.lines[static_cast<std::size_t>(line)].assign(
        tokens.begin() + static_cast<long>(line * L),
        tokens.begin() + static_cast<long>((line + 1) * L));
  }
  return {std::move(out), std::move(trace)};
}

inline nlohmann::json trace_to_json(const PolishTrace& trace) {
  nlohmann::json j;
  j["terminated_by"] = std::string(polish_termination_name(trace.terminated_by));
  auto& steps = j["steps"] = nlohmann::json::array();
  for (const auto& s : trace.steps) {
    steps.push_back({{"iter", s.iteration},
                     {"pos", s.position},
                     {"old", s.old_char},
                     {"new", s.new_char}});
  }
  j["final"] = trace.final_tokens;
  return j;
}

}  // namespace quill

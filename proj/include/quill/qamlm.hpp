#pragma once

#include <algorithm>
#include <iostream>
#include <random>

#include "quill/seq2seq.hpp"

namespace quill {

// 60% replace one character, 20% replace two, 20% keep unchanged.
inline constexpr double kCorruptOneProb = 0.60;
inline constexpr double kCorruptTwoProb = 0.20;

// Alternative schedules are configurable; the default is the pinned
// 60/20/20 scheme and the only one exercised by the test suite.
struct CorruptionScheme {
  double p_one = kCorruptOneProb;
  double p_two = kCorruptTwoProb;

  void validate() const {
    if (p_one < 0.0 || p_two < 0.0 || p_one + p_two > 1.0) {
      throw ValidationError("corruption scheme probabilities must be >= 0 and sum <= 1");
    }
  }
};

// (s_g, s_c, s_m) plus 1-based corrupted positions; empty positions encode
// the "nothing to polish" label 0.
struct CorruptedSample {
  std::vector<TokenId> s_g;
  std::vector<TokenId> s_c;
  std::vector<TokenId> s_m;
  std::vector<int> positions;      // sorted, 1-based
  std::vector<TokenId> replaced;   // original characters at those positions
};

// Applies the corruption rules to a whole quatrain sequence. Replacement
// tokens are drawn uniformly from the non-special vocabulary and re-drawn
// while equal to the original character.
inline CorruptedSample corrupt(const std::vector<TokenId>& s_g, std::mt19937_64& rng,
                               const Vocabulary& vocab,
                               const CorruptionScheme& scheme = {}) {
  scheme.validate();
  for (TokenId t : s_g) {
    if (Vocabulary::is_special(t)) {
      throw ValidationError("corrupt: input contains special tokens");
    }
  }
  if (vocab.non_special_count() < 2) {
    throw ValidationError("corrupt: vocabulary needs at least 2 non-special tokens");
  }
  const int n = static_cast<int>(s_g.size());
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double branch = uni(rng);
  int r = 0;
  if (branch < scheme.p_one) {
    r = 1;
  } else if (branch < scheme.p_one + scheme.p_two) {
    r = 2;
  }
  CorruptedSample out;
  out.s_g = s_g;
  out.s_c = s_g;
  if (r > 0) {
    std::uniform_int_distribution<int> pos_dist(1, n);
    while (static_cast<int>(out.positions.size()) < r) {
      const int p = pos_dist(rng);
      if (std::find(out.positions.begin(), out.positions.end(), p) == out.positions.end()) {
        out.positions.push_back(p);
      }
    }
    std::sort(out.positions.begin(), out.positions.end());
    std::uniform_int_distribution<TokenId> tok_dist(Vocabulary::kNumSpecials,
                                                    vocab.size() - 1);
    for (int p : out.positions) {
      const TokenId original = s_g[static_cast<std::size_t>(p - 1)];
      TokenId replacement = tok_dist(rng);
      while (replacement == original) replacement = tok_dist(rng);
      out.replaced.push_back(original);
      out.s_c[static_cast<std::size_t>(p - 1)] = replacement;
    }
  }
  out.s_m = out.s_c;
  for (int p : out.positions) {
    out.s_m[static_cast<std::size_t>(p - 1)] = Vocabulary::kMask;
  }
  return out;
}

namespace detail {

template <class S>
typename Graph<S>::Var qamlm_encode(Graph<S>& g, ModelBundle<S>& model,
                                    const PhonologyIds& ph, const std::vector<TokenId>& seq,
                                    const DropoutCtx* drop = nullptr) {
  if (model.meta.kind != ModelKind::Qamlm) {
    throw ValidationError("expected a qamlm model, got " +
                          std::string(model_kind_name(model.meta.kind)));
  }
  if (static_cast<int>(seq.size()) != 4 * model.meta.line_len) {
    throw ValidationError("qamlm: sequence length must be 4*L = " +
                          std::to_string(4 * model.meta.line_len));
  }
  return encode(g, model, ph, make_quatrain_input(seq, model.meta.line_len), drop);
}

// Quality-position logits: the d -> (4L+1) projection is applied to every
// encoder output row and the class logits are max-reduced over positions,
// class 0 = p_end. Each position can locally vote for its own class, which
// keeps the decision independent of sequence-global routing.
template <class S>
typename Graph<S>::Var position_logits(Graph<S>& g, ModelBundle<S>& model,
                                       typename Graph<S>::Var encoded) {
  return g.max_rows(linear(g, encoded, model.position_head));
}

// A 1 x V constant that sends special-token logits to -inf for inference
// distributions.
template <class S>
Mat<S> special_ban_row(int vocab_size) {
  Mat<S> m = Mat<S>::Zero(1, vocab_size);
  for (int t = 0; t < Vocabulary::kNumSpecials; ++t) m(0, t) = S(-1e9);
  return m;
}

}  // namespace detail

// P(worst position | s) over 4L+1 classes; class 0 means nothing needs
// polishing.
template <class S>
Eigen::Matrix<S, 1, Eigen::Dynamic> qa_forward(ModelBundle<S>& model, const PhonologyIds& ph,
                                               const std::vector<TokenId>& seq) {
  Graph<S> g;
  auto logits = detail::position_logits(g, model, detail::qamlm_encode(g, model, ph, seq));
  return g.value(g.softmax_rows(logits)).row(0);
}

// P(original char | bidirectional context) at the masked position. Special
// tokens carry zero probability.
template <class S>
Eigen::Matrix<S, 1, Eigen::Dynamic> mlm_forward(ModelBundle<S>& model, const PhonologyIds& ph,
                                                const std::vector<TokenId>& masked_seq,
                                                int mask_position) {
  if (mask_position < 0 || mask_position >= static_cast<int>(masked_seq.size()) ||
      masked_seq[static_cast<std::size_t>(mask_position)] != Vocabulary::kMask) {
    throw ValidationError("mlm_forward: mask_position must hold the MASK token");
  }
  Graph<S> g;
  auto encoded = detail::qamlm_encode(g, model, ph, masked_seq);
  auto at_mask = g.gather_rows(encoded, {mask_position});
  auto logits = linear(g, at_mask, model.mlm_head);
  auto banned = g.add_const(logits, detail::special_ban_row<S>(model.vocab_size()));
  return g.value(g.softmax_rows(banned)).row(0);
}

template <class S>
struct QamlmLoss {
  S total = S(0);
  S loss_m = S(0);
  S loss_q = S(0);
};

namespace detail {

// Builds the joint loss graph for a batch. loss_q averages the summed
// per-position NLL over samples; loss_m averages over masked positions.
// Returns (total, loss_m, loss_q) Vars; total = loss_m + lambda * loss_q.
template <class S>
struct QamlmLossVars {
  typename Graph<S>::Var total, loss_m, loss_q;
};

template <class S>
QamlmLossVars<S> qamlm_loss_graph(Graph<S>& g, ModelBundle<S>& model, const PhonologyIds& ph,
                                  const std::vector<CorruptedSample>& batch, S lambda,
                                  const DropoutCtx* drop = nullptr) {
  if (lambda < S(0)) throw ValidationError("lambda must be >= 0");
  if (batch.empty()) throw ValidationError("qamlm loss requires a non-empty batch");
  std::size_t mask_count = 0;
  for (const auto& s : batch) mask_count += s.positions.size();

  typename Graph<S>::Var q_sum = g.constant(Mat<S>::Zero(1, 1));
  typename Graph<S>::Var m_sum = g.constant(Mat<S>::Zero(1, 1));
  for (const auto& sample : batch) {
    auto enc_c = qamlm_encode(g, model, ph, sample.s_c, drop);
    auto q_logits = position_logits(g, model, enc_c);
    std::vector<int> q_targets = sample.positions;
    if (q_targets.empty()) q_targets.push_back(0);
    q_sum = g.add(q_sum, g.nll(q_logits, {q_targets}));

    if (!sample.positions.empty()) {
      auto enc_m = qamlm_encode(g, model, ph, sample.s_m, drop);
      std::vector<int> mask_rows;
      std::vector<std::vector<int>> m_targets;
      for (std::size_t i = 0; i < sample.positions.size(); ++i) {
        mask_rows.push_back(sample.positions[i] - 1);
        m_targets.push_back({sample.replaced[i]});
      }
      auto m_logits = linear(g, g.gather_rows(enc_m, mask_rows), model.mlm_head);
      m_sum = g.add(m_sum, g.nll(m_logits, std::move(m_targets)));
    }
  }
  QamlmLossVars<S> out;
  out.loss_q = g.scale(q_sum, S(1) / S(batch.size()));
  out.loss_m = mask_count > 0 ? g.scale(m_sum, S(1) / S(mask_count)) : m_sum;
  out.total = g.add(out.loss_m, g.scale(out.loss_q, lambda));
  return out;
}

}  // namespace detail

template <class S>
QamlmLoss<S> qamlm_loss(ModelBundle<S>& model, const PhonologyIds& ph,
                        const std::vector<CorruptedSample>& batch, S lambda) {
  Graph<S> g;
  auto vars = detail::qamlm_loss_graph(g, model, ph, batch, lambda);
  return {g.value(vars.total)(0, 0), g.value(vars.loss_m)(0, 0), g.value(vars.loss_q)(0, 0)};
}

// Joint training with fresh, seeded corruption every epoch.
template <class S>
ModelBundle<S> train_qamlm(const std::vector<Poem>& poems, const Vocabulary& vocab,
                           const PhonologyLexicon& lex, const TransformerConfig& cfg,
                           int line_len, const TrainHyper& hyper, TrainLog* log = nullptr,
                           bool verbose = false) {
  if (poems.empty()) throw ValidationError("train_qamlm: empty corpus");
  for (const auto& p : poems) {
    if (p.lines.size() != 4 || p.line_len() != line_len) {
      throw ValidationError("train_qamlm: poem is not a 4 x " + std::to_string(line_len) +
                            " quatrain");
    }
  }
  const PhonologyIds ph = PhonologyIds::build(vocab, lex);
  ModelBundle<S> model = init_model<S>(ModelKind::Qamlm, cfg, vocab.size(), line_len,
                                       hyper.seed);
  model.meta.vocab_hash = hash_hex(vocab.content_hash());
  model.meta.lexicon_hash = hash_hex(lex.content_hash());
  model.meta.hyper = {{"epochs", static_cast<double>(hyper.epochs)},
                      {"batch", static_cast<double>(hyper.batch)},
                      {"lr", hyper.lr},
                      {"lambda", hyper.lambda},
                      {"seed", static_cast<double>(hyper.seed)}};

  std::vector<std::vector<TokenId>> sequences;
  sequences.reserve(poems.size());
  std::size_t skipped = 0;
  for (const auto& p : poems) {
    auto ids = vocab.encode(p.flat());
    // poems with out-of-vocabulary characters cannot carry corruption labels
    const bool has_special = std::any_of(ids.begin(), ids.end(), Vocabulary::is_special);
    if (has_special) {
      ++skipped;
      continue;
    }
    sequences.push_back(std::move(ids));
  }
  if (sequences.empty()) {
    throw ValidationError("train_qamlm: every poem contains out-of-vocabulary characters");
  }
  if (skipped > 0 && verbose) {
    std::cerr << "[train qamlm] skipped " << skipped << " poems with OOV characters\n";
  }

  const int batch = std::max(1, hyper.batch);
  const std::int64_t steps_per_epoch =
      static_cast<std::int64_t>((sequences.size() + static_cast<std::size_t>(batch) - 1) /
                                static_cast<std::size_t>(batch));
  AdamOptimizer<S> opt(model.parameters(), hyper.lr, steps_per_epoch * hyper.epochs);
  std::mt19937_64 rng(hyper.seed ^ 0x9a319a319a319a31ull);
  const S lambda = static_cast<S>(hyper.lambda);

  std::vector<std::size_t> order(sequences.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng() % i]);
    }
    double ep_total = 0.0, ep_m = 0.0, ep_q = 0.0;
    std::int64_t batches = 0;
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(batch)) {
      const std::size_t end = std::min(order.size(), at + static_cast<std::size_t>(batch));
      std::vector<CorruptedSample> samples;
      samples.reserve(end - at);
      for (std::size_t i = at; i < end; ++i) {
        samples.push_back(corrupt(sequences[order[i]], rng, vocab));
      }
      opt.zero_grads();
      Graph<S> g;
      DropoutCtx drop{model.config.dropout, &rng};
      auto vars = detail::qamlm_loss_graph(g, model, ph, samples, lambda, &drop);
      g.backward(vars.total);
      opt.step();
      ep_total += static_cast<double>(g.value(vars.total)(0, 0));
      ep_m += static_cast<double>(g.value(vars.loss_m)(0, 0));
      ep_q += static_cast<double>(g.value(vars.loss_q)(0, 0));
      ++batches;
    }
    model.meta.step = opt.steps_taken();
    TrainLogEntry entry;
    entry.step = model.meta.step;
    entry.total = ep_total / static_cast<double>(batches);
    entry.loss_m = ep_m / static_cast<double>(batches);
    entry.loss_q = ep_q / static_cast<double>(batches);
    if (log) log->push_back(entry);
    if (verbose) {
      std::cerr << "[train qamlm] epoch " << epoch + 1 << "/" << hyper.epochs << " total "
                << entry.total << " m " << entry.loss_m << " q " << entry.loss_q << "\n";
    }
  }
  return model;
}

// Debug dump format shared with the CLI.
nlohmann::json corrupted_sample_to_json(const CorruptedSample& s, const Vocabulary& vocab);

inline nlohmann::json corrupted_sample_to_json(const CorruptedSample& s,
                                               const Vocabulary& vocab) {
  nlohmann::json j;
  j["s_g"] = vocab.decode(s.s_g);
  j["s_c"] = vocab.decode(s.s_c);
  j["positions"] = s.positions;
  j["replaced"] = vocab.decode(s.replaced);
  return j;
}

}  // namespace quill

#pragma once

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <optional>
#include <utility>

#include "quill/adam.hpp"
#include "quill/checkpoint.hpp"
#include "quill/model.hpp"

namespace quill {

struct DecodeSpec {
  enum class Strategy { Greedy, Beam };
  Strategy strategy = Strategy::Greedy;
  int beam_width = 1;

  static DecodeSpec greedy() { return {}; }
  static DecodeSpec beam(int k) {
    if (k < 1 || k > 8) throw ValidationError("beam width must be in [1, 8]");
    return {Strategy::Beam, k};
  }
};

struct TrainHyper {
  int epochs = 50;
  int batch = 16;
  double lr = 1e-3;
  double lambda = 1.0;  // qamlm only
  std::uint64_t seed = 42;
};

struct TrainLogEntry {
  std::int64_t step = 0;
  double total = 0.0;
  double loss_m = 0.0;  // qamlm components; zero for seq2seq
  double loss_q = 0.0;
  double valid = std::numeric_limits<double>::quiet_NaN();
};

using TrainLog = std::vector<TrainLogEntry>;

inline EmbedInput source_input(ModelKind kind, const std::vector<TokenId>& src,
                               int line_len) {
  switch (kind) {
    case ModelKind::Key2One: return make_keyword_input(src);
    case ModelKind::One2One: return make_line_input(src, line_len);
    case ModelKind::Two2One: return make_two_line_input(src, line_len);
    case ModelKind::Qamlm: return make_quatrain_input(src, line_len);
  }
  throw ValidationError("bad model kind");
}

template <class S>
void require_matching_vocab(const ModelBundle<S>& model, const Vocabulary& vocab) {
  if (!model.meta.vocab_hash.empty() &&
      model.meta.vocab_hash != hash_hex(vocab.content_hash())) {
    throw ValidationError("model/vocabulary hash mismatch for " +
                          std::string(model_kind_name(model.meta.kind)) + " model");
  }
}

// Bidirectional encoding of an embedded source; eval mode unless a dropout
// context is supplied.
template <class S>
typename Graph<S>::Var encode(Graph<S>& g, ModelBundle<S>& model, const PhonologyIds& ph,
                              const EmbedInput& in, const DropoutCtx* drop = nullptr) {
  auto x = dropout(g, embed(g, in, ph, model.tables), drop);
  return encoder_forward(g, x, model.encoder, model.config.n_heads, drop);
}

template <class S>
Mat<S> encode_source(ModelBundle<S>& model, const PhonologyIds& ph,
                     const std::vector<TokenId>& src) {
  Graph<S> g;
  auto mem = encode(g, model, ph, source_input(model.meta.kind, src, model.meta.line_len));
  return g.value(mem);
}

// One autoregressive step: P(next | prefix, memory). The prefix must start
// with BOS; returns a full softmax distribution over the vocabulary.
template <class S>
Eigen::Matrix<S, 1, Eigen::Dynamic> decode_step(ModelBundle<S>& model,
                                                const PhonologyIds& ph,
                                                const std::vector<TokenId>& prefix,
                                                const Mat<S>& memory) {
  if (prefix.empty()) throw ValidationError("decode_step: prefix must be non-empty");
  if (static_cast<int>(prefix.size()) > model.config.max_len) {
    throw ValidationError("decode_step: prefix exceeds max_len");
  }
  Graph<S> g;
  auto x = embed(g, make_prefix_input(prefix), ph, model.tables);
  auto mem = g.constant(memory);
  auto h = decoder_forward(g, x, mem, model.decoder, model.config.n_heads);
  auto logits = linear(g, h, model.lm_head);
  auto probs = g.softmax_rows(logits);
  return g.value(probs).row(g.value(probs).rows() - 1);
}

// Teacher-forced sum of -log P(t_j | t_<j, s) over all target positions.
template <class S>
typename Graph<S>::Var seq2seq_nll(Graph<S>& g, ModelBundle<S>& model,
                                   const PhonologyIds& ph, const std::vector<TokenId>& src,
                                   const std::vector<TokenId>& tgt,
                                   const DropoutCtx* drop = nullptr) {
  auto mem = encode(g, model, ph, source_input(model.meta.kind, src, model.meta.line_len),
                    drop);
  std::vector<TokenId> prefix;
  prefix.reserve(tgt.size());
  prefix.push_back(Vocabulary::kBos);
  prefix.insert(prefix.end(), tgt.begin(), tgt.end() - 1);
  auto x = dropout(g, embed(g, make_prefix_input(prefix), ph, model.tables), drop);
  auto h = decoder_forward(g, x, mem, model.decoder, model.config.n_heads, drop);
  auto logits = linear(g, h, model.lm_head);
  std::vector<std::vector<int>> targets(tgt.size());
  for (std::size_t j = 0; j < tgt.size(); ++j) targets[j] = {tgt[j]};
  return g.nll(logits, std::move(targets));
}

template <class S>
double mean_nll(ModelBundle<S>& model, const PhonologyIds& ph,
                const std::vector<std::pair<std::vector<TokenId>, std::vector<TokenId>>>& pairs) {
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto& [src, tgt] : pairs) {
    Graph<S> g;
    total += static_cast<double>(g.value(seq2seq_nll(g, model, ph, src, tgt))(0, 0));
    tokens += tgt.size();
  }
  return tokens == 0 ? 0.0 : total / static_cast<double>(tokens);
}

// Greedy / fixed-length beam decode of exactly line_len character tokens.
// Specials are banned from selection; ties resolve to the lowest token id.
template <class S>
std::vector<TokenId> generate_line_ids(ModelBundle<S>& model, const PhonologyIds& ph,
                                       const std::vector<TokenId>& src,
                                       const DecodeSpec& spec) {
  const int L = model.meta.line_len;
  const int V = model.vocab_size();
  const Mat<S> memory = encode_source(model, ph, src);
  struct Hyp {
    std::vector<TokenId> tokens;
    double logp = 0.0;
  };
  const int width = spec.strategy == DecodeSpec::Strategy::Greedy ? 1 : spec.beam_width;
  std::vector<Hyp> beam{{{Vocabulary::kBos}, 0.0}};
  for (int step = 0; step < L; ++step) {
    std::vector<Hyp> candidates;
    candidates.reserve(beam.size() * static_cast<std::size_t>(V));
    for (const Hyp& h : beam) {
      auto dist = decode_step(model, ph, h.tokens, memory);
      for (TokenId t = Vocabulary::kNumSpecials; t < V; ++t) {
        Hyp next = h;
        next.tokens.push_back(t);
        next.logp += std::log(std::max(static_cast<double>(dist(0, t)), 1e-300));
        candidates.push_back(std::move(next));
      }
    }
    // stable: ties keep (hypothesis, token id) enumeration order, which
    // makes beam(1) coincide with greedy argmax
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Hyp& a, const Hyp& b) { return a.logp > b.logp; });
    if (static_cast<int>(candidates.size()) > width) candidates.resize(width);
    beam = std::move(candidates);
  }
  return {beam[0].tokens.begin() + 1, beam[0].tokens.end()};
}

template <class S>
std::vector<std::string> generate_line(ModelBundle<S>& model, const Vocabulary& vocab,
                                       const PhonologyIds& ph,
                                       const std::vector<std::string>& source,
                                       const DecodeSpec& spec = {}) {
  require_matching_vocab(model, vocab);
  return vocab.decode(generate_line_ids(model, ph, vocab.encode(source), spec));
}

template <class S>
struct DraftModels {
  ModelBundle<S>* key2one = nullptr;
  ModelBundle<S>* one2one = nullptr;
  ModelBundle<S>* two2one = nullptr;
};

struct DraftRequest {
  std::vector<std::string> keyword;  // non-empty; truncated to L if longer
  DecodeSpec decode = {};
  std::uint64_t seed = 42;           // recorded for provenance; greedy/beam are deterministic
};

// Fig-1 upper path: key -> 1, 1 -> 2, (1,2) -> 3, 3 -> 4.
template <class S>
Poem generate_draft(DraftModels<S> models, const Vocabulary& vocab, const PhonologyIds& ph,
                    std::vector<std::string> keyword, const DecodeSpec& spec = {}) {
  if (keyword.empty()) throw ValidationError("draft generation requires a keyword");
  const int L = models.key2one->meta.line_len;
  if (static_cast<int>(keyword.size()) > L) {
    std::cerr << "[quill] keyword longer than line length, truncating to " << L
              << " characters\n";
    keyword.resize(static_cast<std::size_t>(L));
  }
  for (auto* m : {models.key2one, models.one2one, models.two2one}) {
    require_matching_vocab(*m, vocab);
  }
  Poem poem;
  auto run = [&](ModelBundle<S>& model, const std::vector<std::string>& src,
                 const char* stage) {
    try {
      return generate_line(model, vocab, ph, src, spec);
    } catch (const std::exception& e) {
      throw ValidationError(std::string("draft stage ") + stage + ": " + e.what());
    }
  };
  auto line1 = run(*models.key2one, keyword, "key2one");
  auto line2 = run(*models.one2one, line1, "one2one(1->2)");
  std::vector<std::string> two = line1;
  two.push_back("<sep>");
  two.insert(two.end(), line2.begin(), line2.end());
  auto line3 = run(*models.two2one, two, "two2one");
  auto line4 = run(*models.one2one, line3, "one2one(3->4)");
  poem.lines = {line1, line2, line3, line4};
  return poem;
}

template <class S>
Poem generate_draft(DraftModels<S> models, const Vocabulary& vocab, const PhonologyIds& ph,
                    const DraftRequest& request) {
  return generate_draft(models, vocab, ph, request.keyword, request.decode);
}

// Single-model training over pairs of one kind; gradient accumulation over
// `hyper.batch` samples per optimizer step.
template <class S>
ModelBundle<S> train_seq2seq(const std::vector<Seq2SeqPair>& pairs,
                             const std::vector<Seq2SeqPair>& valid_pairs,
                             const Vocabulary& vocab, const PhonologyLexicon& lex,
                             const TransformerConfig& cfg, ModelKind kind, int line_len,
                             const TrainHyper& hyper, TrainLog* log = nullptr,
                             bool verbose = false) {
  if (pairs.empty()) throw ValidationError("train_seq2seq: no training pairs");
  if (kind == ModelKind::Qamlm) throw ValidationError("train_seq2seq: wrong kind");
  for (const auto& p : pairs) {
    if (static_cast<int>(p.target.size()) != line_len) {
      throw ValidationError("train_seq2seq: target length != L");
    }
  }
  const PhonologyIds ph = PhonologyIds::build(vocab, lex);
  ModelBundle<S> model = init_model<S>(kind, cfg, vocab.size(), line_len, hyper.seed);
  model.meta.vocab_hash = hash_hex(vocab.content_hash());
  model.meta.lexicon_hash = hash_hex(lex.content_hash());
  model.meta.hyper = {{"epochs", static_cast<double>(hyper.epochs)},
                      {"batch", static_cast<double>(hyper.batch)},
                      {"lr", hyper.lr},
                      {"seed", static_cast<double>(hyper.seed)}};

  using IdPair = std::pair<std::vector<TokenId>, std::vector<TokenId>>;
  std::vector<IdPair> data;
  data.reserve(pairs.size());
  for (const auto& p : pairs) data.push_back({vocab.encode(p.source), vocab.encode(p.target)});
  std::vector<IdPair> valid_data;
  for (const auto& p : valid_pairs) {
    valid_data.push_back({vocab.encode(p.source), vocab.encode(p.target)});
  }

  const int batch = std::max(1, hyper.batch);
  const std::int64_t steps_per_epoch =
      static_cast<std::int64_t>((data.size() + static_cast<std::size_t>(batch) - 1) /
                                static_cast<std::size_t>(batch));
  AdamOptimizer<S> opt(model.parameters(), hyper.lr, steps_per_epoch * hyper.epochs);
  std::mt19937_64 rng(hyper.seed ^ 0x5eed5eed5eed5eedull);

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng() % i]);
    }
    double epoch_nll = 0.0;
    std::size_t epoch_tokens = 0;
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(batch)) {
      const std::size_t end = std::min(order.size(), at + static_cast<std::size_t>(batch));
      std::size_t batch_tokens = 0;
      for (std::size_t i = at; i < end; ++i) batch_tokens += data[order[i]].second.size();
      opt.zero_grads();
      for (std::size_t i = at; i < end; ++i) {
        const auto& [src, tgt] = data[order[i]];
        Graph<S> g;
        DropoutCtx drop{model.config.dropout, &rng};
        auto loss = g.scale(seq2seq_nll(g, model, ph, src, tgt, &drop),
                            S(1) / S(batch_tokens));
        epoch_nll += static_cast<double>(g.value(loss)(0, 0)) *
                     static_cast<double>(batch_tokens);
        g.backward(loss);
      }
      opt.step();
      epoch_tokens += batch_tokens;
    }
    model.meta.step = opt.steps_taken();
    TrainLogEntry entry;
    entry.step = model.meta.step;
    entry.total = epoch_tokens > 0 ? epoch_nll / static_cast<double>(epoch_tokens) : 0.0;
    if (!valid_data.empty()) entry.valid = mean_nll(model, ph, valid_data);
    if (log) log->push_back(entry);
    if (verbose) {
      std::cerr << "[train " << model_kind_name(kind) << "] epoch " << epoch + 1 << "/"
                << hyper.epochs << " nll " << entry.total;
      if (!valid_data.empty()) std::cerr << " valid " << entry.valid;
      std::cerr << "\n";
    }
  }
  return model;
}

}  // namespace quill

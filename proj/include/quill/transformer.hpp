#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "quill/graph.hpp"

namespace quill {

struct TransformerConfig {
  int d_model = 128;
  int n_heads = 4;
  int n_enc_layers = 2;
  int n_dec_layers = 2;
  int d_ff = 256;
  int max_len = 32;
  double dropout = 0.1;

  void validate(int line_len) const {
    if (d_model <= 0 || n_heads <= 0 || d_model % n_heads != 0) {
      throw ValidationError("d_model must be a positive multiple of n_heads");
    }
    if (max_len < 4 * line_len + 3) {
      throw ValidationError("max_len must be >= 4*L+3");
    }
    if (dropout < 0.0 || dropout >= 1.0) {
      throw ValidationError("dropout must be in [0, 1)");
    }
  }
};

template <class S>
struct LinearParams {
  Parameter<S> w;  // in x out
  Parameter<S> b;  // 1 x out
};

template <class S>
struct LayerNormParams {
  Parameter<S> gain;  // 1 x d
  Parameter<S> bias;  // 1 x d
};

template <class S>
struct AttentionParams {
  LinearParams<S> q, k, v, o;
};

template <class S>
struct EncoderLayerParams {
  AttentionParams<S> attn;
  LayerNormParams<S> ln1;
  LinearParams<S> ff1, ff2;
  LayerNormParams<S> ln2;
};

template <class S>
struct DecoderLayerParams {
  AttentionParams<S> self_attn;
  LayerNormParams<S> ln1;
  AttentionParams<S> cross_attn;
  LayerNormParams<S> ln2;
  LinearParams<S> ff1, ff2;
  LayerNormParams<S> ln3;
};

// Non-null during training passes; forwards stay deterministic functions of
// (inputs, parameters) when null.
struct DropoutCtx {
  double p = 0.0;
  std::mt19937_64* rng = nullptr;
};

template <class S>
typename Graph<S>::Var linear(Graph<S>& g, typename Graph<S>::Var x, LinearParams<S>& p) {
  return g.add_rowvec(g.matmul(x, g.leaf(p.w)), g.leaf(p.b));
}

template <class S>
typename Graph<S>::Var dropout(Graph<S>& g, typename Graph<S>::Var x, const DropoutCtx* ctx) {
  if (!ctx || ctx->p <= 0.0 || !ctx->rng) return x;
  const Mat<S>& v = g.value(x);
  Mat<S> mask(v.rows(), v.cols());
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const S keep_scale = S(1.0 / (1.0 - ctx->p));
  for (Eigen::Index r = 0; r < mask.rows(); ++r) {
    for (Eigen::Index c = 0; c < mask.cols(); ++c) {
      mask(r, c) = uni(*ctx->rng) < ctx->p ? S(0) : keep_scale;
    }
  }
  return g.cwise_mul_const(x, std::move(mask));
}

// Multi-head scaled dot-product attention. q_in attends over kv_in;
// additive_mask (optional, n_q x n_kv) is added to every head's scores
// before the softmax.
template <class S>
typename Graph<S>::Var attention(Graph<S>& g, typename Graph<S>::Var q_in,
                                 typename Graph<S>::Var kv_in, AttentionParams<S>& p,
                                 int n_heads, const Mat<S>* additive_mask = nullptr) {
  using Var = typename Graph<S>::Var;
  const int d_model = static_cast<int>(g.value(q_in).cols());
  const int d_head = d_model / n_heads;
  Var q = linear(g, q_in, p.q);
  Var k = linear(g, kv_in, p.k);
  Var v = linear(g, kv_in, p.v);
  const S inv_sqrt_dh = S(1) / std::sqrt(S(d_head));
  std::vector<Var> heads;
  heads.reserve(static_cast<std::size_t>(n_heads));
  for (int h = 0; h < n_heads; ++h) {
    Var qh = g.slice_cols(q, h * d_head, d_head);
    Var kh = g.slice_cols(k, h * d_head, d_head);
    Var vh = g.slice_cols(v, h * d_head, d_head);
    Var scores = g.scale(g.matmul(qh, g.transpose(kh)), inv_sqrt_dh);
    if (additive_mask) {
      scores = g.add_const(scores, *additive_mask);
    }
    Var probs = g.softmax_rows(scores);
    heads.push_back(g.matmul(probs, vh));
  }
  return linear(g, g.concat_cols(heads), p.o);
}

template <class S>
typename Graph<S>::Var feed_forward(Graph<S>& g, typename Graph<S>::Var x,
                                    LinearParams<S>& ff1, LinearParams<S>& ff2) {
  return linear(g, g.gelu(linear(g, x, ff1)), ff2);
}

// Post-LN encoder stack; self-attention is bidirectional (no mask).
template <class S>
typename Graph<S>::Var encoder_forward(Graph<S>& g, typename Graph<S>::Var x,
                                       std::vector<EncoderLayerParams<S>>& layers,
                                       int n_heads, const DropoutCtx* drop = nullptr) {
  for (auto& layer : layers) {
    auto attn = dropout(g, attention(g, x, x, layer.attn, n_heads), drop);
    x = g.layer_norm(g.add(x, attn), g.leaf(layer.ln1.gain), g.leaf(layer.ln1.bias));
    auto ff = dropout(g, feed_forward(g, x, layer.ff1, layer.ff2), drop);
    x = g.layer_norm(g.add(x, ff), g.leaf(layer.ln2.gain), g.leaf(layer.ln2.bias));
  }
  return x;
}

template <class S>
Mat<S> causal_mask(Eigen::Index n) {
  Mat<S> m = Mat<S>::Zero(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = r + 1; c < n; ++c) {
      m(r, c) = S(-1e9);
    }
  }
  return m;
}

// Post-LN decoder stack: causal self-attention, cross-attention over the
// encoder memory, feed-forward.
template <class S>
typename Graph<S>::Var decoder_forward(Graph<S>& g, typename Graph<S>::Var x,
                                       typename Graph<S>::Var memory,
                                       std::vector<DecoderLayerParams<S>>& layers,
                                       int n_heads, const DropoutCtx* drop = nullptr) {
  const Mat<S> mask = causal_mask<S>(g.value(x).rows());
  for (auto& layer : layers) {
    auto self_attn = dropout(g, attention(g, x, x, layer.self_attn, n_heads, &mask), drop);
    x = g.layer_norm(g.add(x, self_attn), g.leaf(layer.ln1.gain), g.leaf(layer.ln1.bias));
    auto cross = dropout(g, attention(g, x, memory, layer.cross_attn, n_heads), drop);
    x = g.layer_norm(g.add(x, cross), g.leaf(layer.ln2.gain), g.leaf(layer.ln2.bias));
    auto ff = dropout(g, feed_forward(g, x, layer.ff1, layer.ff2), drop);
    x = g.layer_norm(g.add(x, ff), g.leaf(layer.ln3.gain), g.leaf(layer.ln3.bias));
  }
  return x;
}

}  // namespace quill

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "quill/embedding.hpp"
#include "quill/transformer.hpp"

namespace quill {

enum class ModelKind { Key2One, One2One, Two2One, Qamlm };

std::string_view model_kind_name(ModelKind k);
std::optional<ModelKind> parse_model_kind(std::string_view name);

inline std::string_view model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::Key2One: return "key2one";
    case ModelKind::One2One: return "one2one";
    case ModelKind::Two2One: return "two2one";
    case ModelKind::Qamlm: return "qamlm";
  }
  return "?";
}

inline std::optional<ModelKind> parse_model_kind(std::string_view name) {
  if (name == "key2one") return ModelKind::Key2One;
  if (name == "one2one") return ModelKind::One2One;
  if (name == "two2one") return ModelKind::Two2One;
  if (name == "qamlm") return ModelKind::Qamlm;
  return std::nullopt;
}

struct ModelMeta {
  ModelKind kind = ModelKind::One2One;
  std::string vocab_hash;
  std::string lexicon_hash;
  std::int64_t step = 0;
  int line_len = 7;
  std::map<std::string, double> hyper;  // training settings, for provenance
};

// All learned state for one model. Seq2seq kinds carry decoder layers and
// the LM head; qamlm carries the two task heads instead.
template <class S>
struct ModelBundle {
  TransformerConfig config;
  ModelMeta meta;
  EmbeddingTables<S> tables;
  std::vector<EncoderLayerParams<S>> encoder;
  std::vector<DecoderLayerParams<S>> decoder;
  LinearParams<S> lm_head;        // d -> V
  LinearParams<S> position_head;  // d -> 4L+1
  LinearParams<S> mlm_head;       // d -> V

  int vocab_size() const { return static_cast<int>(tables.token.value.rows()); }
  int qa_classes() const { return static_cast<int>(position_head.w.value.cols()); }
  bool is_seq2seq() const { return meta.kind != ModelKind::Qamlm; }

  // Stable enumeration order; checkpoints and the optimizer both rely
  // on it.
  std::vector<Parameter<S>*> parameters();
  void zero_grads();
};

namespace detail {

template <class S>
void init_normal(Parameter<S>& p, std::string name, Eigen::Index rows, Eigen::Index cols,
                 std::mt19937_64& rng, double sigma) {
  std::normal_distribution<double> dist(0.0, sigma);
  Mat<S> m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = static_cast<S>(dist(rng));
    }
  }
  p = Parameter<S>(std::move(name), std::move(m));
}

template <class S>
void init_const(Parameter<S>& p, std::string name, Eigen::Index rows, Eigen::Index cols,
                S value) {
  p = Parameter<S>(std::move(name), Mat<S>::Constant(rows, cols, value));
}

template <class S>
void init_linear(LinearParams<S>& lin, const std::string& name, Eigen::Index in,
                 Eigen::Index out, std::mt19937_64& rng, double sigma) {
  init_normal(lin.w, name + ".w", in, out, rng, sigma);
  init_const(lin.b, name + ".b", 1, out, S(0));
}

template <class S>
void init_layer_norm(LayerNormParams<S>& ln, const std::string& name, Eigen::Index d) {
  init_const(ln.gain, name + ".gain", 1, d, S(1));
  init_const(ln.bias, name + ".bias", 1, d, S(0));
}

template <class S>
void init_attention(AttentionParams<S>& a, const std::string& name, Eigen::Index d,
                    std::mt19937_64& rng, double sigma) {
  init_linear(a.q, name + ".q", d, d, rng, sigma);
  init_linear(a.k, name + ".k", d, d, rng, sigma);
  init_linear(a.v, name + ".v", d, d, rng, sigma);
  init_linear(a.o, name + ".o", d, d, rng, sigma);
}

}  // namespace detail

// Fresh bundle with scaled-normal weights (sigma 0.02), zero biases, unit
// layer-norm gains.
template <class S>
ModelBundle<S> init_model(ModelKind kind, const TransformerConfig& config, int vocab_size,
                          int line_len, std::uint64_t seed, double sigma = 0.02) {
  config.validate(line_len);
  ModelBundle<S> m;
  m.config = config;
  m.meta.kind = kind;
  m.meta.line_len = line_len;
  std::mt19937_64 rng(seed);
  const Eigen::Index d = config.d_model;
  using detail::init_attention;
  using detail::init_layer_norm;
  using detail::init_linear;
  using detail::init_normal;

  init_normal(m.tables.token, "tables.token", vocab_size, d, rng, sigma);
  init_normal(m.tables.segment, "tables.segment", kSegmentCount, d, rng, sigma);
  init_normal(m.tables.position, "tables.position", config.max_len, d, rng, sigma);
  init_normal(m.tables.tone, "tables.tone", kToneClassCount, d, rng, sigma);
  init_normal(m.tables.rhyme, "tables.rhyme", kRhymeClassCount, d, rng, sigma);

  m.encoder.resize(static_cast<std::size_t>(config.n_enc_layers));
  for (std::size_t i = 0; i < m.encoder.size(); ++i) {
    const std::string base = "enc" + std::to_string(i);
    init_attention(m.encoder[i].attn, base + ".attn", d, rng, sigma);
    init_layer_norm(m.encoder[i].ln1, base + ".ln1", d);
    init_linear(m.encoder[i].ff1, base + ".ff1", d, config.d_ff, rng, sigma);
    init_linear(m.encoder[i].ff2, base + ".ff2", config.d_ff, d, rng, sigma);
    init_layer_norm(m.encoder[i].ln2, base + ".ln2", d);
  }

  if (kind != ModelKind::Qamlm) {
    m.decoder.resize(static_cast<std::size_t>(config.n_dec_layers));
    for (std::size_t i = 0; i < m.decoder.size(); ++i) {
      const std::string base = "dec" + std::to_string(i);
      init_attention(m.decoder[i].self_attn, base + ".self_attn", d, rng, sigma);
      init_layer_norm(m.decoder[i].ln1, base + ".ln1", d);
      init_attention(m.decoder[i].cross_attn, base + ".cross_attn", d, rng, sigma);
      init_layer_norm(m.decoder[i].ln2, base + ".ln2", d);
      init_linear(m.decoder[i].ff1, base + ".ff1", d, config.d_ff, rng, sigma);
      init_linear(m.decoder[i].ff2, base + ".ff2", config.d_ff, d, rng, sigma);
      init_layer_norm(m.decoder[i].ln3, base + ".ln3", d);
    }
    init_linear(m.lm_head, "lm_head", d, vocab_size, rng, sigma);
  } else {
    init_linear(m.position_head, "position_head", d, 4 * line_len + 1, rng, sigma);
    init_linear(m.mlm_head, "mlm_head", d, vocab_size, rng, sigma);
  }
  return m;
}

template <class S>
std::vector<Parameter<S>*> ModelBundle<S>::parameters() {
  std::vector<Parameter<S>*> out;
  auto lin = [&out](LinearParams<S>& l) {
    out.push_back(&l.w);
    out.push_back(&l.b);
  };
  auto ln = [&out](LayerNormParams<S>& l) {
    out.push_back(&l.gain);
    out.push_back(&l.bias);
  };
  auto attn = [&lin](AttentionParams<S>& a) {
    lin(a.q);
    lin(a.k);
    lin(a.v);
    lin(a.o);
  };
  out.push_back(&tables.token);
  out.push_back(&tables.segment);
  out.push_back(&tables.position);
  out.push_back(&tables.tone);
  out.push_back(&tables.rhyme);
  for (auto& layer : encoder) {
    attn(layer.attn);
    ln(layer.ln1);
    lin(layer.ff1);
    lin(layer.ff2);
    ln(layer.ln2);
  }
  for (auto& layer : decoder) {
    attn(layer.self_attn);
    ln(layer.ln1);
    attn(layer.cross_attn);
    ln(layer.ln2);
    lin(layer.ff1);
    lin(layer.ff2);
    ln(layer.ln3);
  }
  if (meta.kind != ModelKind::Qamlm) {
    lin(lm_head);
  } else {
    lin(position_head);
    lin(mlm_head);
  }
  return out;
}

template <class S>
void ModelBundle<S>::zero_grads() {
  for (Parameter<S>* p : parameters()) p->zero_grad();
}

}  // namespace quill

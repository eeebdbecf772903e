#pragma once

#include <cstring>
#include <string>

#include <json.hpp>

#include "quill/corpus.hpp"
#include "quill/io.hpp"
#include "quill/model.hpp"

namespace quill {

inline constexpr char kCheckpointMagic[4] = {'Q', 'L', 'S', 'M'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

namespace detail {

inline void append_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t read_u32(const std::string& buf, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[at + i])) << (8 * i);
  }
  return v;
}

inline nlohmann::json config_to_json(const TransformerConfig& c) {
  return {{"d_model", c.d_model},   {"n_heads", c.n_heads},
          {"n_enc_layers", c.n_enc_layers}, {"n_dec_layers", c.n_dec_layers},
          {"d_ff", c.d_ff},         {"max_len", c.max_len},
          {"dropout", c.dropout}};
}

inline TransformerConfig config_from_json(const nlohmann::json& j) {
  TransformerConfig c;
  c.d_model = j.at("d_model").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.n_enc_layers = j.at("n_enc_layers").get<int>();
  c.n_dec_layers = j.at("n_dec_layers").get<int>();
  c.d_ff = j.at("d_ff").get<int>();
  c.max_len = j.at("max_len").get<int>();
  c.dropout = j.at("dropout").get<double>();
  return c;
}

}  // namespace detail

// Single binary file: magic `QLSM`, u32 version, length-prefixed JSON
// header (config + meta + declared block shapes), then raw little-endian
// f32 blocks in header order, row-major within each block.
template <class S>
void save_checkpoint(ModelBundle<S>& bundle, const std::string& path) {
  for (Parameter<S>* p : bundle.parameters()) {
    if (!p->value.allFinite()) {
      throw ValidationError("refusing to save checkpoint: non-finite values in block '" +
                            p->name + "'");
    }
  }
  nlohmann::json header;
  header["config"] = detail::config_to_json(bundle.config);
  header["meta"] = {{"kind", std::string(model_kind_name(bundle.meta.kind))},
                    {"vocab_hash", bundle.meta.vocab_hash},
                    {"lexicon_hash", bundle.meta.lexicon_hash},
                    {"step", bundle.meta.step},
                    {"line_len", bundle.meta.line_len},
                    {"hyper", bundle.meta.hyper}};
  header["vocab_size"] = bundle.vocab_size();
  auto blocks = nlohmann::json::array();
  for (Parameter<S>* p : bundle.parameters()) {
    blocks.push_back({{"name", p->name},
                      {"rows", p->value.rows()},
                      {"cols", p->value.cols()}});
  }
  header["blocks"] = std::move(blocks);

  std::string buf;
  buf.append(kCheckpointMagic, 4);
  detail::append_u32(buf, kCheckpointVersion);
  const std::string header_text = header.dump();
  detail::append_u32(buf, static_cast<std::uint32_t>(header_text.size()));
  buf += header_text;
  for (Parameter<S>* p : bundle.parameters()) {
    for (Eigen::Index r = 0; r < p->value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) {
        const float f = static_cast<float>(p->value(r, c));
        char bytes[4];
        std::memcpy(bytes, &f, 4);
        buf.append(bytes, 4);
      }
    }
  }
  atomic_write_file(path, buf);
}

template <class S>
ModelBundle<S> load_checkpoint(const std::string& path,
                               const Vocabulary* vocab = nullptr,
                               std::optional<ModelKind> expected_kind = std::nullopt) {
  const std::string buf = read_file(path);
  if (buf.size() < 12 || std::memcmp(buf.data(), kCheckpointMagic, 4) != 0) {
    throw FormatError("checkpoint " + path + ": bad magic");
  }
  const std::uint32_t version = detail::read_u32(buf, 4);
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint " + path + ": unsupported version " +
                      std::to_string(version));
  }
  const std::uint32_t header_len = detail::read_u32(buf, 8);
  if (buf.size() < 12 + static_cast<std::size_t>(header_len)) {
    throw FormatError("checkpoint " + path + ": truncated header");
  }
  nlohmann::json header =
      nlohmann::json::parse(buf.substr(12, header_len), nullptr, false);
  if (header.is_discarded()) {
    throw FormatError("checkpoint " + path + ": corrupt header JSON");
  }

  ModelMeta meta;
  const auto& jm = header.at("meta");
  auto kind = parse_model_kind(jm.at("kind").get<std::string>());
  if (!kind) {
    throw FormatError("checkpoint " + path + ": unknown model kind");
  }
  meta.kind = *kind;
  meta.vocab_hash = jm.at("vocab_hash").get<std::string>();
  meta.lexicon_hash = jm.at("lexicon_hash").get<std::string>();
  meta.step = jm.at("step").get<std::int64_t>();
  meta.line_len = jm.at("line_len").get<int>();
  if (jm.contains("hyper")) {
    meta.hyper = jm.at("hyper").get<std::map<std::string, double>>();
  }

  if (expected_kind && meta.kind != *expected_kind) {
    throw FormatError("checkpoint " + path + ": kind is " +
                      std::string(model_kind_name(meta.kind)) + ", expected " +
                      std::string(model_kind_name(*expected_kind)));
  }
  if (vocab && hash_hex(vocab->content_hash()) != meta.vocab_hash) {
    throw FormatError("checkpoint " + path +
                      ": vocabulary hash mismatch (model was trained on a "
                      "different vocabulary)");
  }

  const TransformerConfig config = detail::config_from_json(header.at("config"));
  const int vocab_size = header.at("vocab_size").get<int>();
  ModelBundle<S> bundle = init_model<S>(meta.kind, config, vocab_size, meta.line_len, 0);
  bundle.meta = meta;

  const auto& jblocks = header.at("blocks");
  auto params = bundle.parameters();
  if (jblocks.size() != params.size()) {
    throw FormatError("checkpoint " + path + ": block count mismatch");
  }
  std::size_t at = 12 + header_len;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& jb = jblocks[i];
    Parameter<S>* p = params[i];
    if (jb.at("name").get<std::string>() != p->name ||
        jb.at("rows").get<Eigen::Index>() != p->value.rows() ||
        jb.at("cols").get<Eigen::Index>() != p->value.cols()) {
      throw FormatError("checkpoint " + path + ": block '" + p->name +
                        "' shape or order mismatch");
    }
    const std::size_t bytes = static_cast<std::size_t>(p->value.size()) * 4;
    if (at + bytes > buf.size()) {
      throw FormatError("checkpoint " + path + ": truncated parameter data");
    }
    for (Eigen::Index r = 0; r < p->value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) {
        float f;
        std::memcpy(&f, buf.data() + at, 4);
        p->value(r, c) = static_cast<S>(f);
        at += 4;
      }
    }
    if (!p->value.allFinite()) {
      throw FormatError("checkpoint " + path + ": non-finite values in block '" +
                        p->name + "'");
    }
  }
  if (at != buf.size()) {
    throw FormatError("checkpoint " + path + ": trailing bytes after parameter data");
  }
  return bundle;
}

}  // namespace quill

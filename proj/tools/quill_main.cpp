// quill: two-stage Chinese quatrain generation — encoder-decoder drafting
// followed by iterative QA-MLM polishing.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "quill/checkpoint.hpp"
#include "quill/io.hpp"
#include "quill/metrics.hpp"
#include "quill/polisher.hpp"
#include "quill/qamlm.hpp"
#include "quill/seq2seq.hpp"
#include "quill/textrank.hpp"
#include "quill/utf8.hpp"

namespace fs = std::filesystem;
using namespace quill;

namespace {

struct RunConfig {
  // paths
  std::string corpus;
  std::string lexicon;
  std::string pattern;
  std::string wordlist;
  std::string out_dir = "out";
  // model
  int d_model = 128;
  int n_heads = 4;
  int n_enc_layers = 2;
  int n_dec_layers = 2;
  int d_ff = 256;
  int max_len = 32;
  double dropout = 0.1;
  int line_len = 7;
  int min_count = 1;
  // training
  int epochs = 50;
  int batch = 16;
  double lr = 1e-3;
  double lambda = 1.0;
  std::uint64_t seed = 42;
  // decoding
  std::string decode = "greedy";
  int beam_width = 4;
  // polishing
  int max_iters = 0;  // 0 -> 2 * 4L
  int oscillation_window = 8;
  // keyword extraction
  int window = 3;
  double damping = 0.85;
  int rank_iters = 50;
  // eval
  int limit = 0;  // 0 -> whole test split
  int dump_corruptions = 0;
  std::string drafts;
  std::string emb_tsv;
  bool no_polish = false;
  bool verbose = false;

  TransformerConfig transformer() const {
    TransformerConfig cfg;
    cfg.d_model = d_model;
    cfg.n_heads = n_heads;
    cfg.n_enc_layers = n_enc_layers;
    cfg.n_dec_layers = n_dec_layers;
    cfg.d_ff = d_ff;
    cfg.max_len = max_len;
    cfg.dropout = dropout;
    return cfg;
  }

  TrainHyper hyper() const { return {epochs, batch, lr, lambda, seed}; }

  DecodeSpec decode_spec() const {
    if (decode == "greedy") return DecodeSpec::greedy();
    if (decode == "beam") return DecodeSpec::beam(beam_width);
    throw ValidationError("decode must be 'greedy' or 'beam'");
  }

  PolishLimits polish_limits() const { return {max_iters, oscillation_window}; }

  std::string artifact(const std::string& name) const {
    return (fs::path(out_dir) / name).string();
  }
};

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) out += t;
  return out;
}

void print_poem(std::ostream& os, const Poem& poem) {
  for (const auto& line : poem.lines) {
    os << "  " << join_tokens(line) << "\n";
  }
}

PhonologyLexicon load_lexicon_or_empty(const RunConfig& cfg) {
  if (cfg.lexicon.empty()) {
    std::cerr << "[quill] no lexicon supplied; tone/rhyme embeddings fall back to None\n";
    PhonologyLexicon empty;
    empty.set_source_id("(none)");
    return empty;
  }
  return PhonologyLexicon::load(cfg.lexicon);
}

int cmd_prepare(const RunConfig& cfg) {
  if (cfg.corpus.empty()) throw ValidationError("prepare: --corpus is required");
  IngestStats stats;
  auto poems = ingest(cfg.corpus, &stats);
  std::size_t dropped_len = 0;
  std::vector<Poem> usable;
  for (auto& p : poems) {
    if (p.line_len() == cfg.line_len) {
      usable.push_back(std::move(p));
    } else {
      ++dropped_len;
    }
  }
  if (usable.empty()) {
    throw ValidationError("prepare: no valid poems in " + cfg.corpus);
  }
  fs::create_directories(cfg.out_dir);
  auto splits = split(usable, cfg.seed);
  auto vocab = Vocabulary::build(splits.train, cfg.min_count);

  write_jsonl(splits.train, cfg.artifact("train.jsonl"));
  write_jsonl(splits.valid, cfg.artifact("valid.jsonl"));
  write_jsonl(splits.test, cfg.artifact("test.jsonl"));
  vocab.save_tsv(cfg.artifact("vocab.tsv"));

  nlohmann::json j;
  j["poems"] = usable.size();
  j["lines"] = usable.size() * 4;
  j["train"] = splits.train.size();
  j["valid"] = splits.valid.size();
  j["test"] = splits.test.size();
  j["vocab_size"] = vocab.size();
  j["seed"] = cfg.seed;
  j["line_len"] = cfg.line_len;
  j["dropped_structural"] = stats.poems_dropped;
  j["dropped_line_len"] = dropped_len;
  j["malformed_lines"] = stats.malformed_lines;
  atomic_write_file(cfg.artifact("stats.json"), j.dump(2) + "\n");

  std::cout << "prepared " << usable.size() << " poems (" << usable.size() * 4
            << " lines) -> " << splits.train.size() << "/" << splits.valid.size() << "/"
            << splits.test.size() << " split, vocab " << vocab.size() << "\n";
  return 0;
}

std::vector<Poem> load_split(const RunConfig& cfg, const std::string& name) {
  const std::string path = cfg.artifact(name);
  if (!fs::exists(path)) {
    throw ValidationError("missing artifact " + path + " (run `quill prepare` first)");
  }
  return ingest(path);
}

KeywordFn keyword_fn_from(const RunConfig& cfg, const Segmenter& seg) {
  return [&cfg, seg](const std::vector<std::vector<std::string>>& lines) {
    return extract_keyword(lines, seg, cfg.window, cfg.damping, cfg.rank_iters);
  };
}

void write_loss_csv(const std::string& path, const TrainLog& log, bool qamlm_columns) {
  std::ostringstream csv;
  csv << (qamlm_columns ? "step,total,loss_m,loss_q\n" : "step,train_nll,valid_nll\n");
  for (const auto& e : log) {
    if (qamlm_columns) {
      csv << e.step << ',' << e.total << ',' << e.loss_m << ',' << e.loss_q << '\n';
    } else {
      csv << e.step << ',' << e.total << ',';
      if (!std::isnan(e.valid)) csv << e.valid;
      csv << '\n';
    }
  }
  atomic_write_file(path, csv.str());
}

int cmd_train(const RunConfig& cfg, const std::string& which) {
  auto kind = parse_model_kind(which);
  if (!kind) {
    throw ValidationError("train: unknown model '" + which +
                          "' (expected key2one|one2one|two2one|qamlm)");
  }
  auto vocab = Vocabulary::load_tsv(cfg.artifact("vocab.tsv"));
  auto train_poems = load_split(cfg, "train.jsonl");
  auto valid_poems = load_split(cfg, "valid.jsonl");
  auto lex = load_lexicon_or_empty(cfg);

  TrainLog log;
  ModelBundle<float> model;
  if (*kind == ModelKind::Qamlm) {
    if (cfg.dump_corruptions > 0) {
      std::mt19937_64 rng(cfg.seed ^ 0xd0d0d0d0ull);
      std::string dump;
      for (int i = 0; i < cfg.dump_corruptions; ++i) {
        const auto& poem = train_poems[static_cast<std::size_t>(i) % train_poems.size()];
        auto s = corrupt(vocab.encode(poem.flat()), rng, vocab);
        dump += corrupted_sample_to_json(s, vocab).dump();
        dump += '\n';
      }
      atomic_write_file(cfg.artifact("corruptions.jsonl"), dump);
    }
    model = train_qamlm<float>(train_poems, vocab, lex, cfg.transformer(), cfg.line_len,
                               cfg.hyper(), &log, cfg.verbose);
  } else {
    const Segmenter seg = load_segmenter(cfg.wordlist);
    const KeywordFn kw = keyword_fn_from(cfg, seg);
    PairKind pk = *kind == ModelKind::Key2One
                      ? PairKind::Key2One
                      : (*kind == ModelKind::One2One ? PairKind::One2One
                                                     : PairKind::Two2One);
    auto pairs = make_pairs(train_poems, pk, kw);
    auto valid_pairs = make_pairs(valid_poems, pk, kw);
    model = train_seq2seq<float>(pairs, valid_pairs, vocab, lex, cfg.transformer(), *kind,
                                 cfg.line_len, cfg.hyper(), &log, cfg.verbose);
  }
  model.meta.lexicon_hash = hash_hex(lex.content_hash());
  save_checkpoint(model, cfg.artifact(which + ".ckpt"));
  write_loss_csv(cfg.artifact(which + "_loss.csv"), log, *kind == ModelKind::Qamlm);
  std::cout << "trained " << which << ": " << model.meta.step << " steps, final loss "
            << (log.empty() ? 0.0 : log.back().total) << " -> "
            << cfg.artifact(which + ".ckpt") << "\n";
  return 0;
}

struct LoadedPipeline {
  Vocabulary vocab;
  PhonologyLexicon lex;
  PhonologyIds ph;
  ModelBundle<float> key2one, one2one, two2one, qamlm;
  bool with_polisher = false;
};

LoadedPipeline load_pipeline(const RunConfig& cfg, bool need_draft, bool need_polish) {
  LoadedPipeline p;
  p.vocab = Vocabulary::load_tsv(cfg.artifact("vocab.tsv"));
  p.lex = load_lexicon_or_empty(cfg);
  p.ph = PhonologyIds::build(p.vocab, p.lex);
  if (need_draft) {
    p.key2one = load_checkpoint<float>(cfg.artifact("key2one.ckpt"), &p.vocab,
                                       ModelKind::Key2One);
    p.one2one = load_checkpoint<float>(cfg.artifact("one2one.ckpt"), &p.vocab,
                                       ModelKind::One2One);
    p.two2one = load_checkpoint<float>(cfg.artifact("two2one.ckpt"), &p.vocab,
                                       ModelKind::Two2One);
  }
  if (need_polish) {
    p.qamlm = load_checkpoint<float>(cfg.artifact("qamlm.ckpt"), &p.vocab, ModelKind::Qamlm);
    p.with_polisher = true;
  }
  return p;
}

void print_trace(std::ostream& os, const PolishTrace& trace) {
  os << "polish trace (" << polish_termination_name(trace.terminated_by) << ", "
     << trace.steps.size() << " steps)\n";
  for (const auto& s : trace.steps) {
    os << "  step " << s.iteration << ": pos " << s.position << "  " << s.old_char
       << " -> " << s.new_char << "\n";
  }
}

int cmd_generate(const RunConfig& cfg, const std::string& keyword) {
  if (keyword.empty()) throw ValidationError("generate: --keyword must be non-empty");
  auto pipeline = load_pipeline(cfg, true, !cfg.no_polish);
  auto keyword_tokens = utf8_chars(keyword);

  DraftModels<float> models{&pipeline.key2one, &pipeline.one2one, &pipeline.two2one};
  Poem draft = generate_draft(models, pipeline.vocab, pipeline.ph, keyword_tokens,
                              cfg.decode_spec());
  std::cout << "keyword: " << keyword << "\ndraft:\n";
  print_poem(std::cout, draft);

  nlohmann::json j;
  j["keyword"] = keyword;
  j["seed"] = cfg.seed;
  auto poem_lines = [](const Poem& poem) {
    std::vector<std::string> lines;
    for (const auto& line : poem.lines) lines.push_back(join_tokens(line));
    return lines;
  };
  j["draft"] = poem_lines(draft);

  if (!cfg.no_polish) {
    auto [polished, trace] = polish_poem(pipeline.qamlm, pipeline.vocab, pipeline.ph,
                                         draft, cfg.polish_limits());
    std::cout << "polished:\n";
    print_poem(std::cout, polished);
    print_trace(std::cout, trace);
    j["polished"] = poem_lines(polished);
    j["trace"] = trace_to_json(trace);
  }
  fs::create_directories(cfg.out_dir);
  atomic_write_file(cfg.artifact("generate.json"), j.dump(2) + "\n");
  return 0;
}

int cmd_polish(const RunConfig& cfg, const std::string& input_path) {
  auto pipeline = load_pipeline(cfg, false, true);
  auto poems = ingest(input_path);
  if (poems.empty()) throw ValidationError("polish: no valid poems in " + input_path);
  fs::create_directories(cfg.out_dir);
  std::string out;
  std::size_t changed = 0;
  for (const auto& poem : poems) {
    if (poem.line_len() != pipeline.qamlm.meta.line_len) {
      throw ValidationError("polish: poem line length does not match the model");
    }
    auto [polished, trace] = polish_poem(pipeline.qamlm, pipeline.vocab, pipeline.ph, poem,
                                         cfg.polish_limits());
    nlohmann::json j;
    auto lines = nlohmann::json::array();
    for (const auto& line : polished.lines) lines.push_back(join_tokens(line));
    j["lines"] = std::move(lines);
    j["trace"] = trace_to_json(trace);
    out += j.dump();
    out += '\n';
    if (!trace.steps.empty()) ++changed;
  }
  const std::string out_path = cfg.artifact("polished.jsonl");
  atomic_write_file(out_path, out);
  std::cout << "polished " << poems.size() << " poems (" << changed << " changed) -> "
            << out_path << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  auto pipeline = load_pipeline(cfg, true, true);
  auto test_poems = load_split(cfg, "test.jsonl");
  if (cfg.limit > 0 && test_poems.size() > static_cast<std::size_t>(cfg.limit)) {
    test_poems.resize(static_cast<std::size_t>(cfg.limit));
  }
  std::vector<Poem> provided_drafts;
  if (!cfg.drafts.empty()) {
    provided_drafts = ingest(cfg.drafts);
    if (provided_drafts.size() < test_poems.size()) {
      test_poems.resize(provided_drafts.size());
    }
  }
  if (test_poems.empty()) throw ValidationError("eval: empty test set");

  // similarity embeddings: external TSV when given, else the polisher's
  // trained token table
  Mat<float> emb = pipeline.qamlm.tables.token.value;
  if (!cfg.emb_tsv.empty()) {
    std::ifstream in(cfg.emb_tsv);
    if (!in) throw ValidationError("cannot open embedding tsv: " + cfg.emb_tsv);
    std::string line;
    std::vector<std::pair<TokenId, std::vector<float>>> rows;
    std::size_t dim = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream ss(line);
      std::string token;
      ss >> token;
      std::vector<float> values;
      float v;
      while (ss >> v) values.push_back(v);
      if (values.empty()) continue;
      dim = std::max(dim, values.size());
      rows.push_back({pipeline.vocab.id_of(token), std::move(values)});
    }
    emb = Mat<float>::Zero(pipeline.vocab.size(), static_cast<Eigen::Index>(dim));
    for (const auto& [id, values] : rows) {
      for (std::size_t c = 0; c < values.size(); ++c) {
        emb(id, static_cast<Eigen::Index>(c)) = values[c];
      }
    }
  }

  const Segmenter seg = load_segmenter(cfg.wordlist);
  DraftModels<float> models{&pipeline.key2one, &pipeline.one2one, &pipeline.two2one};

  struct Accumulator {
    std::array<StageBleu, 4> stages{};
    double sim12 = 0, sim34 = 0, sim2l = 0;
    std::vector<Poem> poems;
  };
  Accumulator draft_acc, polish_acc;
  const DecodeSpec decode_spec = cfg.decode_spec();

  for (std::size_t i = 0; i < test_poems.size(); ++i) {
    const Poem& gold = test_poems[i];
    Poem draft;
    if (!provided_drafts.empty()) {
      draft = provided_drafts[i];
    } else {
      auto keyword = extract_keyword(gold.lines, seg, cfg.window, cfg.damping,
                                     cfg.rank_iters);
      draft = generate_draft(models, pipeline.vocab, pipeline.ph, keyword, decode_spec);
    }
    auto [polished, trace] = polish_poem(pipeline.qamlm, pipeline.vocab, pipeline.ph,
                                         draft, cfg.polish_limits());
    for (auto [acc, poem] : {std::pair<Accumulator*, const Poem*>{&draft_acc, &draft},
                             {&polish_acc, &polished}}) {
      for (int s = 0; s < 4; ++s) {
        acc->stages[static_cast<std::size_t>(s)].bl1 +=
            bleu(poem->lines[static_cast<std::size_t>(s)],
                 gold.lines[static_cast<std::size_t>(s)], 1);
        acc->stages[static_cast<std::size_t>(s)].bl2 +=
            bleu(poem->lines[static_cast<std::size_t>(s)],
                 gold.lines[static_cast<std::size_t>(s)], 2);
      }
      auto sims = poem_similarities(*poem, emb, pipeline.vocab);
      acc->sim12 += sims[0];
      acc->sim34 += sims[1];
      acc->sim2l += sims[2];
      acc->poems.push_back(*poem);
    }
  }

  TonalPattern pattern;
  bool have_pattern = !cfg.pattern.empty();
  if (have_pattern) pattern = TonalPattern::load(cfg.pattern);

  EvalReport report;
  report.n_samples = test_poems.size();
  const double n = static_cast<double>(test_poems.size());
  auto finish = [&](Accumulator& acc, const std::string& name) {
    EvalRow row;
    row.name = name;
    for (int s = 0; s < 4; ++s) {
      row.stages[static_cast<std::size_t>(s)] = {
          acc.stages[static_cast<std::size_t>(s)].bl1 / n,
          acc.stages[static_cast<std::size_t>(s)].bl2 / n};
      row.average.bl1 += row.stages[static_cast<std::size_t>(s)].bl1 / 4.0;
      row.average.bl2 += row.stages[static_cast<std::size_t>(s)].bl2 / 4.0;
    }
    row.sim12 = acc.sim12 / n;
    row.sim34 = acc.sim34 / n;
    row.sim2l = acc.sim2l / n;
    if (have_pattern) {
      row.tone_acc = tone_accuracy(acc.poems, pipeline.lex, pattern);
      row.rhyme_acc = rhyme_accuracy(acc.poems, pipeline.lex, pattern);
    } else {
      row.tone_acc = std::numeric_limits<double>::quiet_NaN();
      row.rhyme_acc = std::numeric_limits<double>::quiet_NaN();
    }
    report.rows.push_back(std::move(row));
  };
  finish(draft_acc, "quill");
  finish(polish_acc, "quill-P");

  fs::create_directories(cfg.out_dir);
  atomic_write_file(cfg.artifact("eval.json"), report.to_json().dump(2) + "\n");
  atomic_write_file(cfg.artifact("eval.txt"), report.to_table());
  std::cout << report.to_table();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quill: quatrain drafting with iterative QA-MLM polishing"};
  app.fallthrough();
  RunConfig cfg;

  app.set_config("--config", "", "configuration file (key = value lines)");
  app.add_option("--corpus", cfg.corpus, "corpus file (JSONL or | separated text)");
  app.add_option("--lexicon", cfg.lexicon, "tone/rhyme lexicon TSV");
  app.add_option("--pattern", cfg.pattern, "tonal pattern JSON");
  app.add_option("--wordlist", cfg.wordlist, "segmenter word list");
  app.add_option("--out-dir", cfg.out_dir, "artifact directory");
  app.add_option("--d-model", cfg.d_model, "model width");
  app.add_option("--n-heads", cfg.n_heads, "attention heads");
  app.add_option("--enc-layers", cfg.n_enc_layers, "encoder layers");
  app.add_option("--dec-layers", cfg.n_dec_layers, "decoder layers");
  app.add_option("--d-ff", cfg.d_ff, "feed-forward width");
  app.add_option("--max-len", cfg.max_len, "maximum sequence length");
  app.add_option("--dropout", cfg.dropout, "dropout probability");
  app.add_option("--line-len", cfg.line_len, "characters per poem line (5 or 7)");
  app.add_option("--min-count", cfg.min_count, "vocabulary frequency threshold");
  app.add_option("--epochs", cfg.epochs, "training epochs");
  app.add_option("--batch", cfg.batch, "batch size");
  app.add_option("--lr", cfg.lr, "learning rate");
  app.add_option("--lambda", cfg.lambda, "position-loss weight (qamlm)");
  app.add_option("--seed", cfg.seed, "random seed")->envname("QUILL_SEED");
  app.add_option("--decode", cfg.decode, "decoding strategy: greedy|beam");
  app.add_option("--beam-width", cfg.beam_width, "beam width (<= 8)");
  app.add_option("--max-iters", cfg.max_iters, "polish iteration cap (0 = 2*4L)");
  app.add_option("--oscillation-window", cfg.oscillation_window,
                 "repeated-state window for the polish guard");
  app.add_option("--window", cfg.window, "keyword co-occurrence window");
  app.add_option("--damping", cfg.damping, "keyword rank damping");
  app.add_option("--rank-iters", cfg.rank_iters, "keyword rank iterations");
  app.add_flag("--verbose", cfg.verbose, "log per-epoch losses");

  auto* prepare = app.add_subcommand("prepare", "filter corpus, build vocab and splits");
  auto* train = app.add_subcommand("train", "train one model");
  std::string which;
  train->add_option("which", which, "key2one|one2one|two2one|qamlm")->required();
  train->add_option("--dump-corruptions", cfg.dump_corruptions,
                    "write N corruption samples to corruptions.jsonl before training");
  auto* generate = app.add_subcommand("generate", "draft and polish one poem");
  std::string keyword;
  generate->add_option("--keyword", keyword, "topic keyword")->required();
  generate->add_flag("--no-polish", cfg.no_polish, "emit the draft only");
  auto* polish_cmd = app.add_subcommand("polish", "polish poems from a file");
  std::string polish_in;
  polish_cmd->add_option("--in", polish_in, "input poems (JSONL)")->required();
  auto* eval = app.add_subcommand("eval", "score drafts and polished poems");
  eval->add_option("--drafts", cfg.drafts, "externally generated drafts (JSONL)");
  eval->add_option("--limit", cfg.limit, "cap the number of test poems");
  eval->add_option("--emb-tsv", cfg.emb_tsv, "external similarity embeddings");

  app.require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (prepare->parsed()) return cmd_prepare(cfg);
    if (train->parsed()) return cmd_train(cfg, which);
    if (generate->parsed()) return cmd_generate(cfg, keyword);
    if (polish_cmd->parsed()) return cmd_polish(cfg, polish_in);
    if (eval->parsed()) return cmd_eval(cfg);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

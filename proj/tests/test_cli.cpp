#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "quill/checkpoint.hpp"
#include "quill/io.hpp"
#include "quill/utf8.hpp"
#include "test_util.hpp"

#ifndef QUILL_BIN_PATH
#define QUILL_BIN_PATH "quill"
#endif

using namespace quill;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("cli");

namespace {

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / ("quill_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

int run(const std::string& args) {
  const std::string cmd = std::string(QUILL_BIN_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

void write_tiny_corpus(const std::string& path, int poems = 24) {
  auto ps = testutil::synthetic_poems(poems, 7, 31415, 18);
  write_jsonl(ps, path);
}

std::string tiny_flags(const Workspace& ws) {
  return " --out-dir " + ws.path("out") +
         " --d-model 16 --n-heads 2 --enc-layers 1 --dec-layers 1 --d-ff 32"
         " --epochs 2 --batch 4 --lr 0.001 --seed 42 --dropout 0.1";
}

}  // namespace

TEST_CASE("prepare is deterministic and reports an error corpus correctly") {
  Workspace ws;
  write_tiny_corpus(ws.path("corpus.jsonl"));
  const std::string base =
      "prepare --corpus " + ws.path("corpus.jsonl") + " --out-dir " + ws.path("out") +
      " --seed 42";
  REQUIRE(run(base) == 0);
  for (const char* f : {"train.jsonl", "valid.jsonl", "test.jsonl", "vocab.tsv",
                        "stats.json"}) {
    CHECK(fs::exists(ws.path("out") / fs::path(f)));
  }
  auto snapshot = [&] {
    std::map<std::string, std::string> bytes;
    for (const char* f : {"train.jsonl", "valid.jsonl", "test.jsonl", "vocab.tsv",
                          "stats.json"}) {
      bytes[f] = read_file((ws.path("out") / fs::path(f)).string());
    }
    return bytes;
  };
  auto first = snapshot();
  REQUIRE(run(base) == 0);
  CHECK(first == snapshot());

  SUBCASE("zero valid poems exits 2") {
    std::ofstream bad(ws.path("bad.jsonl"));
    bad << "{\"id\": \"x\", \"lines\": [\"abc\", \"de\"]}\n";
    bad.close();
    CHECK(run("prepare --corpus " + ws.path("bad.jsonl") + " --out-dir " +
              ws.path("out2")) == 2);
  }
  SUBCASE("missing corpus exits 2") {
    CHECK(run("prepare --corpus " + ws.path("nope.jsonl") + " --out-dir " +
              ws.path("out3")) == 2);
  }
}

TEST_CASE("train writes checkpoint + loss csv deterministically; records hyper") {
  Workspace ws;
  write_tiny_corpus(ws.path("corpus.jsonl"));
  REQUIRE(run("prepare --corpus " + ws.path("corpus.jsonl") + " --out-dir " +
              ws.path("out") + " --seed 42") == 0);

  const std::string flags = tiny_flags(ws);
  REQUIRE(run("train one2one" + flags) == 0);
  CHECK(fs::exists(ws.path("out") / fs::path("one2one.ckpt")));
  CHECK(fs::exists(ws.path("out") / fs::path("one2one_loss.csv")));
  const std::string bytes1 = read_file((ws.path("out") / fs::path("one2one.ckpt")).string());
  REQUIRE(run("train one2one" + flags) == 0);
  CHECK(bytes1 == read_file((ws.path("out") / fs::path("one2one.ckpt")).string()));

  SUBCASE("lambda is recorded in qamlm checkpoint meta") {
    REQUIRE(run("train qamlm" + flags + " --lambda 0") == 0);
    auto model =
        load_checkpoint<float>((ws.path("out") / fs::path("qamlm.ckpt")).string());
    REQUIRE(model.meta.hyper.count("lambda") == 1);
    CHECK(model.meta.hyper.at("lambda") == 0.0);
  }
  SUBCASE("unknown model name exits 2") { CHECK(run("train nonesuch" + flags) == 2); }
  SUBCASE("missing artifacts exit 2") {
    CHECK(run("train one2one --out-dir " + ws.path("elsewhere")) == 2);
  }
}

TEST_CASE("generate / polish / eval round trip on a tiny pipeline") {
  Workspace ws;
  write_tiny_corpus(ws.path("corpus.jsonl"));
  const std::string flags = tiny_flags(ws);
  REQUIRE(run("prepare --corpus " + ws.path("corpus.jsonl") + " --out-dir " +
              ws.path("out") + " --seed 42") == 0);
  for (const char* which : {"key2one", "one2one", "two2one", "qamlm"}) {
    REQUIRE(run(std::string("train ") + which + flags) == 0);
  }

  SUBCASE("generate: determinism, structure, --no-polish, empty keyword") {
    REQUIRE(run("generate --keyword ab" + flags) == 0);
    const std::string out_path = (ws.path("out") / fs::path("generate.json")).string();
    auto j1 = nlohmann::json::parse(read_file(out_path));
    CHECK(j1["draft"].size() == 4);
    for (const auto& line : j1["draft"]) {
      CHECK(utf8_length(line.get<std::string>()) == 7);
    }
    CHECK(j1.contains("polished"));
    CHECK(j1["polished"].size() == 4);
    CHECK(j1.contains("trace"));
    const std::string bytes1 = read_file(out_path);
    REQUIRE(run("generate --keyword ab" + flags) == 0);
    CHECK(bytes1 == read_file(out_path));

    REQUIRE(run("generate --keyword ab --no-polish" + flags) == 0);
    auto j2 = nlohmann::json::parse(read_file(out_path));
    CHECK_FALSE(j2.contains("polished"));
    CHECK_FALSE(j2.contains("trace"));

    CHECK(run("generate --keyword \"\"" + flags) == 2);
  }

  SUBCASE("polish consumes a poem file and emits traces") {
    REQUIRE(run("polish --in " + (ws.path("out") / fs::path("test.jsonl")).string() +
                flags) == 0);
    const std::string polished =
        read_file((ws.path("out") / fs::path("polished.jsonl")).string());
    std::istringstream lines(polished);
    std::string line;
    std::size_t rows = 0;
    while (std::getline(lines, line)) {
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line);
      CHECK(j["lines"].size() == 4);
      CHECK(j["trace"].contains("terminated_by"));
      ++rows;
    }
    CHECK(rows == 1);  // 24 poems -> 22/1/1 split
  }

  SUBCASE("eval emits matching json and text reports, honors --limit") {
    REQUIRE(run("eval --limit 1" + flags) == 0);
    auto j = nlohmann::json::parse(read_file((ws.path("out") / fs::path("eval.json")).string()));
    CHECK(j["n_samples"].get<int>() == 1);
    REQUIRE(j["rows"].size() == 2);
    CHECK(j["rows"][0]["model"] == "quill");
    CHECK(j["rows"][1]["model"] == "quill-P");
    const std::string table = read_file((ws.path("out") / fs::path("eval.txt")).string());
    // the table carries the same numbers, to table precision
    char expect[16];
    std::snprintf(expect, sizeof(expect), "%6.3f", j["rows"][0]["sim12"].get<double>());
    CHECK(table.find(expect) != std::string::npos);

    const std::string j1 = read_file((ws.path("out") / fs::path("eval.json")).string());
    REQUIRE(run("eval --limit 1" + flags) == 0);
    CHECK(j1 == read_file((ws.path("out") / fs::path("eval.json")).string()));
  }

  SUBCASE("eval --drafts scores externally generated drafts") {
    write_jsonl(testutil::synthetic_poems(1, 7, 777, 18), ws.path("drafts.jsonl"));
    REQUIRE(run("eval --drafts " + ws.path("drafts.jsonl") + flags) == 0);
    auto j = nlohmann::json::parse(read_file((ws.path("out") / fs::path("eval.json")).string()));
    CHECK(j["n_samples"].get<int>() == 1);
  }
}

TEST_CASE("QUILL_SEED environment variable overrides the seed") {
  Workspace ws;
  write_tiny_corpus(ws.path("corpus.jsonl"));
  const std::string base = "prepare --corpus " + ws.path("corpus.jsonl") + " --out-dir " +
                           ws.path("out");
  const std::string cmd = std::string("QUILL_SEED=99 ") + QUILL_BIN_PATH + " " + base +
                          " >/dev/null 2>&1";
  REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  auto stats = nlohmann::json::parse(read_file((ws.path("out") / fs::path("stats.json")).string()));
  CHECK(stats["seed"].get<int>() == 99);
}

TEST_SUITE_END();

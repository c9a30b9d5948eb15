#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "dictdis/cli.hpp"
#include "dictdis/data_io.hpp"
#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("dictdis_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

struct RunOutcome {
  int code = 0;
  std::string err;
};

RunOutcome run_cli(const std::vector<std::string>& args) {
  std::ostringstream captured;
  std::streambuf* old = std::cerr.rdbuf(captured.rdbuf());
  RunOutcome out;
  out.code = dictdis::cli::run(args);
  std::cerr.rdbuf(old);
  out.err = captured.str();
  return out;
}

std::string slurp(const std::string& path) { return dictdis::read_file(path); }

void spit(const std::string& path, const std::string& content) {
  dictdis::write_file(path, content);
}

std::size_t line_count(const std::string& text) {
  std::size_t n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

// Small model so CLI-driven training stays fast.
std::string tiny_config_json() {
  json j;
  j["model"] = {{"d_model", 16},      {"n_heads", 2},    {"n_layers", 1},
                {"d_ffn", 32},        {"max_aug_len", 64}, {"max_tgt_len", 16},
                {"max_segments", 8},  {"p_offset", 16},  {"gate_hidden", 16},
                {"dropout", 0.1}};
  j["train"] = {{"lr_peak", 0.002}, {"warmup_steps", 10}, {"batch_size", 8},
                {"max_updates", 10}, {"checkpoint_every", 5}, {"log_every", 2}};
  j["decode"] = {{"beam_size", 1}, {"max_len", 8}};
  return j.dump(2);
}

void write_toy_corpus(const TempDir& dir) {
  spit(dir / "train.src", "aa k bb ee\ncc k dd ee\naa dd k ff\nbb cc ee ff\nk aa bb cc\ncc dd aa bb\n");
  spit(dir / "train.tgt", "xx q yy ee\nzz q ww ee\nxx ww q ff\nyy zz ee ff\nq xx yy zz\nzz ww xx yy\n");
  spit(dir / "dict.tsv", "k\tq\naa\txx\n");
}

}  // namespace

TEST_CASE("unknown subcommands and empty invocations are usage errors") {
  RunOutcome none = run_cli({});
  CHECK(none.code == 2);
  CHECK(none.err.substr(0, 12) == "error:usage:");

  RunOutcome bad = run_cli({"frobnicate"});
  CHECK(bad.code == 2);
  CHECK(bad.err.substr(0, 12) == "error:usage:");

  // single line, machine-parsable category
  std::regex shape("^error:(usage|io|format|config|state|numeric): [^\n]+\n$");
  CHECK(std::regex_match(bad.err, shape));
}

TEST_CASE("missing input files are io errors") {
  TempDir dir;
  RunOutcome r = run_cli({"stats", "--dict", dir / "nope.tsv", "--src", dir / "nope.txt"});
  CHECK(r.code == 1);
  CHECK(r.err.substr(0, 9) == "error:io:");
}

TEST_CASE("malformed dictionaries are format errors with a line number") {
  TempDir dir;
  spit(dir / "bad.tsv", "word without tab\n");
  spit(dir / "src.txt", "a b\n");
  RunOutcome r = run_cli({"stats", "--dict", dir / "bad.tsv", "--src", dir / "src.txt"});
  CHECK(r.code == 1);
  CHECK(r.err.substr(0, 13) == "error:format:");
  CHECK(r.err.find("line 1") != std::string::npos);
}

TEST_CASE("make-synthetic writes the seven corpus files deterministically") {
  TempDir a, b;
  std::vector<std::string> args{"make-synthetic", "--task", "copy", "--train", "30",
                                "--dev", "5", "--test", "5", "--seed", "9"};
  auto run_into = [&](const TempDir& dir) {
    auto full = args;
    full.push_back("--out");
    full.push_back(dir / "data");
    CHECK(run_cli(full).code == 0);
  };
  run_into(a);
  run_into(b);
  for (const char* name : {"train.src", "train.tgt", "dev.src", "dev.tgt", "test.src",
                           "test.tgt", "dict.tsv"}) {
    std::string fa = slurp(a / ("data/" + std::string(name)));
    CHECK(fa == slurp(b / ("data/" + std::string(name))));
    CHECK(!fa.empty());
  }
  CHECK(line_count(slurp(a / "data/train.src")) == 30);
  CHECK(line_count(slurp(a / "data/test.tgt")) == 5);
}

TEST_CASE("prepare emits vocabulary, records, and stats") {
  TempDir dir;
  write_toy_corpus(dir);
  spit(dir / "cfg.json", tiny_config_json());
  std::vector<std::string> args{"prepare", "--config", dir / "cfg.json",
                                "--src",   dir / "train.src", "--tgt", dir / "train.tgt",
                                "--dict",  dir / "dict.tsv",  "--out", dir / "prep"};
  REQUIRE(run_cli(args).code == 0);

  std::string jsonl = slurp(dir / "prep/train.jsonl");
  CHECK(line_count(jsonl) == 6);
  auto stats = json::parse(slurp(dir / "prep/prepare_stats.json"));
  CHECK(stats.at("sentences").get<int>() == 6);
  CHECK(stats.at("constraint_coverage_percent").get<double>() > 0.0);
  std::string vocab = slurp(dir / "prep/vocab.txt");
  CHECK(vocab.find("<pad>") == 0);
  CHECK(vocab.find("\nk\n") != std::string::npos);
  CHECK(vocab.find("\nq\n") != std::string::npos);  // dictionary targets included

  // byte-identical on rerun
  TempDir dir2;
  write_toy_corpus(dir2);
  spit(dir2 / "cfg.json", tiny_config_json());
  std::vector<std::string> args2{"prepare", "--config", dir2 / "cfg.json",
                                 "--src",   dir2 / "train.src", "--tgt", dir2 / "train.tgt",
                                 "--dict",  dir2 / "dict.tsv",  "--out", dir2 / "prep"};
  REQUIRE(run_cli(args2).code == 0);
  CHECK(slurp(dir2 / "prep/train.jsonl") == jsonl);
  CHECK(slurp(dir2 / "prep/vocab.txt") == vocab);
}

TEST_CASE("prepare reports zero coverage when nothing matches") {
  TempDir dir;
  write_toy_corpus(dir);
  spit(dir / "dict.tsv", "zzz\tqqq\n");
  spit(dir / "cfg.json", tiny_config_json());
  REQUIRE(run_cli({"prepare", "--config", dir / "cfg.json", "--src", dir / "train.src",
                   "--tgt", dir / "train.tgt", "--dict", dir / "dict.tsv", "--out",
                   dir / "prep"})
              .code == 0);
  auto stats = json::parse(slurp(dir / "prep/prepare_stats.json"));
  CHECK(stats.at("constraint_coverage_percent").get<double>() == 0.0);
  for (const auto& ex : dictdis::examples_from_jsonl(slurp(dir / "prep/train.jsonl")))
    CHECK(ex.constraints.empty());
}

TEST_CASE("mismatched corpus sides fail with a format error") {
  TempDir dir;
  spit(dir / "a.src", "one\ntwo\n");
  spit(dir / "a.tgt", "eins\n");
  spit(dir / "d.tsv", "one\teins\n");
  spit(dir / "cfg.json", tiny_config_json());
  RunOutcome r = run_cli({"prepare", "--config", dir / "cfg.json", "--src", dir / "a.src",
                          "--tgt", dir / "a.tgt", "--dict", dir / "d.tsv", "--out",
                          dir / "p"});
  CHECK(r.code == 1);
  CHECK(r.err.substr(0, 13) == "error:format:");
}

TEST_CASE("stats writes the dictionary report") {
  TempDir dir;
  write_toy_corpus(dir);
  REQUIRE(run_cli({"stats", "--dict", dir / "dict.tsv", "--src", dir / "train.src",
                   "--out", dir / "stats.json"})
              .code == 0);
  auto j = json::parse(slurp(dir / "stats.json"));
  CHECK(j.at("total_entries").get<int>() == 2);
  CHECK(j.at("coverage_percent").get<double>() > 0.0);
  CHECK(j.at("polysemy_histogram").contains("1"));
}

TEST_CASE("train, translate, and evaluate chain together") {
  TempDir dir;
  write_toy_corpus(dir);
  spit(dir / "cfg.json", tiny_config_json());

  REQUIRE(run_cli({"train", "--config", dir / "cfg.json", "--src", dir / "train.src",
                   "--tgt", dir / "train.tgt", "--dict", dir / "dict.tsv", "--out",
                   dir / "run", "--seed", "3"})
              .code == 0);
  CHECK(fs::exists(dir / "run/checkpoint.ckpt"));
  CHECK(fs::exists(dir / "run/vocab.txt"));

  std::string log = slurp(dir / "run/train_log.jsonl");
  CHECK(line_count(log) >= 5);  // every 2 steps over 10 updates
  std::istringstream ls(log);
  std::string line;
  std::size_t last_step = 0;
  while (std::getline(ls, line)) {
    auto j = json::parse(line);
    CHECK(j.contains("loss"));
    CHECK(j.contains("lr"));
    last_step = j.at("step").get<std::size_t>();
  }
  CHECK(last_step == 10);

  REQUIRE(run_cli({"translate", "--config", dir / "cfg.json", "--ckpt",
                   dir / "run/checkpoint.ckpt", "--vocab", dir / "run/vocab.txt", "--src",
                   dir / "train.src", "--dict", dir / "dict.tsv", "--out", dir / "hyp.txt",
                   "--trace", dir / "trace.jsonl"})
              .code == 0);
  CHECK(line_count(slurp(dir / "hyp.txt")) == 6);
  std::istringstream ts(slurp(dir / "trace.jsonl"));
  std::size_t traces = 0;
  while (std::getline(ts, line)) {
    auto j = json::parse(line);
    CHECK(j.contains("score"));
    CHECK(j.at("tokens").is_array());
    ++traces;
  }
  CHECK(traces == 6);

  // identical invocation, identical bytes
  REQUIRE(run_cli({"translate", "--config", dir / "cfg.json", "--ckpt",
                   dir / "run/checkpoint.ckpt", "--vocab", dir / "run/vocab.txt", "--src",
                   dir / "train.src", "--dict", dir / "dict.tsv", "--out", dir / "hyp2.txt"})
              .code == 0);
  CHECK(slurp(dir / "hyp2.txt") == slurp(dir / "hyp.txt"));

  // unconstrained mode and beam width flags are accepted
  REQUIRE(run_cli({"translate", "--config", dir / "cfg.json", "--ckpt",
                   dir / "run/checkpoint.ckpt", "--vocab", dir / "run/vocab.txt", "--src",
                   dir / "train.src", "--out", dir / "hyp_u.txt", "--unconstrained",
                   "--beam", "2"})
              .code == 0);
  CHECK(line_count(slurp(dir / "hyp_u.txt")) == 6);

  // evaluating the references against themselves is a perfect score
  REQUIRE(run_cli({"evaluate", "--hyp", dir / "train.tgt", "--ref", dir / "train.tgt",
                   "--src", dir / "train.src", "--dict", dir / "dict.tsv", "--out",
                   dir / "report.json"})
              .code == 0);
  auto rep = json::parse(slurp(dir / "report.json"));
  CHECK(rep.at("bleu").get<double>() == doctest::Approx(100.0));
  CHECK(rep.at("csr").get<double>() == doctest::Approx(100.0));
  CHECK(!rep.contains("bootstrap"));

  // two-system mode adds the significance block
  REQUIRE(run_cli({"evaluate", "--hyp", dir / "train.tgt", "--ref", dir / "train.tgt",
                   "--hyp-b", dir / "hyp.txt", "--src", dir / "train.src", "--dict",
                   dir / "dict.tsv", "--resamples", "200", "--out", dir / "report2.json"})
              .code == 0);
  auto rep2 = json::parse(slurp(dir / "report2.json"));
  CHECK(rep2.at("bootstrap").contains("p_value"));

  // aligned-file validation names the offender
  spit(dir / "short.txt", "one line\n");
  RunOutcome bad = run_cli({"evaluate", "--hyp", dir / "short.txt", "--ref",
                            dir / "train.tgt"});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("error:") == 0);
}

TEST_CASE("training is resumable and deterministic through the cli") {
  TempDir dir;
  write_toy_corpus(dir);
  spit(dir / "cfg.json", tiny_config_json());

  // one uninterrupted 10-step run
  REQUIRE(run_cli({"train", "--config", dir / "cfg.json", "--src", dir / "train.src",
                   "--tgt", dir / "train.tgt", "--dict", dir / "dict.tsv", "--out",
                   dir / "full", "--seed", "5", "--deterministic"})
              .code == 0);

  // the same run split across two processes at the checkpoint boundary
  REQUIRE(run_cli({"train", "--config", dir / "cfg.json", "--src", dir / "train.src",
                   "--tgt", dir / "train.tgt", "--dict", dir / "dict.tsv", "--out",
                   dir / "half", "--seed", "5", "--deterministic", "--max-updates", "5"})
              .code == 0);
  REQUIRE(run_cli({"train", "--config", dir / "cfg.json", "--src", dir / "train.src",
                   "--tgt", dir / "train.tgt", "--dict", dir / "dict.tsv", "--out",
                   dir / "half", "--seed", "5", "--deterministic", "--ckpt",
                   dir / "half/checkpoint.ckpt"})
              .code == 0);

  CHECK(slurp(dir / "half/checkpoint.ckpt") == slurp(dir / "full/checkpoint.ckpt"));
}

TEST_CASE("config flags override file values") {
  TempDir dir;
  write_toy_corpus(dir);
  spit(dir / "cfg.json", tiny_config_json());  // max_updates 10 in the file
  REQUIRE(run_cli({"train", "--config", dir / "cfg.json", "--src", dir / "train.src",
                   "--tgt", dir / "train.tgt", "--dict", dir / "dict.tsv", "--out",
                   dir / "run", "--max-updates", "4"})
              .code == 0);
  std::istringstream ls(slurp(dir / "run/train_log.jsonl"));
  std::string line, last;
  while (std::getline(ls, line)) last = line;
  CHECK(json::parse(last).at("step").get<int>() == 4);
}

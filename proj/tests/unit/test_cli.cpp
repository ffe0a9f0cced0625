#include <gtest/gtest.h>

#include <algorithm>

#include <json.hpp>
#include <sstream>

#include "cli.hpp"
#include "ptalign/dist.hpp"
#include "test_util.hpp"

namespace ptalign {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::TempDir;
using testing::read_file;
using testing::write_file;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "ptalign");
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

const fs::path kGolden = PTALIGN_GOLDEN_DIR;

std::string golden(const std::string& name) { return (kGolden / name).string(); }

TEST(CliTest, UsageErrors) {
  EXPECT_EQ(run_cli({}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"frobnicate"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"tokenize", "--vocab", "x", "--bogus", "1"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"tokenize"}).code, cli::kExitUsage);
  const auto help = run_cli({"--help"});
  EXPECT_EQ(help.code, cli::kExitOk);
  EXPECT_NE(help.out.find("align"), std::string::npos);
}

TEST(CliTest, DataErrors) {
  TempDir dir;
  const auto r = run_cli({"tokenize", "--vocab", (dir / "missing.json").string(), "--text", "a"});
  EXPECT_EQ(r.code, cli::kExitData);
  EXPECT_NE(r.err.find("error:"), std::string::npos);

  write_file(dir / "bad.jsonl", "{not json}\n");
  const auto d = run_cli({"diag", "--fused", (dir / "bad.jsonl").string(), "--target",
                          (dir / "bad.jsonl").string(), "--vocab", golden("vocab_char.json")});
  EXPECT_EQ(d.code, cli::kExitData);
  EXPECT_NE(d.err.find("line 1"), std::string::npos);

  const auto t = run_cli({"tokenize", "--vocab", golden("vocab_char.json"), "--text", "ab1"});
  EXPECT_EQ(t.code, cli::kExitData);
  EXPECT_NE(t.err.find("position 2"), std::string::npos);
}

TEST(CliTest, Tokenize) {
  const auto r = run_cli({"tokenize", "--vocab", golden("vocab_bigram.json"), "--text", "the"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = json::parse(r.out);
  EXPECT_EQ(doc["vocab"], "bigram");
  std::string joined;
  for (const auto& t : doc["texts"]) joined += t.get<std::string>();
  EXPECT_EQ(joined, "the");
  const auto manifest = json::parse(r.err);
  EXPECT_EQ(manifest["subcommand"], "tokenize");
}

TEST(CliTest, Pair) {
  const auto r = run_cli({"pair", "--src-vocab", golden("vocab_bigram.json"), "--tgt-vocab",
                          golden("vocab_char.json"), "--text", "abc"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = json::parse(r.out);
  EXPECT_EQ(doc["tgt"]["ids"].size(), 3u);
  std::size_t covered = 0;
  for (const auto& g : doc["groups"]) covered += g["tgt"].size();
  EXPECT_EQ(covered, 3u);
}

TEST(CliTest, Sinkhorn) {
  TempDir dir;
  write_file(dir / "inst.json", R"({"cost": [[0, 1], [1, 0]], "a": [0.5, 0.5], "b": [0.5, 0.5]})");
  const auto r = run_cli({"sinkhorn", "--input", (dir / "inst.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = json::parse(r.out);
  EXPECT_TRUE(doc["converged"].get<bool>());
  EXPECT_LE(doc["marginal_error"].get<double>(), 1e-5);
  EXPECT_GT(doc["plan"][0][0].get<double>(), doc["plan"][0][1].get<double>());

  write_file(dir / "bad.json", R"({"cost": [[0, 1], [1, 0]], "a": [0.5, 0.6], "b": [0.5, 0.5]})");
  EXPECT_EQ(run_cli({"sinkhorn", "--input", (dir / "bad.json").string()}).code, cli::kExitData);
  write_file(dir / "ragged.json", R"({"cost": [[0, 1], [1]], "a": [0.5, 0.5], "b": [0.5, 0.5]})");
  EXPECT_EQ(run_cli({"sinkhorn", "--input", (dir / "ragged.json").string()}).code, cli::kExitData);
}

TEST(CliTest, LossOfMatrixWithItself) {
  const auto r = run_cli({"loss", "--pred", golden("target.jsonl"), "--fused", golden("target.jsonl"),
                          "--discrepancy", "kl", "--lambda", "0.5"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = json::parse(r.out);
  EXPECT_LE(std::abs(doc["fusion"].get<double>()), 1e-12);
  EXPECT_NEAR(doc["combined"].get<double>(), 0.5 * doc["clm"].get<double>(), 1e-12);
}

TEST(CliTest, TrainToyWritesTrace) {
  TempDir dir;
  const auto r = run_cli({"train-toy", "--vocab", golden("vocab_char.json"), "--corpus",
                          golden("target.jsonl"), "--fused", golden("fused_ot.jsonl"), "--heldout",
                          golden("heldout.jsonl"), "--epochs", "5", "--out",
                          (dir / "trace.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = read_file(dir / "trace.csv");
  EXPECT_EQ(csv.rfind("epoch,clm,fusion,combined\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
  const auto summary = json::parse(r.out);
  EXPECT_TRUE(summary.contains("heldout_clm"));

  EXPECT_EQ(run_cli({"train-toy", "--vocab", golden("vocab_char.json"), "--corpus",
                     golden("target.jsonl"), "--out", (dir / "t.csv").string()})
                .code,
            cli::kExitData);
}

TEST(CliTest, Diag) {
  const auto r = run_cli({"diag", "--fused", golden("fused_ot.jsonl"), "--target", golden("target.jsonl"),
                          "--embedding", golden("embedding.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "step,compactness_fused,compactness_target,center_distance");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  std::size_t steps = 0;
  for (const auto& m : read_matrices(fs::path(golden("target.jsonl")))) steps += m.size();
  EXPECT_EQ(rows, steps);
  EXPECT_EQ(run_cli({"diag", "--fused", golden("fused_ot.jsonl"), "--target", golden("target.jsonl")}).code,
            cli::kExitData);
}

std::vector<std::string> fixture_files() {
  return {"vocab_char.json", "vocab_bigram.json", "corpus_train.txt", "corpus_heldout.txt", "source.jsonl",
          "source2.jsonl",   "target.jsonl",      "heldout.jsonl",    "embedding.json"};
}

TEST(CliTest, FixturesAreDeterministic) {
  TempDir a;
  TempDir b;
  ASSERT_EQ(run_cli({"fixtures", "--seed", "7", "--out", a.path().string()}).code, 0);
  ASSERT_EQ(run_cli({"fixtures", "--seed", "7", "--out", b.path().string()}).code, 0);
  for (const auto& f : fixture_files()) {
    EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
    EXPECT_EQ(read_file(a / f), read_file(kGolden / f)) << f;
  }
}

TEST(CliTest, FixtureSeedsShareSchema) {
  TempDir a;
  ASSERT_EQ(run_cli({"fixtures", "--seed", "11", "--top-k", "5", "--out", a.path().string()}).code, 0);
  for (const auto& f : fixture_files()) EXPECT_TRUE(fs::exists(a / f)) << f;
  EXPECT_NE(read_file(a / "source.jsonl"), read_file(kGolden / "source.jsonl"));
  EXPECT_EQ(read_file(a / "vocab_char.json"), read_file(kGolden / "vocab_char.json"));
  for (const auto* name : {"source.jsonl", "source2.jsonl", "target.jsonl"}) {
    for (const auto& m : read_matrices(a / name)) {
      for (const auto& step : m.steps) EXPECT_LE(step.size(), 5u);
    }
  }
}

TEST(CliTest, AlignReproducesGolden) {
  TempDir dir;
  const auto r = run_cli({"align", "--src", golden("source.jsonl"), "--src-vocab", golden("vocab_bigram.json"),
                          "--tgt", golden("target.jsonl"), "--tgt-vocab", golden("vocab_char.json"),
                          "--strategy", "ot", "--out", (dir / "fused.jsonl").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_file(dir / "fused.jsonl"), read_file(kGolden / "fused_ot.jsonl"));
  const auto stats = json::parse(r.out);
  EXPECT_EQ(stats["unconverged_steps"], 0);
  EXPECT_GT(stats["one_to_one_groups"].get<std::size_t>(), 0u);
  const auto manifest = json::parse(r.err);
  EXPECT_EQ(manifest["config"]["strategy"], "ot");
}

TEST(CliTest, AlignTwoSources) {
  TempDir dir;
  const auto r = run_cli({"align", "--src", golden("source.jsonl"), "--src-vocab", golden("vocab_bigram.json"),
                          "--src", golden("source2.jsonl"), "--src-vocab", golden("vocab_bigram.json"),
                          "--tgt", golden("target.jsonl"), "--tgt-vocab", golden("vocab_char.json"),
                          "--fusion", "avgce", "--out", (dir / "fused.jsonl").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_matrices(dir / "fused.jsonl").size(), read_matrices(kGolden / "target.jsonl").size());
  EXPECT_EQ(json::parse(r.err)["config"]["fusion"]["fusion"], "avgce");

  const auto bad = run_cli({"align", "--src", golden("source.jsonl"), "--src-vocab", golden("vocab_bigram.json"),
                            "--src", golden("source2.jsonl"), "--tgt", golden("target.jsonl"), "--tgt-vocab",
                            golden("vocab_char.json"), "--out", (dir / "x.jsonl").string()});
  EXPECT_EQ(bad.code, cli::kExitData);
}

}  // namespace
}  // namespace ptalign

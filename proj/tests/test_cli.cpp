#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#ifndef NSM_CLI_PATH
#error "NSM_CLI_PATH must name the CLI binary"
#endif

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string output;
};

fs::path work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "nsm_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Result run(const std::string& args) {
  const auto log = work_dir() / "last_output.txt";
  const std::string cmd = std::string(NSM_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::ostringstream s;
  s << in.rdbuf();
  r.output = s.str();
  return r;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) n += !line.empty();
  return n;
}

// A 50-question benchmark shared by the training tests.
const fs::path& fixture() {
  static const fs::path dir = [] {
    auto d = work_dir() / "bench50";
    auto r = run("gen-data --out " + d.string() + " --seed 3 --entities 80 --properties 12 --questions 50");
    EXPECT_EQ(r.code, 0) << r.output;
    return d;
  }();
  return dir;
}

const std::string kQuick =
    " --word-dim 8 --hidden-dim 12 --dropout 0.1 --lr 0.005 --n-ml 3 --stage1-iterations 2 --n-rl 2"
    " --beam-ml 8 --beam-rl 3 --eval-beam 3 --epochs 2 --batch-size 8";

std::string train_args(const std::string& out, const std::string& extra = "") {
  return "train --data " + fixture().string() + " --out " + (work_dir() / out).string() + kQuick + extra;
}

// The trained run used by eval and inspect.
const fs::path& trained() {
  static const fs::path dir = [] {
    auto r = run(train_args("trained"));
    EXPECT_EQ(r.code, 0) << r.output;
    return work_dir() / "trained";
  }();
  return dir;
}

}  // namespace

TEST(Cli, NoArgumentsIsAUsageError) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
}

TEST(Cli, HelpSucceeds) {
  auto r = run("train --help");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.output.find("--n-rl"), std::string::npos);
}

TEST(GenData, MissingOutIsAUsageError) {
  auto r = run("gen-data --seed 7");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("--out"), std::string::npos);
}

TEST(GenData, SameSeedIdenticalDirectories) {
  auto a = work_dir() / "gen_a";
  auto b = work_dir() / "gen_b";
  ASSERT_EQ(run("gen-data --seed 7 --out " + a.string()).code, 0);
  ASSERT_EQ(run("gen-data --seed 7 --out " + b.string()).code, 0);
  for (const char* f : {"kb.tsv", "lexicon.tsv", "train.jsonl", "valid.jsonl", "test.jsonl", "spec.json"}) {
    EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
    EXPECT_FALSE(read_file(a / f).empty()) << f;
  }
  auto spec = nlohmann::json::parse(read_file(a / "spec.json"));
  EXPECT_EQ(spec["seed"], 7);
}

TEST(GenData, SmallKbRowBound) {
  auto d = work_dir() / "gen_small";
  auto r = run("gen-data --entities 10 --properties 3 --questions 5 --out " + d.string());
  if (r.code == 0) {
    EXPECT_LE(count_lines(d / "kb.tsv"), 10u * 3u * 3u);
  } else {
    EXPECT_EQ(r.code, 2) << r.output;
  }
}

TEST(GenData, BadNumbersAreUsageErrors) {
  EXPECT_EQ(run("gen-data --entities 0 --out " + (work_dir() / "x").string()).code, 1);
  EXPECT_EQ(run("gen-data --entities many --out " + (work_dir() / "x").string()).code, 1);
}

TEST(Train, WritesLogCheckpointsAndMetrics) {
  const auto& dir = trained();
  EXPECT_EQ(count_lines(dir / "train_log.jsonl"), 5u);
  for (const char* phase : {"ml", "rl", "final"}) {
    EXPECT_TRUE(fs::exists(dir / "checkpoints" / phase / "model.json")) << phase;
    EXPECT_TRUE(fs::exists(dir / "checkpoints" / phase / "cache.jsonl")) << phase;
  }
  auto metrics = nlohmann::json::parse(read_file(dir / "metrics.json"));
  EXPECT_TRUE(metrics["valid"].contains("avg_f1"));
  auto config = nlohmann::json::parse(read_file(dir / "config.json"));
  EXPECT_EQ(config["n_rl"], 2);
  std::ifstream log(dir / "train_log.jsonl");
  std::string line;
  while (std::getline(log, line)) {
    auto j = nlohmann::json::parse(line);
    for (const char* key : {"iteration", "phase", "train_f1", "valid_f1", "cache_coverage", "lr"}) {
      EXPECT_TRUE(j.contains(key)) << key;
    }
  }
}

TEST(Train, SameSeedIdenticalLogs) {
  trained();
  ASSERT_EQ(run(train_args("trained_again")).code, 0);
  EXPECT_EQ(read_file(trained() / "train_log.jsonl"), read_file(work_dir() / "trained_again" / "train_log.jsonl"));
  EXPECT_EQ(read_file(trained() / "checkpoints" / "final" / "model.json"),
            read_file(work_dir() / "trained_again" / "checkpoints" / "final" / "model.json"));
}

TEST(Train, FourWorkersMatchOne) {
  trained();
  ASSERT_EQ(run(train_args("workers4", " --workers 4")).code, 0);
  const auto w4 = work_dir() / "workers4";
  EXPECT_EQ(read_file(trained() / "train_log.jsonl"), read_file(w4 / "train_log.jsonl"));
  EXPECT_EQ(read_file(trained() / "checkpoints" / "final" / "model.json"),
            read_file(w4 / "checkpoints" / "final" / "model.json"));
  auto m1 = nlohmann::json::parse(read_file(trained() / "metrics.json"));
  auto m4 = nlohmann::json::parse(read_file(w4 / "metrics.json"));
  EXPECT_EQ(m1["valid"], m4["valid"]);
  EXPECT_EQ(m1["pseudo_gold_train_f1"], m4["pseudo_gold_train_f1"]);
}

TEST(Train, ImlOnlyStopsAfterIterativeMl) {
  ASSERT_EQ(run(train_args("iml", " --mode iml-only")).code, 0);
  const auto dir = work_dir() / "iml";
  EXPECT_EQ(count_lines(dir / "train_log.jsonl"), 3u);
  EXPECT_FALSE(fs::exists(dir / "checkpoints" / "rl"));
  EXPECT_EQ(read_file(dir / "checkpoints" / "final" / "model.json"),
            read_file(dir / "checkpoints" / "ml" / "model.json"));
}

TEST(Train, ZeroAlphaMatchesPlainReinforceWithEmptyCache) {
  ASSERT_EQ(run(train_args("plain", " --mode reinforce")).code, 0);
  const auto dir = work_dir() / "plain";
  EXPECT_EQ(count_lines(dir / "train_log.jsonl"), 2u);
  ASSERT_EQ(run(train_args("alpha0", " --alpha 0 --n-ml 0")).code, 0);
  EXPECT_EQ(read_file(dir / "train_log.jsonl"), read_file(work_dir() / "alpha0" / "train_log.jsonl"));
}

TEST(Train, ResumeAfterIterativeMl) {
  trained();
  const auto dir = work_dir() / "resumed";
  fs::remove_all(dir);
  fs::copy(trained(), dir, fs::copy_options::recursive);
  fs::remove_all(dir / "checkpoints" / "final");
  fs::remove_all(dir / "checkpoints" / "rl");
  auto r = run(train_args("resumed", " --resume"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("resuming"), std::string::npos);
  EXPECT_EQ(read_file(trained() / "train_log.jsonl"), read_file(dir / "train_log.jsonl"));
  EXPECT_EQ(read_file(trained() / "checkpoints" / "final" / "model.json"),
            read_file(dir / "checkpoints" / "final" / "model.json"));
  auto again = run(train_args("resumed", " --resume"));
  EXPECT_EQ(again.code, 0);
  EXPECT_NE(again.output.find("already complete"), std::string::npos);
}

TEST(Train, ConfigFileWithFlagPrecedence) {
  const auto cfg = work_dir() / "run.ini";
  std::ofstream(cfg) << "# quick run\nalpha = 0.25\nn_rl = 1\nmode = iml-only\nseed = 9\n";
  ASSERT_EQ(run(train_args("configured", " --mode augmented --config " + cfg.string())).code, 0);
  auto config = nlohmann::json::parse(read_file(work_dir() / "configured" / "config.json"));
  EXPECT_EQ(config["alpha"], 0.25);
  EXPECT_EQ(config["n_rl"], 2);
  EXPECT_EQ(config["seed"], 9);
  EXPECT_EQ(config["mode"], "augmented");
  std::ofstream(work_dir() / "bad.ini") << "no equals sign\n";
  EXPECT_EQ(run(train_args("bad", " --config " + (work_dir() / "bad.ini").string())).code, 1);
}

TEST(Train, MissingBenchmarkIsARuntimeError) {
  EXPECT_EQ(run("train --data /nonexistent --out " + (work_dir() / "nobench").string()).code, 2);
  EXPECT_EQ(run("train --out " + (work_dir() / "nodata").string()).code, 1);
}

TEST(Eval, ReportsAreDeterministicPerSplit) {
  const auto model = (trained() / "checkpoints" / "final").string();
  const auto base = "eval --data " + fixture().string() + " --model " + model;
  ASSERT_EQ(run(base + " --split valid --out " + (work_dir() / "eval1").string()).code, 0);
  ASSERT_EQ(run(base + " --split valid --out " + (work_dir() / "eval2").string()).code, 0);
  ASSERT_EQ(run(base + " --split test --out " + (work_dir() / "eval1").string()).code, 0);
  EXPECT_EQ(read_file(work_dir() / "eval1" / "report_valid.json"), read_file(work_dir() / "eval2" / "report_valid.json"));
  EXPECT_EQ(read_file(work_dir() / "eval1" / "beams_valid.jsonl"), read_file(work_dir() / "eval2" / "beams_valid.jsonl"));
  EXPECT_EQ(count_lines(work_dir() / "eval1" / "per_question_valid.jsonl"), count_lines(fixture() / "valid.jsonl"));
  EXPECT_EQ(count_lines(work_dir() / "eval1" / "per_question_test.jsonl"), count_lines(fixture() / "test.jsonl"));
  auto beam = nlohmann::json::parse(read_file(work_dir() / "eval1" / "beams_valid.jsonl").substr(0, read_file(work_dir() / "eval1" / "beams_valid.jsonl").find('\n')));
  EXPECT_TRUE(beam.contains("question_id"));
  EXPECT_TRUE(beam["programs"][0].contains("log_prob"));
  EXPECT_NE(read_file(work_dir() / "eval1" / "report_valid.txt").find("avg F1"), std::string::npos);
}

TEST(Eval, MissingCheckpointIsARuntimeError) {
  auto r = run("eval --data " + fixture().string() + " --model /nonexistent --out " + (work_dir() / "e").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("checkpoint"), std::string::npos);
}

TEST(Inspect, ShowsBeamValuesAndValidSets) {
  const auto model = (trained() / "checkpoints" / "final").string();
  std::ifstream in(fixture() / "valid.jsonl");
  std::string first;
  std::getline(in, first);
  const auto id = nlohmann::json::parse(first)["id"].get<std::string>();
  auto r = run("inspect --data " + fixture().string() + " --model " + model + " --beam 4 --id " + id);
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("anonymized:"), std::string::npos);
  EXPECT_NE(r.output.find("R1 = ("), std::string::npos);
  EXPECT_NE(r.output.find("    step 0 valid {"), std::string::npos) << r.output;
  // Beam listed best first.
  std::regex lp("#\\d+ log_prob (-?[0-9.]+)");
  std::vector<double> scores;
  for (std::sregex_iterator it(r.output.begin(), r.output.end(), lp), end; it != end; ++it) {
    scores.push_back(std::stod((*it)[1]));
  }
  ASSERT_FALSE(scores.empty());
  for (std::size_t i = 1; i < scores.size(); ++i) EXPECT_GE(scores[i - 1], scores[i]);
  if (r.output.find("( Hop") != std::string::npos) {
    EXPECT_NE(r.output.find(") => R"), std::string::npos);
  }
}

TEST(Inspect, UnknownIdAndFreeText) {
  const auto model = (trained() / "checkpoints" / "final").string();
  const auto base = "inspect --data " + fixture().string() + " --model " + model;
  EXPECT_EQ(run(base + " --id nosuch").code, 2);
  EXPECT_EQ(run(base).code, 1);
  auto r = run(base + " --question 'what is the weather' --trace false");
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(r.output.find("step 0"), std::string::npos);
}

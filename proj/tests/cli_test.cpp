#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "test_support.hpp"

namespace hybridtn {
namespace {

using testing::TempDir;

struct Run {
  int status = -1;
  std::string out;
};

// Runs the CLI with `args`; stderr is merged into the captured output.
Run cli(const std::string& args) {
  const std::string cmd = std::string(HYBRIDTN_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int st = pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

void write(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

// Small shared artifacts: a corpus, a quick config and a trained checkpoint.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir();
    write(file("config.json"),
          R"({"window": 16, "heads": 2, "d_model": 16, "d_ff": 16, "epochs": 3, "batch_size": 16, "seed": 3})");
    ASSERT_EQ(cli("gen-corpus --n 600 --seed 4 --out " + file("corpus.jsonl")).status, 0);
    const auto r = cli("train --corpus " + file("corpus.jsonl") + " --config " + file("config.json") +
                       " --out " + file("model.ckpt"));
    train_output_ = new std::string(r.out);
    ASSERT_EQ(r.status, 0) << r.out;
  }
  static void TearDownTestSuite() {
    delete dir_;
    delete train_output_;
  }
  static std::string file(const std::string& name) { return dir_->file(name); }

  static TempDir* dir_;
  static std::string* train_output_;
};

TempDir* CliTest::dir_ = nullptr;
std::string* CliTest::train_output_ = nullptr;

TEST_F(CliTest, GenCorpusIsDeterministic) {
  ASSERT_EQ(cli("gen-corpus --n 50 --seed 9 --out " + file("a.jsonl")).status, 0);
  ASSERT_EQ(cli("gen-corpus --n 50 --seed 9 --out " + file("b.jsonl")).status, 0);
  ASSERT_EQ(cli("gen-corpus --n 50 --seed 10 --out " + file("c.jsonl")).status, 0);
  EXPECT_EQ(slurp(file("a.jsonl")), slurp(file("b.jsonl")));
  EXPECT_NE(slurp(file("a.jsonl")), slurp(file("c.jsonl")));
  const auto corpus = load_corpus(file("a.jsonl"), testing::labels());
  EXPECT_EQ(corpus.size(), 50u);
}

TEST_F(CliTest, GoldenOutputCarriesReferences) {
  ASSERT_EQ(cli("gen-corpus --n 20 --seed 2 --clauses 3 --golden --out " + file("g.jsonl")).status, 0);
  for (const auto& line : lines_of(slurp(file("g.jsonl")))) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("reference"));
  }
}

TEST_F(CliTest, TrainPrintsEpochsAndCheckpointIsReproducible) {
  for (int e = 1; e <= 3; ++e) {
    EXPECT_NE(train_output_->find("epoch " + std::to_string(e) + "  loss"), std::string::npos) << *train_output_;
  }
  EXPECT_NE(train_output_->find("test accuracy"), std::string::npos);
  const auto r = cli("train --corpus " + file("corpus.jsonl") + " --config " + file("config.json") + " --out " +
                     file("again.ckpt"));
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(slurp(file("model.ckpt")), slurp(file("again.ckpt")));
}

TEST_F(CliTest, ClassifyPrintsOneRecordPerNsw) {
  const auto r = cli("classify --model " + file("model.ckpt") + " --text '增长了10%，共有200人'");
  ASSERT_EQ(r.status, 0) << r.out;
  const auto lines = lines_of(r.out);
  ASSERT_EQ(lines.size(), 2u);
  const auto first = nlohmann::json::parse(lines[0]);
  EXPECT_EQ(first["surface"], "10%");
  EXPECT_EQ(first["label"], "B_Percent");  // the only legal label
  const auto second = nlohmann::json::parse(lines[1]);
  EXPECT_EQ(second["surface"], "200");
  double sum = 0;
  for (const auto& [k, v] : second["probabilities"].items()) sum += v.get<double>();
  EXPECT_NEAR(sum, 1.0, 1e-9);
}

TEST_F(CliTest, NormalizeWithoutNswEchoesInput) {
  write(file("plain.txt"), "今天天气很好。\n我们去公园散步\n");
  const auto r = cli("normalize --model " + file("model.ckpt") + " --in " + file("plain.txt"));
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(r.out, "今天天气很好。\n我们去公园散步\n");
}

TEST_F(CliTest, RulesOnlyMatchesTheRuleEngine) {
  const auto corpus = load_corpus(file("corpus.jsonl"), testing::labels());
  std::string input, expected;
  const HybridSystem sys(testing::labels(), testing::default_rules(),
                         load_priority_list(testing::data_path("priority.txt")));
  for (std::size_t i = 0; i < 100; ++i) {
    input += to_utf8(corpus[i].text) + "\n";
    expected += to_utf8(normalize_rule_based(sys.rules(), sys.reader(), corpus[i].text).text) + "\n";
  }
  write(file("in.txt"), input);
  const auto r = cli("normalize --rules-only --in " + file("in.txt") + " --out " + file("out.txt"));
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(slurp(file("out.txt")), expected);
}

TEST_F(CliTest, TraceFileHasOneRecordPerNsw) {
  write(file("doc.txt"), "比赛10:30开始，比分是30-10。请拨打911\n没有数字\n共有200人\n");
  const auto r = cli("normalize --model " + file("model.ckpt") + " --in " + file("doc.txt") + " --out " +
                     file("doc.out") + " --trace " + file("trace.jsonl"));
  ASSERT_EQ(r.status, 0) << r.out;
  const auto records = lines_of(slurp(file("trace.jsonl")));
  ASSERT_EQ(records.size(), 4u);
  const auto last = nlohmann::json::parse(records[3]);
  EXPECT_EQ(last["line"], 3);
  EXPECT_EQ(last["surface"], "200");
  const auto priority = nlohmann::json::parse(records[2]);
  EXPECT_EQ(priority["route"], "priority_rule");
  EXPECT_EQ(priority["sfw"], "九幺幺");
  EXPECT_EQ(lines_of(slurp(file("doc.out"))).size(), 3u);
}

TEST_F(CliTest, EvaluatePrintsBothSystems) {
  ASSERT_EQ(cli("gen-corpus --n 40 --seed 8 --clauses 2 --golden --out " + file("golden.jsonl")).status, 0);
  const auto r = cli("evaluate --golden " + file("golden.jsonl") + " --model " + file("model.ckpt"));
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_NE(r.out.find("hybrid sentence accuracy"), std::string::npos);
  EXPECT_NE(r.out.find("rules-only sentence accuracy"), std::string::npos);
}

TEST_F(CliTest, AblateIsDeterministic) {
  write(file("grid.json"), R"({"base": {"window": 12, "heads": 2, "d_model": 8, "d_ff": 8, "epochs": 1},
    "rows": [{"name": "baseline"}, {"name": "pad-0", "overrides": {"pad_id": 0}},
             {"name": "no-mask", "overrides": {"use_mask": false}}]})");
  const std::string args = "ablate --grid " + file("grid.json") + " --corpus " + file("corpus.jsonl") + " --seed 5";
  const auto a = cli(args + " --json " + file("a.json"));
  const auto b = cli(args + " --json " + file("b.json"));
  ASSERT_EQ(a.status, 0) << a.out;
  EXPECT_EQ(slurp(file("a.json")), slurp(file("b.json")));
  EXPECT_EQ(lines_of(slurp(file("a.json"))).size(), 3u);
  for (const char* row : {"baseline", "pad-0", "no-mask"}) EXPECT_NE(a.out.find(row), std::string::npos);
}

TEST(CliErrors, DiagnosticsAndExitCodes) {
  TempDir dir;
  auto r = cli("train --corpus /nonexistent/corpus.jsonl --out " + dir.file("m.ckpt"));
  EXPECT_NE(r.status, 0);
  EXPECT_FALSE(r.out.empty());
  r = cli("frobnicate");
  EXPECT_NE(r.status, 0);
  r = cli("");
  EXPECT_NE(r.status, 0);
  write(dir.file("bad.jsonl"), "{\"text\": \"abc\", \"spans\": [[0, 9, \"B_Percent\"]]}\n");
  r = cli("train --corpus " + dir.file("bad.jsonl") + " --out " + dir.file("m.ckpt"));
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.out.find("error:"), std::string::npos) << r.out;
  write(dir.file("junk.ckpt"), "not a checkpoint");
  write(dir.file("in.txt"), "共有200人\n");
  r = cli("normalize --model " + dir.file("junk.ckpt") + " --in " + dir.file("in.txt"));
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.out.find("error:"), std::string::npos) << r.out;
  r = cli("normalize --in " + dir.file("in.txt"));
  EXPECT_NE(r.status, 0);
  write(dir.file("cfg.json"), R"({"heads": 7})");
  ASSERT_EQ(cli("gen-corpus --n 20 --out " + dir.file("c.jsonl")).status, 0);
  r = cli("train --corpus " + dir.file("c.jsonl") + " --config " + dir.file("cfg.json") + " --out " + dir.file("m.ckpt"));
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.out.find("error:"), std::string::npos) << r.out;
}

}  // namespace
}  // namespace hybridtn

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"

namespace fs = std::filesystem;
using namespace setrank;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "setrank");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string strip_seconds(const std::string& log) {
  std::istringstream in(log);
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + '\n';
  return out;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("setrank_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto r = run({"synth", "--out-dir", (dir / "data").string(), "--set", "synth_train_queries=30", "--set",
                  "synth_valid_queries=10", "--set", "synth_test_queries=10", "--set", "synth_ranking_noise=0.1"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  void TearDown() override { fs::remove_all(dir); }

  std::string data(const std::string& name) const { return (dir / "data" / name).string(); }

  std::vector<std::string> train_args(const std::string& out, bool ordinal = true) const {
    std::vector<std::string> a{"train", "--train", data("train.txt"), "--valid", data("valid.txt"),
                               "--out-dir", (dir / out).string(), "--set", "epochs=3", "--set",
                               "embed_dim=8", "--set", "heads=2", "--set", "blocks=2"};
    if (ordinal) {
      for (const char* s : {"train:train.init0.txt", "valid:valid.init0.txt"}) {
        const std::string spec = s;
        const auto colon = spec.find(':');
        a.push_back("--init-scores");
        a.push_back(spec.substr(0, colon + 1) + data(spec.substr(colon + 1)));
      }
    }
    return a;
  }

  fs::path dir;
};

}  // namespace

TEST_F(CliTest, TrainWritesArtifacts) {
  auto r = run(train_args("run"));
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"model.ckpt", "train_log.csv", "config.resolved.txt"})
    EXPECT_TRUE(fs::exists(dir / "run" / f)) << f;
  const std::string log = slurp(dir / "run" / "train_log.csv");
  EXPECT_EQ(log.substr(0, log.find('\n')), "epoch,mean_loss,valid_ndcg10,seconds");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 4);
  const Model m = load_checkpoint((dir / "run" / "model.ckpt").string());
  EXPECT_TRUE(m.config.use_ordinal);
  EXPECT_EQ(m.config.ranking_sources, 1u);
  EXPECT_EQ(m.config.n_max, 40u);
}

TEST_F(CliTest, TrainIsDeterministic) {
  ASSERT_EQ(run(train_args("a")).code, 0);
  ASSERT_EQ(run(train_args("b")).code, 0);
  EXPECT_EQ(slurp(dir / "a" / "model.ckpt"), slurp(dir / "b" / "model.ckpt"));
  EXPECT_EQ(strip_seconds(slurp(dir / "a" / "train_log.csv")),
            strip_seconds(slurp(dir / "b" / "train_log.csv")));
}

TEST_F(CliTest, ResolvedConfigReplaysTheRun) {
  ASSERT_EQ(run(train_args("a")).code, 0);
  auto r = run({"train", "--config", (dir / "a" / "config.resolved.txt").string(), "--out-dir",
                (dir / "b").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(dir / "a" / "model.ckpt"), slurp(dir / "b" / "model.ckpt"));
}

TEST_F(CliTest, SeedChangesTheModel) {
  ASSERT_EQ(run(train_args("a")).code, 0);
  auto args = train_args("b");
  args.insert(args.end(), {"--seed", "2"});
  ASSERT_EQ(run(args).code, 0);
  EXPECT_NE(slurp(dir / "a" / "model.ckpt"), slurp(dir / "b" / "model.ckpt"));
}

TEST_F(CliTest, EvalIsRepeatableAndWritesMetrics) {
  ASSERT_EQ(run(train_args("run")).code, 0);
  const std::vector<std::string> args{"eval", "--checkpoint", (dir / "run" / "model.ckpt").string(), "--test",
                                      data("test.txt"), "--init-scores", data("test.init0.txt"), "--out-dir",
                                      (dir / "ev").string()};
  auto a = run(args), b = run(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  const std::string csv = slurp(dir / "ev" / "metrics.csv");
  EXPECT_EQ(csv, a.out);
  for (const char* key : {"ndcg@1,", "ndcg@3,", "ndcg@5,", "ndcg@10,", "queries,10", "excluded,0"})
    EXPECT_NE(csv.find(key), std::string::npos) << key;
}

TEST_F(CliTest, ScoreEmitsOneLinePerDocumentInFileOrder) {
  ASSERT_EQ(run(train_args("run", false)).code, 0);
  const std::string ckpt = (dir / "run" / "model.ckpt").string();
  auto r = run({"score", "--checkpoint", ckpt, "--test", data("test.txt")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 200);

  // Reversing the file reverses the scores: scoring is per query set, not per position.
  std::istringstream in(slurp(data("test.txt")));
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  std::ofstream rev(dir / "rev.txt");
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) rev << *it << '\n';
  rev.close();
  auto r2 = run({"score", "--checkpoint", ckpt, "--test", (dir / "rev.txt").string()});
  ASSERT_EQ(r2.code, 0);
  auto split = [](const std::string& text) {
    std::vector<std::string> v;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) v.push_back(l);
    return v;
  };
  const auto s1 = split(r.out);
  auto s2 = split(r2.out);
  std::reverse(s2.begin(), s2.end());
  ASSERT_EQ(s1.size(), s2.size());
  for (std::size_t i = 0; i < s1.size(); ++i) EXPECT_NEAR(std::stod(s1[i]), std::stod(s2[i]), 1e-7);

  EXPECT_EQ(run({"score", "--checkpoint", ckpt, "--test", data("test.txt"), "--max-docs", "5"}).code, 1);
}

TEST_F(CliTest, PerfectDatasetEvaluatesToOne) {
  // One relevant document per query, flagged by the only feature.
  std::ofstream f(dir / "easy.txt");
  for (int q = 0; q < 40; ++q)
    for (int d = 0; d < 5; ++d) f << (d == q % 5 ? 1 : 0) << " qid:" << q << " 1:" << (d == q % 5 ? 1.0 : 0.0) << '\n';
  f.close();
  auto args = std::vector<std::string>{"train", "--train", (dir / "easy.txt").string(), "--valid",
                                       (dir / "easy.txt").string(), "--out-dir", (dir / "easy").string(),
                                       "--set", "epochs=30", "--set", "embed_dim=8", "--set", "heads=2",
                                       "--set", "blocks=1"};
  ASSERT_EQ(run(args).code, 0);
  auto r = run({"eval", "--checkpoint", (dir / "easy" / "model.ckpt").string(), "--test", (dir / "easy.txt").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("ndcg@1,1.000000"), std::string::npos) << r.out;
}

TEST_F(CliTest, PerturbSweepLeavesPlainModelFlat) {
  ASSERT_EQ(run(train_args("plain", false)).code, 0);
  ASSERT_EQ(run(train_args("ord", true)).code, 0);
  auto r = run({"perturb-sweep", "--checkpoint", (dir / "plain" / "model.ckpt").string(), "--checkpoint",
                (dir / "ord" / "model.ckpt").string(), "--test", data("test.txt"), "--init-scores",
                data("test.init0.txt")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "pairs,model,ndcg10");
  std::set<std::string> plain;
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    if (line.find(",plain/") != std::string::npos) plain.insert(line.substr(line.rfind(',')));
  }
  EXPECT_EQ(rows, 8);
  EXPECT_EQ(plain.size(), 1u);
}

TEST_F(CliTest, SizeGridOnSyntheticData) {
  auto r = run({"size-grid", "--set", "data=synthetic", "--set", "synth_train_queries=10", "--set",
                "synth_valid_queries=5", "--set", "synth_test_queries=5", "--set", "epochs=1", "--set",
                "embed_dim=8", "--set", "heads=2", "--set", "blocks=1", "--set", "induced=3", "--set",
                "test_sizes=15,25", "--out-dir", (dir / "grid").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 1 + 2 * 3);
  EXPECT_EQ(slurp(dir / "grid" / "size_grid.csv"), r.out);
  EXPECT_NE(r.out.find("msab,10,10,"), std::string::npos);
  EXPECT_NE(r.out.find("imsab,10,25,"), std::string::npos);
}

TEST_F(CliTest, SelfcheckPasses) {
  auto r = run({"selfcheck"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}

TEST_F(CliTest, ScalerRoundTripsThroughEval) {
  auto args = train_args("run", false);
  args.insert(args.end(), {"--set", "scale_features=true"});
  ASSERT_EQ(run(args).code, 0);
  ASSERT_TRUE(fs::exists(dir / "run" / "scaler.txt"));
  const FeatureScaler s = load_scaler((dir / "run" / "scaler.txt").string());
  EXPECT_EQ(s.shift.size(), 10u);
  auto r = run({"eval", "--checkpoint", (dir / "run" / "model.ckpt").string(), "--test", data("test.txt"),
                "--scaler", (dir / "run" / "scaler.txt").string()});
  EXPECT_EQ(r.code, 0) << r.err;
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"train", "--out-dir", (dir / "x").string()}).code, 1);  // no --train
  EXPECT_EQ(run({"train", "--set", "nonsense=1"}).code, 1);
  EXPECT_EQ(run({"train", "--set", "novalue"}).code, 1);
  EXPECT_EQ(run({"eval", "--checkpoint", (dir / "missing.ckpt").string(), "--test", data("test.txt")}).code, 2);
  EXPECT_EQ(run({"eval", "--test", data("test.txt")}).code, 1);  // no checkpoint
  EXPECT_EQ(run({"train", "--block", "lstm"}).code, 1);

  std::ofstream(dir / "bad.txt") << "1 qid:1 1:0.5\nnot a line\n";
  auto bad = run({"train", "--train", (dir / "bad.txt").string(), "--valid", data("valid.txt"), "--out-dir",
                  (dir / "b").string()});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("line 2"), std::string::npos) << bad.err;

  // Ordinal requested without initial rankings.
  auto ord = run({"train", "--train", data("train.txt"), "--valid", data("valid.txt"), "--out-dir",
                  (dir / "o").string(), "--set", "use_ordinal=true"});
  EXPECT_EQ(ord.code, 1);

  // Feature width mismatch between checkpoint and data.
  ASSERT_EQ(run(train_args("run", false)).code, 0);
  std::ofstream(dir / "narrow.txt") << "1 qid:1 1:0.5\n0 qid:1 1:0.1\n";
  EXPECT_EQ(run({"eval", "--checkpoint", (dir / "run" / "model.ckpt").string(), "--test",
                 (dir / "narrow.txt").string()})
                .code,
            2);
}

TEST_F(CliTest, MaxDocsTruncatesByInitialRanking) {
  auto args = train_args("run");
  args.insert(args.end(), {"--max-docs", "8"});
  ASSERT_EQ(run(args).code, 0);
  const Model m = load_checkpoint((dir / "run" / "model.ckpt").string());
  EXPECT_EQ(m.config.n_max, 16u);
}

TEST_F(CliTest, NoOrdinalIgnoresScores) {
  auto args = train_args("run");
  args.push_back("--no-ordinal");
  ASSERT_EQ(run(args).code, 0);
  EXPECT_FALSE(load_checkpoint((dir / "run" / "model.ckpt").string()).config.use_ordinal);
}

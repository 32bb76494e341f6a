// Copyright 2026 The EVA Coreset Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <sstream>

#include "eva/cli.hpp"
#include "support/test_util.hpp"

namespace eva::cli {
namespace {

using eva::testing::TempDir;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    ASSERT_EQ(cli({"synth-data", "--out", data(), "--n-train", "80", "--n-test", "40", "--seed", "1"}).code, 0);
  }
  [[nodiscard]] std::string data() const { return (tmp_ / "data").string(); }
  [[nodiscard]] std::string file(const std::string& name) const { return (tmp_ / name).string(); }

  /// Full three-epoch run on the synthetic dataset; returns the log path.
  std::string full_log() {
    const auto r = cli({"train", "--dataset", data(), "--log", file("run.dynl"), "--epochs", "3", "--batch-size",
                        "16", "--lr", "0.05"});
    EXPECT_EQ(r.code, 0) << r.err;
    return file("run.dynl");
  }

  TempDir tmp_;
};

TEST_F(CliTest, TrainWithoutDatasetIsUsageError) {
  const auto r = cli({"train", "--log", file("x.dynl")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--dataset"), std::string::npos) << r.err;
}

TEST_F(CliTest, FullRunWritesValidLog) {
  const auto r = cli({"train", "--dataset", data(), "--log", file("run.dynl"), "--epochs", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.starts_with("accuracy="));
  const auto log = read_log(file("run.dynl"));
  EXPECT_EQ(log.n_epochs(), 3U);
  EXPECT_EQ(log.n_samples(), 80U);
  EXPECT_EQ(cli({"train", "--dataset", data(), "--epochs", "1"}).code, 2);
  EXPECT_EQ(cli({"train", "--dataset", file("missing"), "--log", file("y.dynl")}).code, 2);
}

TEST_F(CliTest, SubsetRunPrintsOneAccuracyLine) {
  const auto log = full_log();
  ASSERT_EQ(cli({"score", "--method", "aum", log, "-o", file("aum.csv")}).code, 0);
  ASSERT_EQ(cli({"select", "--rate", "0.5", file("aum.csv"), "-o", file("idx.txt")}).code, 0);
  const auto r = cli({"train", "--dataset", data(), "--subset", file("idx.txt"), "--epochs", "2", "--model",
                      file("m.bin")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_lines(r.out), 1U);
  ASSERT_TRUE(r.out.starts_with("accuracy="));
  const double acc = std::stod(r.out.substr(9));
  EXPECT_GE(acc, 0.0);
  EXPECT_LE(acc, 1.0);
  const auto e = cli({"evaluate", "--model", file("m.bin"), "--dataset", data()});
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_EQ(e.out, r.out);
}

TEST_F(CliTest, ScoreValidatesWindows) {
  const auto log = full_log();
  ASSERT_EQ(cli({"synth-log", "-o", file("syn.dynl"), "--n", "30", "--epochs", "200", "--profile", "mixed"}).code, 0);
  const auto r = cli({"score", "--method", "eva", file("syn.dynl"), "-o", file("s.csv"), "--early", "100", "--late",
                      "105", "--k", "10"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("windows overlap"), std::string::npos) << r.err;
  EXPECT_EQ(cli({"score", "--method", "eva", log, "-o", file("s.csv")}).code, 2);
  EXPECT_EQ(cli({"score", "--method", "bogus", log, "-o", file("s.csv")}).code, 2);
  EXPECT_EQ(cli({"score", "--method", "eva", file("absent.dynl"), "-o", file("s.csv")}).code, 2);
}

TEST_F(CliTest, ScoreFilesHaveOneRowPerSample) {
  ASSERT_EQ(cli({"synth-log", "-o", file("syn.dynl"), "--n", "50", "--epochs", "40", "--seed", "3"}).code, 0);
  ASSERT_EQ(cli({"score", "--method", "eva", file("syn.dynl"), "-o", file("eva.csv"), "--early", "1", "--late",
                 "21", "--k", "10"})
                .code,
            0);
  const auto text = eva::testing::slurp(file("eva.csv"));
  EXPECT_EQ(count_lines(text), 51U);
  EXPECT_TRUE(text.starts_with("index,score,method=eva,higher_is_important=true,params="));
  EXPECT_NE(text.find("\"source_log\":\"syn.dynl\""), std::string::npos);

  ASSERT_EQ(cli({"score", "--method", "var_entire", file("syn.dynl"), "-o", file("ve.csv")}).code, 0);
  ASSERT_EQ(cli({"score", "--method", "var_single", file("syn.dynl"), "-o", file("vs.csv"), "--start", "1", "--k",
                 "40"})
                .code,
            0);
  EXPECT_EQ(read_scores(std::filesystem::path(file("ve.csv"))).values,
            read_scores(std::filesystem::path(file("vs.csv"))).values);
}

TEST_F(CliTest, EveryScorerRuns) {
  ASSERT_EQ(cli({"synth-log", "-o", file("syn.dynl"), "--n", "20", "--epochs", "30"}).code, 0);
  for (const std::vector<std::string>& extra :
       {std::vector<std::string>{"--method", "el2n"}, {"--method", "forgetting"}, {"--method", "entropy"},
        {"--method", "aum"}, {"--method", "random", "--seed", "4"}, {"--method", "exp_single", "--start", "5"},
        {"--method", "exp_dual", "--early", "1", "--late", "15"}}) {
    std::vector<std::string> args{"score", file("syn.dynl"), "-o", file("x.csv")};
    args.insert(args.end(), extra.begin(), extra.end());
    const auto r = cli(args);
    EXPECT_EQ(r.code, 0) << extra[1] << ": " << r.err;
    EXPECT_EQ(read_scores(std::filesystem::path(file("x.csv"))).size(), 20U);
  }
}

TEST_F(CliTest, SelectRateBoundsAndDeterminism) {
  ScoreVector s = random_score(34561, 9);
  write_scores(s, std::filesystem::path(file("big.csv")));
  EXPECT_EQ(cli({"select", "--rate", "0", file("big.csv"), "-o", file("i.txt")}).code, 2);
  EXPECT_EQ(cli({"select", "--rate", "1.2", file("big.csv"), "-o", file("i.txt")}).code, 2);
  ASSERT_EQ(cli({"select", "--rate", "0.1", file("big.csv"), "-o", file("a.txt")}).code, 0);
  const auto a = eva::testing::slurp(file("a.txt"));
  EXPECT_EQ(count_lines(a), 3457U + 1U);
  EXPECT_TRUE(a.starts_with("# alpha=0.1 method=random seed=0\n"));
  ASSERT_EQ(cli({"select", "--rate", "0.1", file("big.csv"), "-o", file("b.txt")}).code, 0);
  EXPECT_TRUE(a == eva::testing::slurp(file("b.txt")));

  ASSERT_EQ(cli({"select", "--rate", "0.1", "--ccs", "--seed", "5", "--beta", "0.1", file("big.csv"), "-o",
                 file("c.txt")})
                .code,
            0);
  const auto c = read_indices(std::filesystem::path(file("c.txt")), 34561);
  EXPECT_EQ(c.indices.size(), 3457U);
  EXPECT_EQ(c.method, "ccs:random");
  EXPECT_EQ(c.seed, 5U);
}

TEST_F(CliTest, CorruptScoreFileIsRuntimeError) {
  std::ofstream(file("bad.csv")) << "index,score,method=eva,higher_is_important=true,params={}\n0,zz\n";
  EXPECT_EQ(cli({"select", "--rate", "0.5", file("bad.csv"), "-o", file("i.txt")}).code, 1);
}

TEST_F(CliTest, PresetLookup) {
  const auto r = cli({"preset", "--dataset", "OrganAMNIST", "--rate", "0.1"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "t_e=100 t_l=190 K=10\n");
  EXPECT_EQ(cli({"preset", "--dataset", "CIFAR-10", "--rate", "0.5"}).code, 2);
}

TEST_F(CliTest, CompareTableMatchesJson) {
  const auto log = full_log();
  const auto r = cli({"compare", "--dataset", data(), "--log", log, "--methods", "random,eva", "--rates", "0.5",
                      "--seeds", "0", "--early", "1", "--late", "2", "--k", "1", "--epochs", "2", "--json",
                      file("cmp.json")});
  EXPECT_EQ(r.code, 2);  // K = 1 is not a variance window

  ASSERT_EQ(cli({"synth-log", "-o", file("syn.dynl"), "--n", "80", "--epochs", "20"}).code, 0);
  const auto good = cli({"compare", "--dataset", data(), "--log", file("syn.dynl"), "--methods", "random,eva",
                         "--rates", "0.5", "--seeds", "0", "--early", "1", "--late", "11", "--k", "10", "--epochs",
                         "2", "--json", file("cmp.json"), "-o", file("cmp.txt")});
  ASSERT_EQ(good.code, 0) << good.err;
  EXPECT_EQ(count_lines(good.out), 4U);
  EXPECT_EQ(good.out, eva::testing::slurp(file("cmp.txt")));
  const auto j = nlohmann::json::parse(eva::testing::slurp(file("cmp.json")));
  ASSERT_EQ(j["rows"].size(), 2U);
  std::istringstream lines(good.out);
  std::string line;
  std::getline(lines, line);
  std::getline(lines, line);
  EXPECT_EQ(line, "method\t50%");
  for (std::size_t m = 0; m < 2; ++m) {
    std::getline(lines, line);
    const double mean = j["rows"][m]["cells"][0]["mean"];
    EXPECT_EQ(line, j["rows"][m]["method"].get<std::string>() + "\t" + eva::detail::format_shortest(mean));
  }
}

TEST_F(CliTest, SearchReportListsEveryCandidate) {
  ASSERT_EQ(cli({"synth-log", "-o", file("syn.dynl"), "--n", "80", "--epochs", "30"}).code, 0);
  const auto r = cli({"search-windows", "--dataset", data(), "--log", file("syn.dynl"), "--rate", "0.5", "--starts",
                      "1,11,21", "--k", "10", "--proxy-epochs", "1", "--seeds", "0,1", "--jobs", "2", "--json",
                      file("s.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(eva::testing::slurp(file("s.json")));
  EXPECT_EQ(j["candidates"].size(), 3U);
  EXPECT_EQ(j["proxy"]["epochs"], 1);
  EXPECT_EQ(j["seeds"], nlohmann::json({0, 1}));
  EXPECT_NE(r.out.find("best\t("), std::string::npos);
}

TEST_F(CliTest, IngestNeedsASource) {
  EXPECT_EQ(cli({"ingest", "--out", file("o")}).code, 2);
  EXPECT_EQ(cli({}).code, 2);
  EXPECT_EQ(cli({"frobnicate"}).code, 2);
}

}  // namespace
}  // namespace eva::cli

// Copyright 2026 The GoalWeaver Authors.
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


// Drives the command-line binary end to end and checks exit codes and
// artifacts.

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "test_util.hpp"

namespace goalweaver {
namespace {

namespace fs = std::filesystem;

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_matching(const fs::path& dir, const std::string& prefix) {
  std::size_t n = 0;
  if (!fs::exists(dir)) return 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().filename().string().rfind(prefix, 0) == 0) ++n;
  }
  return n;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testing::TempDir();
    ASSERT_EQ(run("synth --dir " + data() + " --seed 3").code, 0);
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }

  static std::string data() { return (dir_->path() / "data").string(); }
  static std::string out(const std::string& name) { return (dir_->path() / name).string(); }

  // Small settings so the whole pipeline runs in seconds.
  static std::string small() {
    return " --set dqn.breadth=3 --set dqn.max_continuations=3 --set dqn.top_k=5 --set dqn.batch=8"
           " --set dqn.replay_update_period=20 --set dqn.replay_steps=2 --set dqn.selection_stories=2"
           " --set network.heads=1 --set network.head_dim=4 --set network.action_dim=4"
           " --set rsft.batch=4 --set rsft.candidates_per_query=3 --set rsft.top_k=5"
           " --set eval.breadth=3 --set eval.max_continuations=4 --set eval.top_k=5 --set lm.embedding_dim=8";
  }

  static RunResult run(const std::string& args) {
    static int counter = 0;
    const auto so = dir_->path() / ("stdout-" + std::to_string(counter));
    const auto se = dir_->path() / ("stderr-" + std::to_string(counter++));
    const std::string cmd = std::string(GOALWEAVER_CLI_PATH) + " " + args + " >" + so.string() + " 2>" + se.string();
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(so);
    r.err = slurp(se);
    return r;
  }

  // Global flags for a workspace rooted at `name`.
  static std::string ws(const std::string& name) {
    return "--index " + data() + "/index.tsv --output " + out(name) + " --seed 7" + small() + " ";
  }

  static testing::TempDir* dir_;
};

testing::TempDir* Cli::dir_ = nullptr;

TEST_F(Cli, MissingIndexIsUsageError) {
  const auto r = run("--index " + data() + "/nope.tsv --output " + out("a") + " preprocess --corpus " + data() +
                     "/corpus.txt");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nope.tsv"), std::string::npos);
}

TEST_F(Cli, UnknownSubcommandAndBadOverrideAreUsageErrors) {
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run(ws("b") + "--set no.such_key=1 preprocess --corpus " + data() + "/corpus.txt").code, 2);
  EXPECT_EQ(run(ws("b") + "preprocess --corpus " + data() + "/corpus.txt --split 1.5").code, 2);
  EXPECT_EQ(run(ws("b") + "preprocess --corpus " + data() + "/corpus.txt --format csv").code, 2);
}

TEST_F(Cli, MissingCorpusIsUsageError) {
  EXPECT_EQ(run(ws("c") + "preprocess --corpus " + data() + "/missing.txt").code, 2);
}

TEST_F(Cli, PreprocessIsDeterministic) {
  ASSERT_EQ(run(ws("p1") + "preprocess --corpus " + data() + "/corpus.txt --split 0.7").code, 0);
  ASSERT_EQ(run(ws("p2") + "preprocess --corpus " + data() + "/corpus.txt --split 0.7").code, 0);
  EXPECT_EQ(slurp(out("p1") + "/train.manifest"), slurp(out("p2") + "/train.manifest"));
  EXPECT_EQ(slurp(out("p1") + "/test.manifest"), slurp(out("p2") + "/test.manifest"));
  EXPECT_FALSE(slurp(out("p1") + "/train.manifest").empty());
}

TEST_F(Cli, RewardsGoalHandling) {
  const auto w = ws("r");
  ASSERT_EQ(run(w + "preprocess --corpus " + data() + "/corpus.txt").code, 0);
  EXPECT_EQ(run(w + "rewards --goal nope-1").code, 3);
  EXPECT_EQ(run(w + "rewards").code, 2);
  ASSERT_EQ(run(w + "rewards --goal discover-84").code, 0);
  const auto table = slurp(out("r") + "/rewards.tsv");
  EXPECT_NE(table.find("goal\tdiscover-84\n"), std::string::npos);
  EXPECT_NE(table.find("\nclusters\t"), std::string::npos);
  ASSERT_EQ(run(w + "rewards --goal discover-84 --k 3").code, 0);
  EXPECT_NE(slurp(out("r") + "/rewards.tsv").find("\nclusters\t3\n"), std::string::npos);
}

TEST_F(Cli, TrainRequiresArtifactsAndValidMode) {
  const auto w = ws("t");
  EXPECT_EQ(run(w + "train --mode bogus").code, 2);
  EXPECT_EQ(run(w + "train --mode dqn").code, 3);
}

TEST_F(Cli, FullPipeline) {
  const auto w = ws("full");
  ASSERT_EQ(run(w + "preprocess --corpus " + data() + "/corpus.txt").code, 0);
  ASSERT_EQ(run(w + "rewards --goal discover-84 --k 3").code, 0);
  ASSERT_EQ(run(w + "train --mode lm").code, 0);
  EXPECT_TRUE(fs::exists(out("full") + "/lm.ckpt"));

  const auto dqn = run(w + "train --mode dqn --epochs 20");
  ASSERT_EQ(dqn.code, 0) << dqn.err;
  EXPECT_EQ(count_matching(out("full") + "/kg-dqn", "epoch-"), 4u);
  EXPECT_TRUE(fs::exists(out("full") + "/kg-dqn/best.qnet"));

  const auto rsft = run(w + "train --mode rsft --epochs 40");
  ASSERT_EQ(rsft.code, 0) << rsft.err;
  EXPECT_EQ(count_matching(out("full") + "/rsft", "epoch-"), 4u);

  const auto gen = run(w + "generate --seed-text \"Anna walked to the forest.\" --goal discover-84");
  ASSERT_EQ(gen.code, 0) << gen.err;
  EXPECT_NE(gen.out.find("Anna walked to the forest."), std::string::npos);
  const auto again = run(w + "generate --seed-text \"Anna walked to the forest.\" --goal discover-84");
  EXPECT_EQ(gen.out, again.out);
  EXPECT_EQ(run(w + "generate --seed-text \"x\" --model nonsense").code, 2);

  const auto ev = run(w + "evaluate --models kg-dqn,ngram,rsft --limit 5");
  ASSERT_EQ(ev.code, 0) << ev.err;
  EXPECT_TRUE(fs::exists(out("full") + "/report.txt"));
  EXPECT_TRUE(fs::exists(out("full") + "/report.json"));
  EXPECT_NE(ev.out.find("kg-dqn"), std::string::npos);

  const auto remote = run(w + "--set lm.backend=remote --set lm.endpoint=http://127.0.0.1:1/generate "
                              "--set lm.retries=0 --set lm.timeout_ms=500 "
                              "generate --seed-text \"Anna walked.\" --model remote --goal discover-84");
  EXPECT_EQ(remote.code, 4) << remote.err;
}

}  // namespace
}  // namespace goalweaver

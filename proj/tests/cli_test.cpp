/*
 * Copyright 2026 The hardshap Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// End-to-end checks of the hardshap executable.

#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "hardshap/hardshap.hpp"
#include "test_util.hpp"

namespace hardshap {
namespace {

using testing::TempDir;

struct Result {
  int code;
  std::string output;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(HARDSHAP_CLI) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  std::string out;
  char buf[4096];
  while (std::size_t got = std::fread(buf, 1, sizeof(buf), pipe)) out.append(buf, got);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

class Cli : public ::testing::Test {
 protected:
  Cli() : dir_("cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name())) {}
  std::string f(const std::string& name) const { return dir_.file(name); }

  void write_toy() {
    write_file(f("toy_train.csv"), "x,y\n-1,0\n1,1\n0,0\n");
    write_file(f("toy_test.csv"), "x,y\n0.25,0\n");
  }
  void write_blobs(std::size_t n = 300) {
    ASSERT_EQ(run("sim-blobs --seed 4 --n-train " + std::to_string(n) + " --n-valid 150 --n-test 150 --out-prefix " +
                  f("b"))
                  .code,
              0);
  }

  TempDir dir_;
};

TEST_F(Cli, ValueReproducesToyScores) {
  write_toy();
  const auto r = run("value --train " + f("toy_train.csv") + " --test " + f("toy_test.csv") + " --k 1 --out " +
                     f("s.csv"));
  ASSERT_EQ(r.code, 0) << r.output;
  const Table t = read_table(f("s.csv"));
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_NEAR(parse_double(t.rows[0][1], "s"), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(parse_double(t.rows[1][1], "s"), -1.0 / 6.0, 1e-12);
  EXPECT_NEAR(parse_double(t.rows[2][1], "s"), 5.0 / 6.0, 1e-12);
  EXPECT_EQ(t.rows[1][2], "0");  // hardest
  EXPECT_EQ(t.rows[0][3], "knn_shapley");
  const std::string text = slurp(f("s.csv"));
  EXPECT_EQ(text.rfind("# hardshap value --train", 0), 0u);
  EXPECT_NE(text.find("# seed=0\n"), std::string::npos);
}

TEST_F(Cli, ExactAndTmcMethods) {
  write_toy();
  ASSERT_EQ(run("value --method exact_shapley --k 1 --train " + f("toy_train.csv") + " --test " +
                f("toy_test.csv") + " --out " + f("e.csv"))
                .code,
            0);
  const Table t = read_table(f("e.csv"));
  EXPECT_NEAR(parse_double(t.rows[2][1], "s"), 5.0 / 6.0, 1e-12);
  EXPECT_EQ(run("value --method tmc_shapley --permutations 50 --seed 3 --k 1 --train " + f("toy_train.csv") +
                " --test " + f("toy_test.csv") + " --out " + f("t.csv"))
                .code,
            0);
  EXPECT_EQ(run("value --method loo --train " + f("toy_train.csv") + " --test " + f("toy_test.csv") + " --out " +
                f("t.csv"))
                .code,
            2);
}

TEST_F(Cli, ValidationErrorsExitTwo) {
  write_toy();
  auto r = run("value --train " + f("toy_train.csv") + " --test " + f("toy_test.csv") + " --k 0 --out " + f("s.csv"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("K must be positive"), std::string::npos);
  EXPECT_EQ(std::count(r.output.begin(), r.output.end(), '\n'), 1);

  r = run("value --train " + f("missing.csv") + " --test " + f("toy_test.csv") + " --out " + f("s.csv"));
  EXPECT_EQ(r.code, 2);
  write_file(f("bad.csv"), "x,y\n1,2\n");
  r = run("value --train " + f("bad.csv") + " --test " + f("toy_test.csv") + " --out " + f("s.csv"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("invalid label"), std::string::npos);
  EXPECT_EQ(run("no-such-command").code, 2);
  EXPECT_EQ(run("value --bogus 1").code, 2);
  EXPECT_EQ(run("").code, 2);
}

TEST_F(Cli, HelpExitsZeroAndShowsDefaults) {
  auto r = run("--help");
  EXPECT_EQ(r.code, 0);
  for (const char* sub : {"value", "rank", "augment", "eval", "eval-pipeline", "perturb-bench", "dataiq",
                          "removal-curve", "sim-toy", "sim-blobs"})
    EXPECT_NE(r.output.find(sub), std::string::npos) << sub;
  r = run("eval-pipeline --help");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.output.find("[0.05]"), std::string::npos);
  EXPECT_NE(r.output.find("[15]"), std::string::npos);
  EXPECT_NE(r.output.find("[30]"), std::string::npos);
  r = run("dataiq --help");
  EXPECT_NE(r.output.find("[0.25]"), std::string::npos);
  EXPECT_NE(r.output.find("[0.75]"), std::string::npos);
  EXPECT_NE(r.output.find("[0.2]"), std::string::npos);
  r = run("perturb-bench --help");
  EXPECT_NE(r.output.find("0.05,0.1,0.15,0.2"), std::string::npos);
}

TEST_F(Cli, RuntimeFailureExitsOne) {
  write_blobs();
  ASSERT_EQ(run("value --train " + f("b_train.csv") + " --test " + f("b_test.csv") + " --out " + f("s.csv")).code, 0);
  const auto r = run("augment --data " + f("b_train.csv") + " --scores " + f("s.csv") +
                     " --generator external --exec-in " + f("in.csv") + " --exec-out " + f("out.csv") +
                     " --exec-cmd false --seed 1 --out " + f("a.csv"));
  EXPECT_EQ(r.code, 1) << r.output;
}

TEST_F(Cli, PipelineNeedsGeneratorBeforeWork) {
  write_blobs();
  const auto r = run("eval-pipeline --train " + f("b_train.csv") + " --valid " + f("b_valid.csv") + " --test " +
                     f("b_test.csv") + " --seed 1 --out " + f("p.csv"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("generator"), std::string::npos);
  EXPECT_FALSE(std::filesystem::exists(f("p.csv")));
  const auto bad = run("eval-pipeline --generator gan --train " + f("b_train.csv") + " --valid " + f("b_valid.csv") +
                       " --test " + f("b_test.csv") + " --seed 1 --out " + f("p.csv"));
  EXPECT_EQ(bad.code, 2);
}

TEST_F(Cli, PipelineArmsAndMatchedBudget) {
  write_blobs(400);
  const std::string data =
      " --train " + f("b_train.csv") + " --valid " + f("b_valid.csv") + " --test " + f("b_test.csv");
  ASSERT_EQ(run("eval-pipeline --generator smote --seed 2 --replicates 4 --baseline --tau 0.05 --amount 1.0" + data +
                " --out " + f("a.csv"))
                .code,
            0);
  ASSERT_EQ(run("eval-pipeline --generator smote --seed 2 --replicates 4 --tau 1.0 --amount 0.05" + data +
                " --out " + f("b.csv"))
                .code,
            0);
  const Table rows = read_table(f("a.csv"));
  EXPECT_EQ(rows.rows.size(), 8u);
  const Table a = read_table(f("a_summary.csv")), b = read_table(f("b_summary.csv"));
  ASSERT_EQ(a.rows.size(), 3u);  // targeted, non_targeted, difference
  ASSERT_EQ(b.rows.size(), 1u);
  const auto synth = static_cast<std::size_t>(a.column("synthetic_rows"));
  EXPECT_EQ(a.rows[0][synth], "20");
  EXPECT_EQ(a.rows[1][synth], "20");
  EXPECT_EQ(b.rows[0][synth], "20");
  // The baseline arm of the first run is the flat arm of the second.
  EXPECT_EQ(a.rows[1][2], b.rows[0][2]);
}

TEST_F(Cli, ConfigFileWithOverrides) {
  write_file(f("run.cfg"), "# blobs\nseed = 6\nout-prefix = " + f("c") + "\nn-train = 40\nn-valid=10\nn-test=10\n");
  ASSERT_EQ(run("sim-blobs --config " + f("run.cfg")).code, 0);
  EXPECT_EQ(read_table(f("c_train.csv")).rows.size(), 40u);
  ASSERT_EQ(run("sim-blobs --config " + f("run.cfg") + " --n-train 25").code, 0);
  EXPECT_EQ(read_table(f("c_train.csv")).rows.size(), 25u);
  EXPECT_NE(slurp(f("c_train.csv")).find("# config seed=6"), std::string::npos);

  write_file(f("noseed.cfg"), "out-prefix = " + f("c") + "\n");
  EXPECT_EQ(run("sim-blobs --config " + f("noseed.cfg")).code, 2);
  EXPECT_EQ(run("sim-blobs --config " + f("noseed.cfg") + " --seed 1").code, 0);
  write_file(f("typo.cfg"), "seed = 1\nout-prefx = x\n");
  EXPECT_EQ(run("sim-blobs --config " + f("typo.cfg")).code, 2);
  EXPECT_EQ(run("sim-blobs --config " + f("absent.cfg")).code, 2);
}

TEST_F(Cli, RankAugmentEvalChain) {
  write_blobs();
  ASSERT_EQ(run("value --train " + f("b_train.csv") + " --test " + f("b_test.csv") + " --out " + f("s.csv")).code, 0);
  ASSERT_EQ(run("rank --scores " + f("s.csv") + " --out " + f("r.csv") + " --data " + f("b_train.csv") +
                " --tau 0.1 --subset-out " + f("h.csv"))
                .code,
            0);
  EXPECT_EQ(read_table(f("r.csv")).rows.size(), 300u);
  EXPECT_EQ(load_csv(f("h.csv"), "y").size(), 30u);
  ASSERT_EQ(run("augment --data " + f("b_train.csv") + " --scores " + f("s.csv") +
                " --tau 0.1 --amount 1.0 --generator smote --k 5 --seed 3 --out " + f("a.csv"))
                .code,
            0);
  EXPECT_EQ(load_csv(f("a.csv"), "y").size(), 330u);
  EXPECT_NE(slurp(f("a.csv.meta")).find("weighted_ks="), std::string::npos);
  const auto e = run("eval --train " + f("a.csv") + " --valid " + f("b_valid.csv") + " --out " + f("m.csv"));
  ASSERT_EQ(e.code, 0) << e.output;
  EXPECT_NE(e.output.find("gini,"), std::string::npos);
}

TEST_F(Cli, EvalFromProbabilityFiles) {
  write_file(f("p.csv"), "id,prob\n1,0.4\n0,0.1\n2,0.35\n3,0.8\n");
  write_file(f("l.csv"), "id,label\n0,0\n1,0\n2,1\n3,1\n");
  const auto r = run("eval --probs " + f("p.csv") + " --labels " + f("l.csv"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("auc,0.75\n"), std::string::npos);
  EXPECT_NE(r.output.find("gini,0.5\n"), std::string::npos);
  write_file(f("l1.csv"), "id,label\n0,1\n1,1\n2,1\n3,1\n");
  EXPECT_EQ(run("eval --probs " + f("p.csv") + " --labels " + f("l1.csv")).code, 2);
}

TEST_F(Cli, DataIqFromProbabilities) {
  write_file(f("cp.csv"), "id,p_1,p_2\n0,0.9,1\n1,0.1,0\n2,0.5,0.5\n");
  const auto r = run("dataiq --probs " + f("cp.csv") + " --thresholds 0.25,0.75,0.2 --out " + f("t.csv"));
  ASSERT_EQ(r.code, 0) << r.output;
  const Table t = read_table(f("t.csv"));
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_EQ(t.rows[0][3], "Easy");
  EXPECT_EQ(t.rows[1][3], "Hard");
  EXPECT_EQ(t.rows[2][3], "Ambiguous");
  EXPECT_EQ(run("dataiq --probs " + f("cp.csv") + " --thresholds 0.8,0.75,0.2 --out " + f("t.csv")).code, 2);
}

TEST_F(Cli, PerturbBenchDefaultGrid) {
  const auto r = run("perturb-bench --blobs-n 300 --runs 1 --checkpoints 3 --out " + f("pb.csv"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(read_table(f("pb.csv")).rows.size(), 36u);
  const Table mean = read_table(f("pb_mean.csv"));
  EXPECT_EQ(mean.rows.size(), 36u);
  EXPECT_GE(mean.column("mean_auprc"), 0);
}

TEST_F(Cli, SimToyPrintsExpectedShapley) {
  const auto r = run("sim-toy --x-train 0");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.output.find("expected_shapley=0.209"), std::string::npos);
  EXPECT_NE(r.output.find("0,0.5,0.25,0,0.333333,0.833333,-0.166667"), std::string::npos);
}

TEST_F(Cli, RemovalCurveRows) {
  write_blobs();
  ASSERT_EQ(run("value --train " + f("b_train.csv") + " --test " + f("b_test.csv") + " --out " + f("s.csv")).code, 0);
  ASSERT_EQ(run("removal-curve --train " + f("b_train.csv") + " --valid " + f("b_valid.csv") + " --scores " +
                f("s.csv") + " --fractions 0,0.1,0.2 --seed 2 --out " + f("rc.csv"))
                .code,
            0);
  const Table t = read_table(f("rc.csv"));
  ASSERT_EQ(t.rows.size(), 6u);
  EXPECT_EQ(t.rows[0][2], t.rows[3][2]);
}

TEST_F(Cli, RerunsAreByteIdenticalAcrossThreadCounts) {
  write_blobs();
  const std::string args = "value --train " + f("b_train.csv") + " --test " + f("b_test.csv") + " --out ";
  ASSERT_EQ(run("--threads 1 " + args + f("one.csv")).code, 0);
  ASSERT_EQ(run("--threads 8 " + args + f("eight.csv")).code, 0);
  ASSERT_EQ(run(args + f("eight.csv")).code, 0);
  // Output names differ, so compare everything after the header.
  auto body = [&](const std::string& p) {
    const std::string s = slurp(p);
    return s.substr(s.find("\nid,"));
  };
  EXPECT_EQ(body(f("one.csv")), body(f("eight.csv")));
  ASSERT_EQ(run("--threads 8 " + args + f("one2.csv")).code, 0);
  ASSERT_EQ(run("--threads 1 " + args + f("one2.csv")).code, 0);
  const std::string first = slurp(f("one2.csv"));
  ASSERT_EQ(run("--threads 3 " + args + f("one2.csv")).code, 0);
  EXPECT_EQ(first, slurp(f("one2.csv")));
}

}  // namespace
}  // namespace hardshap

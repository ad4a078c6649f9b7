// Copyright 2026 The FAIR-Pruner Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "fair/fair.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  int code = -1;
  std::string out, err;
  json summary() const { return json::parse(out); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("fairprune_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    const auto r = run("train " + kData + " --hidden 16,8 --epochs 10 --checkpoint " +
                       path("dense.fpm"));
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::string path(const std::string& name) { return (dir_ / name).string(); }

  static Outcome run(const std::string& args) {
    const auto out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = std::string(FAIRPRUNE_EXE) + " " + args + " >" + out.string() +
                            " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    Outcome r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  static Outcome ok(const std::string& args) {
    auto r = run(args);
    EXPECT_EQ(r.code, 0) << args << "\n" << r.err;
    EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 1) << r.out;
    return r;
  }

  // Capture + score of the dense checkpoint into `name`.
  static void scored(const std::string& name) {
    ok("capture " + kData + " --checkpoint " + path("dense.fpm") + " --dumps " + path(name));
    ok("score --dumps " + path(name) + " --report " + path(name + ".json") + " --deterministic");
  }

  static inline fs::path dir_;
  static inline const std::string kData = "--synthetic 4,8,1.5,400 --seed 5";
};

}  // namespace

TEST_F(Cli, ScorePlanApplyEval) {
  scored("d1");
  const auto report = json::parse(slurp(path("d1.json")));
  EXPECT_EQ(report["layers"].size(), 2u);
  EXPECT_EQ(report["meta"]["layer_sizes"], json({8, 16, 8, 4}));

  ok("plan --report " + path("d1.json") + " --tod 0.1 --plan " + path("p.json"));
  const auto plan = json::parse(slurp(path("p.json")));
  for (const auto& l : plan["layers"]) EXPECT_LE(l["achieved_tod"].get<double>(), 0.1);

  const auto applied = ok("apply --checkpoint " + path("dense.fpm") + " --plan " +
                          path("p.json") + " --out " + path("pruned.fpm"))
                           .summary();
  EXPECT_DOUBLE_EQ(applied["pruning_rate"].get<double>(), plan["pruning_rate"].get<double>());

  const auto ev = ok("eval " + kData + " --checkpoint " + path("dense.fpm") + " --pruned " +
                     path("pruned.fpm"))
                      .summary();
  EXPECT_TRUE(ev["dense"].contains("accuracy"));
  EXPECT_TRUE(ev["pruned"].contains("accuracy"));
}

TEST_F(Cli, ScoreIsReproducible) {
  scored("d2");
  const auto first = slurp(path("d2.json"));
  ok("score --dumps " + path("d2") + " --report " + path("d2b.json") + " --deterministic");
  EXPECT_EQ(slurp(path("d2b.json")), first);
  ok("score --dumps " + path("d2") + " --report " + path("d2c.json"));
  EXPECT_NE(slurp(path("d2c.json")).find("timestamp"), std::string::npos);
}

TEST_F(Cli, SweepWritesOnePlanPerLevel) {
  scored("d3");
  const auto s = ok("sweep --report " + path("d3.json") + " --tod 0.05,0.1,0.3 --out " +
                    path("sweep"))
                     .summary();
  ASSERT_EQ(s["plans"].size(), 3u);
  double prev = 0.0;
  for (const auto& p : s["plans"]) {
    const auto plan = json::parse(slurp(p["plan"].get<std::string>()));
    EXPECT_GE(plan["pruning_rate"].get<double>(), prev);
    prev = plan["pruning_rate"].get<double>();
  }
}

TEST_F(Cli, UsageErrorsExitTwo) {
  scored("d4");
  EXPECT_EQ(run("plan --report " + path("d4.json") + " --tod 1.5 --plan " + path("x.json")).code, 2);
  EXPECT_EQ(run("plan --report " + path("d4.json") + " --tod 0 --plan " + path("x.json")).code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("score --dumps " + path("d4")).code, 2);
  EXPECT_EQ(run("train --synthetic 4,8 --checkpoint " + path("x.fpm")).code, 2);
  EXPECT_FALSE(fs::exists(path("x.json")));
}

TEST_F(Cli, MissingDumpKindIsNamed) {
  scored("d5");
  fs::remove(fair::pipeline::dump_path(path("d5"), 1, fair::dumpio::DumpKind::bias_grad));
  const auto r = run("score --dumps " + path("d5") + " --report " + path("x.json"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("layer 1: missing dump kind 2 (bgrad)"), std::string::npos) << r.err;
}

TEST_F(Cli, CorruptInputsExitTwo) {
  std::ofstream(path("junk.fpm")) << "not a checkpoint";
  EXPECT_EQ(run("eval " + kData + " --checkpoint " + path("junk.fpm")).code, 2);
  scored("d6");
  std::ofstream(path("d6/layer0_act.fpd"), std::ios::app) << "x";
  EXPECT_EQ(run("score --dumps " + path("d6") + " --report " + path("x.json")).code, 2);
}

TEST_F(Cli, MismatchedPlanExitsThree) {
  ok("train " + kData + " --hidden 12,8 --epochs 1 --checkpoint " + path("other.fpm"));
  scored("d7");
  ok("plan --report " + path("d7.json") + " --tod 0.3 --plan " + path("p7.json"));
  const auto r = run("apply --checkpoint " + path("other.fpm") + " --plan " + path("p7.json") +
                     " --out " + path("x.fpm"));
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_EQ(run("plan --report " + path("d7.json") + " --tod 0.3 --plan " + path("x.json") +
                " --checkpoint " + path("other.fpm"))
                .code,
            3);
}

TEST_F(Cli, DivergenceExitsOne) {
  const auto r = run("train " + kData + " --hidden 16 --epochs 20 --lr 1e30 --checkpoint " +
                     path("bad.fpm"));
  EXPECT_EQ(r.code, 1) << r.err;
}

TEST_F(Cli, IterateCompoundsRounds) {
  const auto one = ok("iterate " + kData + " --checkpoint " + path("dense.fpm") +
                      " --tod 0.1 --rounds 1 --epochs 2 --out " + path("it1.fpm"))
                       .summary();
  const auto three = ok("iterate " + kData + " --checkpoint " + path("dense.fpm") +
                        " --tod 0.1 --rounds 3 --epochs 2 --out " + path("it3.fpm") + " --csv " +
                        path("it3.csv"))
                         .summary();
  ASSERT_EQ(one["rounds"].size(), 1u);
  double prev = 0.0;
  for (const auto& r : three["rounds"]) {
    EXPECT_GE(r["cumulative_pr"].get<double>(), prev);
    prev = r["cumulative_pr"].get<double>();
  }
  EXPECT_GE(prev, one["rounds"][0]["cumulative_pr"].get<double>());
  EXPECT_EQ(slurp(path("it3.csv")).rfind("round,params,cumulative_pr,os_acc,ft_acc\n", 0), 0u);
}

TEST_F(Cli, CompareAndConverge) {
  const auto c = ok("compare " + kData + " --checkpoint " + path("dense.fpm") +
                    " --trials 2 --epochs 1 --methods fair,random_tod,random_uniform,l1,lth --csv " +
                    path("cmp.csv"))
                     .summary();
  EXPECT_EQ(c["summary"].size(), 5u);
  const auto csv = slurp(path("cmp.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 11);

  scored("d8");
  const auto v = ok("converge --dumps " + path("d8") + " --layer 1 --sizes 16,64 --resamples 3 --csv " +
                    path("conv.csv"))
                     .summary();
  EXPECT_EQ(v["sizes"].size(), 2u);
  EXPECT_EQ(run("converge --dumps " + path("d8") + " --layer 1 --sizes 16,4096 --resamples 3").code, 2);
}

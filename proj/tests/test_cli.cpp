// Copyright 2026 The neuronlens Authors
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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nlens/cli.hpp"
#include "nlens/synthetic.hpp"

using namespace nlens;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(std::move(args), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  fs::path dir;
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("nlens_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }

  void write_planted() const {
    const auto data = make_planted();
    save_activations(path("train.jsonl"), data.train.base);
    save_labels(path("train.lbl"), data.train);
    save_activations(path("test.jsonl"), data.test.base);
    save_labels(path("test.lbl"), data.test);
  }
};

}  // namespace

TEST_F(CliTest, ProbeTrainHappyPath) {
  write_planted();
  const auto r = run_cli({"probe-train", "--activations", path("train.jsonl"), "--labels", path("train.lbl"), "--l1",
                          "1e-5", "--l2", "1e-5", "--out", path("m.json")});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(path("m.json")));
  EXPECT_TRUE(r.out.empty());
  // Resolved configuration, defaults included, is echoed.
  EXPECT_NE(r.err.find("seed=42"), std::string::npos);
  EXPECT_NE(r.err.find("epochs"), std::string::npos);
  const ProbeModel model = load_probe(path("m.json"));
  EXPECT_EQ(model.dim(), 100u);
  EXPECT_EQ(model.lambda1, 1e-5);

  const auto eval = run_cli({"--quiet", "probe-eval", "--model", path("m.json"), "--activations",
                             path("test.jsonl"), "--labels", path("test.lbl"), "--out", path("e.json")});
  EXPECT_EQ(eval.code, 0) << eval.err;
  EXPECT_TRUE(eval.err.empty());
  EXPECT_GE(nlohmann::json::parse(slurp(path("e.json")))["accuracy"].get<double>(), 0.9);
}

TEST_F(CliTest, UsageErrors) {
  const auto missing = run_cli({"probe-train", "--activations", path("a.jsonl")});
  EXPECT_EQ(missing.code, 1);
  EXPECT_NE(missing.err.find("--out"), std::string::npos);
  EXPECT_NE(missing.err.find("Usage"), std::string::npos);
  EXPECT_FALSE(fs::exists(path("a.jsonl")));

  const auto unknown = run_cli({"frobnicate"});
  EXPECT_EQ(unknown.code, 1);
  EXPECT_NE(unknown.err.find("Usage"), std::string::npos);

  EXPECT_EQ(run_cli({}).code, 1);
  EXPECT_EQ(run_cli({"rank", "--model", "m", "--out", "o", "--bogus"}).code, 1);
  EXPECT_EQ(run_cli({"rank-cross", "--activations", "a", "--method", "magic", "--out", "o"}).code, 1);

  const auto help = run_cli({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("probe-train"), std::string::npos);
}

TEST_F(CliTest, MissingInputFileIsInputError) {
  const auto r = run_cli({"rank", "--model", path("absent.json"), "--out", path("r.txt")});
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(fs::exists(path("r.txt")));
}

TEST_F(CliTest, DivergenceIsNumericalError) {
  std::ofstream big(path("big.jsonl"));
  for (int s = 0; s < 4; ++s) {
    big << R"({"tokens":["a","b","c"],"activations":[[1e308,-1e308],[-1e308,1e308],[1e308,1e308]]})" << '\n';
  }
  big.close();
  const auto r = run_cli({"probe-train", "--activations", path("big.jsonl"), "--lr", "1e300", "--out", path("m.json")});
  EXPECT_EQ(r.code, 2) << r.err;
  EXPECT_NE(r.err.find("numerical"), std::string::npos);
}

TEST_F(CliTest, SameArgvSameBytes) {
  write_planted();
  std::string first;
  for (int round = 0; round < 2; ++round) {
    const std::string m = path("m" + std::to_string(round) + ".json");
    const std::string r = path("r" + std::to_string(round) + ".txt");
    const std::string c = path("c" + std::to_string(round) + ".csv");
    ASSERT_EQ(run_cli({"--quiet", "--seed", "3", "probe-train", "--activations", path("train.jsonl"), "--labels",
                       path("train.lbl"), "--epochs", "3", "--out", m})
                  .code,
              0);
    ASSERT_EQ(run_cli({"--quiet", "rank", "--model", m, "--out", r}).code, 0);
    ASSERT_EQ(run_cli({"--quiet", "ablate-mask", "--model", m, "--activations", path("test.jsonl"), "--labels",
                       path("test.lbl"), "--ranking", r, "--steps", "0", "10", "50", "--out", c})
                  .code,
              0);
    const std::string bytes = slurp(m) + slurp(r) + slurp(c);
    if (round == 0) {
      first = bytes;
    } else {
      EXPECT_EQ(bytes, first);
    }
  }
}

TEST_F(CliTest, ProbeAnalysesAndReport) {
  write_planted();
  const std::string m = path("m.json"), r = path("r.txt");
  ASSERT_EQ(run_cli({"--quiet", "probe-train", "--activations", path("train.jsonl"), "--labels", path("train.lbl"),
                     "--out", m})
                .code,
            0);
  ASSERT_EQ(run_cli({"--quiet", "rank", "--model", m, "--out", r}).code, 0);
  EXPECT_EQ(load_ranking(r).size(), 100u);
  const auto mask = run_cli({"--quiet", "ablate-mask", "--model", m, "--activations", path("test.jsonl"), "--labels",
                             path("test.lbl"), "--ranking", r, "--percent", "10", "--out", path("mask.json")});
  ASSERT_EQ(mask.code, 0) << mask.err;
  EXPECT_GE(nlohmann::json::parse(slurp(path("mask.json")))["accuracy"].get<double>(), 0.9);
  const auto retrain = run_cli({"--quiet", "ablate-retrain", "--train-activations", path("train.jsonl"),
                                "--train-labels", path("train.lbl"), "--test-activations", path("test.jsonl"),
                                "--test-labels", path("test.lbl"), "--ranking", r, "--direction", "bottom",
                                "--percent", "20", "--epochs", "2", "--out", path("retrain.json")});
  ASSERT_EQ(retrain.code, 0) << retrain.err;
  EXPECT_EQ(nlohmann::json::parse(slurp(path("retrain.json")))["kept"].size(), 20u);

  EXPECT_EQ(run_cli({"--quiet", "analyze", "salient-counts", "--model", m, "--out", path("s.tsv")}).code, 0);
  EXPECT_EQ(slurp(path("s.tsv")).rfind("label\tcount\n", 0), 0u);
  EXPECT_EQ(run_cli({"--quiet", "analyze", "shared", "--model", m, "--tags", "c0", "c1", "--out", path("sh.tsv")}).code,
            0);
  EXPECT_EQ(run_cli({"--quiet", "analyze", "shared", "--model", m, "--tags", "c0", "zz", "--out", path("x.tsv")}).code,
            1);
  EXPECT_EQ(run_cli({"--quiet", "analyze", "overlap", "--ranking", "a=" + r, "b=" + r, "--k", "10", "--out",
                     path("o.tsv")})
                .code,
            0);
  EXPECT_EQ(slurp(path("o.tsv")), "ranking\ta\tb\na\t1\t1\nb\t1\t1\n");
  EXPECT_EQ(run_cli({"--quiet", "analyze", "top-words", "--activations", path("test.jsonl"), "--neuron", "0",
                     "--out", path("w.tsv")})
                .code,
            0);
  EXPECT_EQ(run_cli({"--quiet", "analyze", "heatmap", "--activations", path("test.jsonl"), "--sentence", "0",
                     "--neuron", "0", "--format", "html", "--out", path("h.html")})
                .code,
            0);
  EXPECT_NE(slurp(path("h.html")).find("class=\"heatmap\""), std::string::npos);
  const auto rep = run_cli({"--quiet", "report", "--model", m, "--ranking", "probe=" + r, "--salient", "25",
                            "--out-dir", path("rep")});
  ASSERT_EQ(rep.code, 0) << rep.err;
  EXPECT_TRUE(fs::exists(dir / "rep" / "index.md"));
  EXPECT_TRUE(fs::exists(dir / "rep" / "ranking_probe.txt"));
}

TEST_F(CliTest, SmallLanguageModelPipeline) {
  {
    std::ifstream in(std::string(NLENS_DATA_DIR) + "/corpus/train.txt");
    std::ofstream train(path("train.txt")), held(path("held.txt"));
    std::string line;
    for (int i = 0; i < 90 && std::getline(in, line); ++i) train << line << '\n';
    for (int i = 0; i < 20 && std::getline(in, line); ++i) held << line << '\n';
  }
  const std::vector<std::string> tiny{"--embedding-dim", "6", "--hidden-dim", "5", "--layers", "2",
                                      "--epochs",        "1", "--vocab-cap",  "60"};
  std::vector<std::string> acts;
  for (int k = 0; k < 3; ++k) {
    std::vector<std::string> args{"--quiet", "lm-train", "--corpus", path("train.txt"), "--part", std::to_string(k),
                                  "--parts", "3", "--out", path("lm" + std::to_string(k) + ".txt")};
    args.insert(args.end(), tiny.begin(), tiny.end());
    const auto r = run_cli(args);
    ASSERT_EQ(r.code, 0) << r.err;
    acts.push_back(path("a" + std::to_string(k) + ".jsonl"));
    ASSERT_EQ(run_cli({"--quiet", "lm-extract", "--model", path("lm" + std::to_string(k) + ".txt"), "--corpus",
                       path("held.txt"), "--out", acts.back()})
                  .code,
              0);
  }
  EXPECT_EQ(load_activations(acts[0]).dim, 10u);
  std::vector<std::string> cross{"--quiet", "rank-cross", "--target", "0", "--workers", "2", "--scores",
                                 path("scores.txt"), "--out", path("cross.txt")};
  for (const auto& a : acts) {
    cross.push_back("--activations");
    cross.push_back(a);
  }
  ASSERT_EQ(run_cli(cross).code, 0);
  EXPECT_TRUE(load_ranking(path("cross.txt")).is_permutation());
  for (const std::string direction : {"top", "bottom"}) {
    const auto r = run_cli({"--quiet", "lm-ablate", "--model", path("lm0.txt"), "--corpus", path("held.txt"),
                            "--ranking", path("cross.txt"), "--direction", direction, "--steps", "0", "2", "--out",
                            path("curve_" + direction + ".csv")});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  const auto top = load_curve(path("curve_top.csv"));
  const auto bottom = load_curve(path("curve_bottom.csv"));
  ASSERT_EQ(top.points.size(), 2u);
  EXPECT_EQ(top.points[0].metric, bottom.points[0].metric);
  EXPECT_EQ(top.metric_kind, "perplexity");
  // A ranking of the wrong width is rejected.
  EXPECT_EQ(run_cli({"--quiet", "rank-cross", "--activations", acts[0], "--method", "variance", "--out",
                     path("var.txt")})
                .code,
            0);
  std::ofstream(path("short.txt")) << "# method=x\n0\n1\n";
  EXPECT_EQ(run_cli({"--quiet", "lm-ablate", "--model", path("lm0.txt"), "--corpus", path("held.txt"), "--ranking",
                     path("short.txt"), "--out", path("bad.csv")})
                .code,
            1);
}

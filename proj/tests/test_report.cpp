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
#include <functional>
#include <regex>
#include <sstream>

#include "nlens/random.hpp"
#include "nlens/report.hpp"
#include "nlens/synthetic.hpp"
#include "support/oracles.hpp"

using namespace nlens;
namespace fs = std::filesystem;

namespace {

ActivationDataset ramp(std::size_t n) {
  ActivationDataset data;
  data.dim = 2;
  Matrix block(static_cast<Eigen::Index>(n), 2);
  std::vector<std::string> words;
  for (std::size_t t = 0; t < n; ++t) {
    block(static_cast<Eigen::Index>(t), 0) = -1.0 + 2.0 * static_cast<double>(t) / static_cast<double>(n - 1);
    block(static_cast<Eigen::Index>(t), 1) = 0.0;
    words.push_back("t" + std::to_string(t));
  }
  data.sentences = {words};
  data.activations = {block};
  return data;
}

ActivationDataset random_words(std::uint64_t seed, std::size_t sentences) {
  Rng rng(seed);
  ActivationDataset data;
  data.dim = 3;
  for (std::size_t s = 0; s < sentences; ++s) {
    const std::size_t n = 1 + rng.index(9);
    std::vector<std::string> words;
    Matrix block(static_cast<Eigen::Index>(n), 3);
    for (std::size_t t = 0; t < n; ++t) {
      words.push_back("w" + std::to_string(rng.index(12)));
      for (Eigen::Index j = 0; j < 3; ++j) block(static_cast<Eigen::Index>(t), j) = rng.normal();
    }
    data.sentences.push_back(words);
    data.activations.push_back(block);
  }
  return data;
}

std::vector<int> text_buckets(const std::string& text) {
  std::vector<int> out;
  const std::regex cell(R"(\(([+-]?\d)\))");
  const std::string body = text.substr(text.find('\n') + 1);
  for (auto it = std::sregex_iterator(body.begin(), body.end(), cell); it != std::sregex_iterator(); ++it) {
    out.push_back(std::stoi((*it)[1]));
  }
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST(TopWords, DominantWord) {
  ActivationDataset data;
  data.dim = 1;
  data.sentences = {{"i", "do", "not", "know"}, {"not", "now"}};
  Matrix a(4, 1), b(2, 1);
  a << 0, 0, 1, 0;
  b << 1, 0;
  data.activations = {a, b};
  const auto profile = top_words_for_neuron(data, 0, 3, 1);
  ASSERT_FALSE(profile.words.empty());
  EXPECT_EQ(profile.words[0].word, "not");
  EXPECT_EQ(profile.words[0].score, 1.0);
  EXPECT_EQ(profile.words[0].count, 2u);
  EXPECT_EQ(profile.statistic, "mean_abs");
  EXPECT_THROW(top_words_for_neuron(data, 1, 3), InputError);
}

TEST(TopWords, MatchesAveragingOracle) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto data = random_words(seed, 60);
    for (std::size_t neuron = 0; neuron < 3; ++neuron) {
      const auto want = oracle::word_means(data, neuron, 5);
      const auto profile = top_words_for_neuron(data, neuron, 100, 5);
      EXPECT_EQ(profile.words.size(), want.size());
      for (std::size_t i = 0; i < profile.words.size(); ++i) {
        const auto& w = profile.words[i];
        EXPECT_GE(w.count, 5u);
        EXPECT_NEAR(w.score, want.at(w.word), 1e-12);
        if (i) {
          EXPECT_GE(profile.words[i - 1].score, w.score);
        }
      }
    }
  }
}

TEST(TopWords, InvariantToSentenceOrder) {
  auto data = random_words(4, 80);
  const auto before = top_words_for_neuron(data, 1, 20, 3);
  Rng rng(1);
  const auto perm = rng.permutation(data.sentences.size());
  ActivationDataset shuffled = data;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    shuffled.sentences[i] = data.sentences[perm[i]];
    shuffled.activations[i] = data.activations[perm[i]];
  }
  const auto after = top_words_for_neuron(shuffled, 1, 20, 3);
  ASSERT_EQ(after.words.size(), before.words.size());
  for (std::size_t i = 0; i < before.words.size(); ++i) {
    EXPECT_EQ(after.words[i].word, before.words[i].word);
    EXPECT_EQ(after.words[i].score, before.words[i].score);
  }
}

TEST(Heatmap, ZeroActivationsAreNeutral) {
  const auto data = ramp(5);
  const std::string text = heatmap(data, 0, 1, HeatmapFormat::kText);
  EXPECT_EQ(text_buckets(text), (std::vector<int>{0, 0, 0, 0, 0}));
  const std::string html = heatmap(data, 0, 1, HeatmapFormat::kHtml);
  std::size_t white = 0;
  for (std::size_t pos = 0; (pos = html.find("rgb(255,255,255)", pos)) != std::string::npos; ++pos) ++white;
  EXPECT_EQ(white, 5u);
}

TEST(Heatmap, RampIsMonotone) {
  const auto data = ramp(9);
  const auto buckets = text_buckets(heatmap(data, 0, 0, HeatmapFormat::kText));
  EXPECT_EQ(buckets, (std::vector<int>{-4, -3, -2, -1, 0, 1, 2, 3, 4}));
  const std::string html = heatmap(data, 0, 0, HeatmapFormat::kHtml);
  std::vector<std::tuple<int, int, int>> colors;
  const std::regex rgb(R"(rgb\((\d+),(\d+),(\d+)\))");
  for (auto it = std::sregex_iterator(html.begin(), html.end(), rgb); it != std::sregex_iterator(); ++it) {
    colors.emplace_back(std::stoi((*it)[1]), std::stoi((*it)[2]), std::stoi((*it)[3]));
  }
  ASSERT_EQ(colors.size(), 9u);
  EXPECT_EQ(colors.front(), std::make_tuple(255, 0, 0));
  EXPECT_EQ(colors[4], std::make_tuple(255, 255, 255));
  EXPECT_EQ(colors.back(), std::make_tuple(0, 0, 255));
  for (std::size_t i = 1; i < colors.size(); ++i) {
    // Red channel never rises, blue channel never falls along the ramp.
    EXPECT_LE(std::get<0>(colors[i]), std::get<0>(colors[i - 1]));
    EXPECT_GE(std::get<2>(colors[i]), std::get<2>(colors[i - 1]));
  }
}

TEST(Heatmap, HtmlIsWellFormedWithOneCellPerToken) {
  auto data = random_words(9, 20);
  data.sentences[3][0] = "<b>&\"'";
  for (std::size_t s = 0; s < data.sentences.size(); ++s) {
    const std::string html = heatmap(data, s, 2, HeatmapFormat::kHtml);
    const auto check = oracle::check_markup(html, "cell");
    EXPECT_TRUE(check.ok) << check.error;
    EXPECT_EQ(check.matching_class, data.sentences[s].size());
    EXPECT_EQ(html.find("http"), std::string::npos);
  }
  EXPECT_NE(heatmap(data, 3, 2, HeatmapFormat::kHtml).find("&lt;b&gt;&amp;&quot;&#39;"), std::string::npos);
}

TEST(Heatmap, TextHasOneCellPerTokenAndDoesNotMutate) {
  const auto data = random_words(10, 5);
  const auto copy = data;
  for (std::size_t s = 0; s < data.sentences.size(); ++s) {
    EXPECT_EQ(text_buckets(heatmap(data, s, 0, HeatmapFormat::kText)).size(), data.sentences[s].size());
  }
  for (std::size_t s = 0; s < data.sentences.size(); ++s) EXPECT_TRUE(copy.activations[s] == data.activations[s]);
  EXPECT_THROW(heatmap(data, 5, 0, HeatmapFormat::kText), InputError);
  EXPECT_THROW(heatmap(data, 0, 3, HeatmapFormat::kText), InputError);
  EXPECT_THROW(parse_heatmap_format("svg"), InputError);
}

TEST(SummaryReport, EmptyAnalysesGiveMetadataOnly) {
  const fs::path dir = fresh_dir("nlens_report_empty");
  ProbeModel model(4, {"A", "B"});
  model.lambda1 = 1e-5;
  const auto files = summary_report(model, {}, {}, dir.string());
  EXPECT_EQ(files, (std::vector<std::string>{"index.md"}));
  const std::string index = slurp(dir / "index.md");
  EXPECT_NE(index.find("neurons: 4"), std::string::npos);
  EXPECT_NE(index.find("lambda1: 1.0000000000000001e-05"), std::string::npos);
  EXPECT_EQ(index.find("## Analyses"), std::string::npos);
  EXPECT_EQ(index.find("## Rankings"), std::string::npos);
  fs::remove_all(dir);
}

TEST(SummaryReport, RankingAndCurveReferenced) {
  const fs::path dir = fresh_dir("nlens_report_one");
  ProbeModel model(3, {"A"});
  model.weights << 0.1, 0.5, 0.2;
  NeuronRanking r = extract_ranking(model);
  AblationCurve curve{Direction::kTop, "accuracy", {{0, 0.9}, {1, 0.5}}};
  const auto files = summary_report(model, {{"probe", r}}, {CurveAnalysis{"top", curve}}, dir.string());
  ASSERT_EQ(files.size(), 3u);
  const std::string index = slurp(dir / "index.md");
  for (const auto& f : files) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
    if (f != "index.md") {
      EXPECT_NE(index.find("(" + f + ")"), std::string::npos) << f;
    }
  }
  std::ifstream ranking_in(dir / "ranking_probe.txt");
  EXPECT_EQ(read_ranking(ranking_in).order, r.order);
  fs::remove_all(dir);
}

TEST(SummaryReport, ByteIdenticalOnRegeneration) {
  const auto data = make_planted();
  ProbeConfig cfg;
  cfg.epochs = 2;
  const auto model = train_probe(data.train, 1e-3, 1e-5, cfg).first;
  NeuronRanking a = extract_ranking(model);
  NeuronRanking b = extract_ranking(model, 10);
  const std::vector<Analysis> analyses{SalientCountsAnalysis{25}, SharedNeuronsAnalysis{{0, 1}, 30},
                                       CurveAnalysis{"c", {Direction::kTop, "accuracy", {{0, 1.0}}}}};
  const fs::path d1 = fresh_dir("nlens_report_a"), d2 = fresh_dir("nlens_report_b");
  const auto f1 = summary_report(model, {{"a", a}, {"b", b}}, analyses, d1.string());
  const auto f2 = summary_report(model, {{"a", a}, {"b", b}}, analyses, d2.string());
  ASSERT_EQ(f1, f2);
  EXPECT_NE(std::find(f1.begin(), f1.end(), "overlap.tsv"), f1.end());
  for (const auto& f : f1) {
    const std::string x = slurp(d1 / f), y = slurp(d2 / f);
    EXPECT_EQ(std::hash<std::string>{}(x), std::hash<std::string>{}(y)) << f;
    EXPECT_EQ(x, y) << f;
  }
  EXPECT_THROW(summary_report(ProbeModel(5, {"A"}), {{"a", a}}, {}, d1.string()), InputError);
  fs::remove_all(d1);
  fs::remove_all(d2);
}

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

#include <cmath>
#include <sstream>

#include "nlens/ablation.hpp"
#include "nlens/synthetic.hpp"

using namespace nlens;

namespace {

struct Fixture {
  PlantedData data = make_planted();
  ProbeModel model;
  NeuronRanking ranking;
  Fixture() {
    model = train_probe(data.train, 1e-5, 1e-5).first;
    ranking = extract_ranking(model);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

LabeledDataset single_vector(const std::vector<double>& values) {
  ActivationDataset base;
  base.dim = values.size();
  base.sentences = {{"w"}};
  Matrix row(1, static_cast<Eigen::Index>(values.size()));
  for (std::size_t j = 0; j < values.size(); ++j) row(0, static_cast<Eigen::Index>(j)) = values[j];
  base.activations = {row};
  return attach_labels(base, {{"A"}});
}

}  // namespace

TEST(PercentCount, RoundingRule) {
  EXPECT_EQ(percent_count(10, 100), 10u);
  EXPECT_EQ(percent_count(10, 128), 12u);
  EXPECT_EQ(percent_count(0.1, 100), 1u);
  EXPECT_EQ(percent_count(100, 7), 7u);
  EXPECT_EQ(percent_count(20, 5), 1u);
  EXPECT_THROW(percent_count(0, 10), InputError);
  EXPECT_THROW(percent_count(101, 10), InputError);
}

TEST(MaskDataset, Examples) {
  const auto data = single_vector({3.0, 5.0, 7.0});
  const std::vector<std::size_t> one{1};
  const auto masked = mask_dataset(data, one);
  EXPECT_EQ(masked.base.activations[0](0, 0), 0.0);
  EXPECT_EQ(masked.base.activations[0](0, 1), 5.0);
  EXPECT_EQ(masked.base.activations[0](0, 2), 0.0);
  EXPECT_EQ(masked.labels, data.labels);
  EXPECT_EQ(masked.base.sentences, data.base.sentences);
  const auto all = mask_dataset(data, all_neurons(3));
  EXPECT_TRUE(all.base.activations[0] == data.base.activations[0]);
  const auto none = mask_dataset(data, {});
  EXPECT_EQ(none.base.activations[0].cwiseAbs().sum(), 0.0);
  const std::vector<std::size_t> bad{3};
  EXPECT_THROW(mask_dataset(data, bad), InputError);
}

TEST(MaskDataset, Idempotent) {
  const auto& f = fixture();
  const std::vector<std::size_t> keep = f.ranking.top(30);
  const auto once = mask_dataset(f.data.test, keep);
  const auto twice = mask_dataset(once, keep);
  for (std::size_t s = 0; s < once.base.activations.size(); ++s) {
    EXPECT_TRUE(once.base.activations[s] == twice.base.activations[s]);
  }
}

TEST(EvaluateMasked, KeepAllIsExactAndModelUntouched) {
  const auto& f = fixture();
  const ProbeModel before = f.model;
  EXPECT_EQ(evaluate_masked(f.model, f.data.test, all_neurons(100)), evaluate(f.model, f.data.test));
  EXPECT_TRUE(before.weights == f.model.weights);
}

TEST(EvaluateMasked, PlantedVersusNoise) {
  const auto& f = fixture();
  EXPECT_GE(evaluate_masked(f.model, f.data.test, f.data.planted), 0.90);
  std::vector<std::size_t> noise;
  for (std::size_t j = 0; j < 100 && noise.size() < 10; ++j) {
    if (!std::binary_search(f.data.planted.begin(), f.data.planted.end(), j)) noise.push_back(j);
  }
  EXPECT_LE(evaluate_masked(f.model, f.data.test, noise), 0.2 + 0.15);
  const std::size_t k = percent_count(10, 100);
  EXPECT_GT(evaluate_masked(f.model, f.data.test, f.ranking.top(k)),
            evaluate_masked(f.model, f.data.test, f.ranking.bottom(k)) + 0.5);
}

TEST(RetrainSubset, KeepAllMatchesPlainTraining) {
  const auto& f = fixture();
  ProbeConfig cfg;
  cfg.epochs = 3;
  const double retrained = retrain_subset(f.data.train, f.data.test, all_neurons(100), 1e-5, 1e-5, cfg);
  const auto plain = train_probe(f.data.train, 1e-5, 1e-5, cfg).first;
  EXPECT_EQ(retrained, evaluate(plain, f.data.test));
  EXPECT_THROW(retrain_subset(f.data.train, f.data.test, {}, 0, 0), InputError);
}

TEST(RetrainSubset, TopTwentyPercentRegainsAccuracy) {
  const auto& f = fixture();
  const double all = evaluate(f.model, f.data.test);
  const std::size_t k = percent_count(20, 100);
  const double top = retrain_subset(f.data.train, f.data.test, f.ranking.top(k), 1e-5, 1e-5);
  const double bottom = retrain_subset(f.data.train, f.data.test, f.ranking.bottom(k), 1e-5, 1e-5);
  EXPECT_GE(top, 0.9 * all);
  EXPECT_GT(top, bottom);
}

TEST(AblationCurve, TopFirstBelowBottomFirst) {
  const auto& f = fixture();
  const std::vector<std::size_t> steps{0, 5, 10, 20, 50, 100};
  const auto evaluator = masked_probe_evaluator(f.model, f.data.test);
  const auto top = ablation_curve(f.ranking, Direction::kTop, steps, evaluator);
  const auto bottom = ablation_curve(f.ranking, Direction::kBottom, steps, evaluator);
  ASSERT_EQ(top.points.size(), steps.size());
  EXPECT_EQ(top.metric_kind, "accuracy");
  // Ablating nothing or everything is the same in both directions.
  EXPECT_EQ(top.points.front().metric, bottom.points.front().metric);
  EXPECT_EQ(top.points.back().metric, bottom.points.back().metric);
  for (std::size_t i = 1; i + 1 < steps.size(); ++i) {
    EXPECT_LT(top.points[i].metric, bottom.points[i].metric) << "step " << steps[i];
  }
}

TEST(AblationCurve, StepValidationAndDeterminism) {
  const auto& f = fixture();
  const auto evaluator = masked_probe_evaluator(f.model, f.data.test);
  const std::vector<std::size_t> unsorted{5, 3};
  EXPECT_THROW(ablation_curve(f.ranking, Direction::kTop, unsorted, evaluator), InputError);
  const std::vector<std::size_t> too_many{101};
  EXPECT_THROW(ablation_curve(f.ranking, Direction::kTop, too_many, evaluator), InputError);
  EXPECT_THROW(ablation_curve(f.ranking, Direction::kTop, {}, evaluator), InputError);
  const std::vector<std::size_t> steps{1, 2, 3};
  const auto a = ablation_curve(f.ranking, Direction::kBottom, steps, evaluator);
  const auto b = ablation_curve(f.ranking, Direction::kBottom, steps, evaluator);
  for (std::size_t i = 0; i < steps.size(); ++i) EXPECT_EQ(a.points[i].metric, b.points[i].metric);
  Evaluator broken{"accuracy", [](std::span<const std::size_t>) { return std::nan(""); }};
  EXPECT_THROW(ablation_curve(f.ranking, Direction::kTop, steps, broken), NumericalError);
}

TEST(AblationCurve, ToyLmEndpoints) {
  ToyLMConfig cfg;
  cfg.embedding_dim = 4;
  cfg.hidden_dim = 3;
  const Corpus corpus{{"a", "b", "c"}, {"b", "a"}};
  ToyLM lm(cfg, Vocabulary::build(corpus, 100));
  lm.initialize(3);
  NeuronRanking ranking;
  ranking.order = {5, 0, 3, 1, 4, 2};
  const auto evaluator = toy_lm_evaluator(lm, corpus);
  const std::vector<std::size_t> zero{0};
  const auto baseline = ablation_curve(ranking, Direction::kTop, zero, evaluator);
  EXPECT_EQ(baseline.points[0].metric, perplexity(lm, corpus));
  EXPECT_EQ(baseline.metric_kind, "perplexity");
  const std::vector<std::size_t> full{6};
  const auto everything = ablation_curve(ranking, Direction::kBottom, full, evaluator);
  EXPECT_EQ(everything.points[0].metric, ablate_model(lm, corpus, all_neurons(6)));
}

TEST(CurveFile, RoundTripAndFormat) {
  AblationCurve curve{Direction::kBottom, "perplexity", {{0, 12.5}, {20, 14.25}}};
  std::stringstream buffer;
  write_curve(buffer, curve);
  EXPECT_EQ(buffer.str(), "# direction=bottom metric=perplexity\n0,12.5\n20,14.25\n");
  const auto back = read_curve(buffer);
  EXPECT_EQ(back.direction, Direction::kBottom);
  EXPECT_EQ(back.metric_kind, "perplexity");
  ASSERT_EQ(back.points.size(), 2u);
  EXPECT_EQ(back.points[1].count, 20u);
  EXPECT_EQ(back.points[1].metric, 14.25);
  std::istringstream headerless("1,2\n");
  EXPECT_THROW(read_curve(headerless), InputError);
  std::istringstream junk("# direction=top metric=x\n1;2\n");
  EXPECT_THROW(read_curve(junk), InputError);
  EXPECT_THROW(parse_direction("sideways"), InputError);
}

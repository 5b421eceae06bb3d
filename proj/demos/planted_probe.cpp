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


// Trains a probe on planted data, ranks neurons, and prints masked and
// retrained accuracies for the top and bottom of the ranking.

#include <cstdio>

#include "nlens/ablation.hpp"
#include "nlens/probe.hpp"
#include "nlens/ranking.hpp"
#include "nlens/synthetic.hpp"

int main() {
  const nlens::PlantedData data = nlens::make_planted();
  auto [model, report] = nlens::train_probe(data.train, 1e-5, 1e-5, {}, &data.test);
  const nlens::NeuronRanking ranking = nlens::extract_ranking(model);
  std::printf("test accuracy      %.4f\n", *report.test_accuracy);
  std::printf("planted neurons   ");
  for (std::size_t j : data.planted) std::printf(" %zu", j);
  std::printf("\nranking top 15    ");
  for (std::size_t j : ranking.top(15)) std::printf(" %zu", j);
  std::printf("\n");
  for (double pct : {10.0, 20.0}) {
    const std::size_t k = nlens::percent_count(pct, model.dim());
    const auto top = ranking.top(k);
    const auto bottom = ranking.bottom(k);
    std::printf("keep %2.0f%%  masked top %.4f bottom %.4f  retrained top %.4f bottom %.4f\n", pct,
                nlens::evaluate_masked(model, data.test, top), nlens::evaluate_masked(model, data.test, bottom),
                nlens::retrain_subset(data.train, data.test, top, 1e-5, 1e-5),
                nlens::retrain_subset(data.train, data.test, bottom, 1e-5, 1e-5));
  }
  return 0;
}

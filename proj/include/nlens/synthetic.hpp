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


#pragma once

// Planted-signal datasets with a known set of informative neurons.
//
// Each planted neuron is tied to one unordered pair of classes: its mean is
// +separation/2 for those two classes and -separation/2 for the rest, plus
// unit Gaussian noise. With 5 classes and 10 planted neurons every pair is
// used once, so any two classes differ in the sign pattern of 6 neurons.
// All remaining neurons are pure N(0, 1) noise.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nlens/activation_store.hpp"
#include "nlens/errors.hpp"
#include "nlens/random.hpp"

namespace nlens {

struct PlantedConfig {
  std::size_t dim = 100;
  std::size_t classes = 5;
  std::size_t planted = 10;
  std::size_t train_tokens = 5000;
  std::size_t test_tokens = 1000;
  std::size_t sentence_length = 10;
  double separation = 2.0;  // gap between the two class means, in noise sd
  // Scatter planted neurons over random indices instead of 0..planted-1.
  bool scatter = true;
  std::uint64_t seed = 7;
};

struct PlantedData {
  LabeledDataset train;
  LabeledDataset test;
  std::vector<std::size_t> planted;  // ascending
  // Per planted neuron, the class pair with the positive mean.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
};

namespace detail {

inline LabeledDataset planted_split(const PlantedConfig& c, const std::vector<std::size_t>& planted,
                                    const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                                    std::size_t tokens, Rng& rng, const std::vector<std::string>& vocab) {
  ActivationDataset base;
  base.dim = c.dim;
  std::vector<std::vector<std::string>> tags;
  const double half = c.separation / 2.0;
  for (std::size_t done = 0; done < tokens;) {
    const std::size_t n = std::min(c.sentence_length, tokens - done);
    Matrix block(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c.dim));
    std::vector<std::string> words, sentence_tags;
    for (std::size_t t = 0; t < n; ++t) {
      const std::size_t label = rng.index(c.classes);
      for (std::size_t j = 0; j < c.dim; ++j) block(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = rng.normal();
      for (std::size_t i = 0; i < planted.size(); ++i) {
        const bool on = label == pairs[i].first || label == pairs[i].second;
        block(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(planted[i])) += on ? half : -half;
      }
      words.push_back("w" + std::to_string(label));
      sentence_tags.push_back(vocab[label]);
    }
    base.sentences.push_back(std::move(words));
    base.activations.push_back(std::move(block));
    tags.push_back(std::move(sentence_tags));
    done += n;
  }
  return attach_labels(base, tags, vocab);
}

}  // namespace detail

inline PlantedData make_planted(const PlantedConfig& c = {}) {
  if (c.classes < 2) throw InputError("planted data needs at least two classes");
  if (c.planted > c.dim) throw InputError("more planted neurons than dimensions");
  if (c.sentence_length == 0) throw InputError("sentence length must be positive");
  Rng rng(c.seed);
  PlantedData out;
  std::vector<std::pair<std::size_t, std::size_t>> all_pairs;
  for (std::size_t a = 0; a < c.classes; ++a) {
    for (std::size_t b = a + 1; b < c.classes; ++b) all_pairs.emplace_back(a, b);
  }
  for (std::size_t i = 0; i < c.planted; ++i) out.pairs.push_back(all_pairs[i % all_pairs.size()]);
  if (c.scatter) {
    const std::vector<std::size_t> perm = rng.permutation(c.dim);
    out.planted.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(c.planted));
    std::sort(out.planted.begin(), out.planted.end());
  } else {
    for (std::size_t i = 0; i < c.planted; ++i) out.planted.push_back(i);
  }
  std::vector<std::string> vocab;
  for (std::size_t k = 0; k < c.classes; ++k) vocab.push_back("c" + std::to_string(k));
  out.train = detail::planted_split(c, out.planted, out.pairs, c.train_tokens, rng, vocab);
  out.test = detail::planted_split(c, out.planted, out.pairs, c.test_tokens, rng, vocab);
  return out;
}

}  // namespace nlens

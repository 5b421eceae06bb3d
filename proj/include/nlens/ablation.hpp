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

// Ranking validation by ablation: masking probe inputs, retraining probes on
// neuron subsets, and clamping hidden units of a language model.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nlens/activation_store.hpp"
#include "nlens/detail/io.hpp"
#include "nlens/errors.hpp"
#include "nlens/probe.hpp"
#include "nlens/ranking.hpp"
#include "nlens/toylm.hpp"

namespace nlens {

enum class Direction { kTop, kBottom };

inline std::string to_string(Direction d) { return d == Direction::kTop ? "top" : "bottom"; }

inline Direction parse_direction(const std::string& text) {
  if (text == "top") return Direction::kTop;
  if (text == "bottom") return Direction::kBottom;
  throw InputError("direction must be 'top' or 'bottom', got '" + text + "'");
}

// "N% of neurons" as a count: max(1, floor(N * D / 100)).
inline std::size_t percent_count(double percent, std::size_t dim) {
  if (!(percent > 0.0 && percent <= 100.0)) throw InputError("percentage must be in (0, 100]");
  const auto count = static_cast<std::size_t>(std::floor(percent * static_cast<double>(dim) / 100.0 + 1e-9));
  return std::max<std::size_t>(1, std::min(count, dim));
}

// The first (top) or last (bottom) k neurons of a ranking.
inline std::vector<std::size_t> select_neurons(const NeuronRanking& ranking, Direction direction, std::size_t k) {
  return direction == Direction::kTop ? ranking.top(k) : ranking.bottom(k);
}

// Complement of `neurons` within 0..dim-1.
inline std::vector<std::size_t> complement(std::span<const std::size_t> neurons, std::size_t dim) {
  std::vector<bool> hit(dim, false);
  for (std::size_t j : neurons) hit.at(j) = true;
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < dim; ++j) {
    if (!hit[j]) out.push_back(j);
  }
  return out;
}

inline std::vector<std::size_t> all_neurons(std::size_t dim) {
  std::vector<std::size_t> out(dim);
  for (std::size_t j = 0; j < dim; ++j) out[j] = j;
  return out;
}

// Zeros every activation outside `keep`; tokens and labels are untouched.
inline LabeledDataset mask_dataset(const LabeledDataset& data, std::span<const std::size_t> keep) {
  const std::size_t dim = data.dim();
  Vector mask = Vector::Zero(static_cast<Eigen::Index>(dim));
  for (std::size_t j : keep) {
    if (j >= dim) throw InputError("neuron index " + std::to_string(j) + " out of range (dim " + std::to_string(dim) + ")");
    mask(static_cast<Eigen::Index>(j)) = 1.0;
  }
  LabeledDataset out = data;
  for (Matrix& block : out.base.activations) {
    for (Eigen::Index j = 0; j < block.cols(); ++j) {
      if (mask(j) == 0.0) block.col(j).setZero();
    }
  }
  return out;
}

// Accuracy of an already trained probe on inputs masked down to `keep`.
inline double evaluate_masked(const ProbeModel& model, const LabeledDataset& test, std::span<const std::size_t> keep) {
  return evaluate(model, mask_dataset(test, keep));
}

// Trains a fresh probe on masked training data and scores it on masked test data.
inline double retrain_subset(const LabeledDataset& train, const LabeledDataset& test, std::span<const std::size_t> keep,
                             double lambda1, double lambda2, const ProbeConfig& config = {}) {
  if (keep.empty()) throw InputError("retraining needs at least one kept neuron");
  const LabeledDataset masked_train = mask_dataset(train, keep);
  auto [model, report] = train_probe(masked_train, lambda1, lambda2, config);
  return evaluate(model, mask_dataset(test, keep));
}

// Corpus perplexity with the given hidden units clamped to zero.
inline double ablate_model(const ToyLM& lm, const Corpus& corpus, std::span<const std::size_t> clamp) {
  return lm.likelihood(corpus, clamp).perplexity();
}

// ---------------------------------------------------------------------------
// Curves

struct CurvePoint {
  std::size_t count = 0;
  double metric = 0.0;
};

struct AblationCurve {
  Direction direction = Direction::kTop;
  std::string metric_kind;  // accuracy | perplexity
  std::vector<CurvePoint> points;
};

// Maps the set of ablated (zeroed) neurons to a metric.
struct Evaluator {
  std::string metric_kind;
  std::function<double(std::span<const std::size_t>)> evaluate;
};

// Probe accuracy with the ablated neurons masked out of the test inputs.
inline Evaluator masked_probe_evaluator(const ProbeModel& model, const LabeledDataset& test) {
  return {"accuracy", [&model, &test](std::span<const std::size_t> ablated) {
            return evaluate_masked(model, test, complement(ablated, model.dim()));
          }};
}

// Language model perplexity with the ablated units clamped.
inline Evaluator toy_lm_evaluator(const ToyLM& lm, const Corpus& corpus) {
  return {"perplexity",
          [&lm, &corpus](std::span<const std::size_t> ablated) { return ablate_model(lm, corpus, ablated); }};
}

// One point per step count: ablate that many neurons from the chosen end of
// the ranking and record the metric.
inline AblationCurve ablation_curve(const NeuronRanking& ranking, Direction direction,
                                    std::span<const std::size_t> steps, const Evaluator& evaluator) {
  if (steps.empty()) throw InputError("ablation curve needs at least one step");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i] > ranking.size()) throw InputError("ablation step exceeds the number of neurons");
    if (i > 0 && steps[i] <= steps[i - 1]) throw InputError("ablation steps must be strictly increasing");
  }
  AblationCurve curve;
  curve.direction = direction;
  curve.metric_kind = evaluator.metric_kind;
  for (std::size_t k : steps) {
    const std::vector<std::size_t> ablated = select_neurons(ranking, direction, k);
    const double metric = evaluator.evaluate(ablated);
    if (!std::isfinite(metric)) throw NumericalError("ablation metric is not finite at step " + std::to_string(k));
    curve.points.push_back({k, metric});
  }
  return curve;
}

// Header "# direction=<d> metric=<m>", then "step,metric" lines.
inline void write_curve(std::ostream& out, const AblationCurve& curve) {
  out << "# direction=" << to_string(curve.direction) << " metric=" << curve.metric_kind << '\n';
  std::string line;
  for (const CurvePoint& p : curve.points) {
    line = std::to_string(p.count) + ',';
    detail::append_double(line, p.metric);
    out << line << '\n';
  }
}

inline void save_curve(const std::string& path, const AblationCurve& curve) {
  auto out = detail::open_output(path);
  write_curve(out, curve);
  detail::finish_output(out, path);
}

inline AblationCurve read_curve(std::istream& in) {
  AblationCurve curve;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    const std::string_view text = detail::strip_cr(line);
    if (text.empty()) continue;
    if (text.front() == '#') {
      for (const std::string& item : detail::split_whitespace(text.substr(1))) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = item.substr(0, eq);
        if (key == "direction") curve.direction = parse_direction(item.substr(eq + 1));
        if (key == "metric") curve.metric_kind = item.substr(eq + 1);
      }
      header = true;
      continue;
    }
    const auto comma = text.find(',');
    if (comma == std::string_view::npos) throw InputError("curve line must be 'step,metric'");
    CurvePoint p;
    try {
      p.count = static_cast<std::size_t>(std::stoull(std::string(text.substr(0, comma))));
      p.metric = std::stod(std::string(text.substr(comma + 1)));
    } catch (const std::exception&) {
      throw InputError("curve line must be 'step,metric'");
    }
    curve.points.push_back(p);
  }
  if (!header) throw InputError("curve file is missing its header line");
  return curve;
}

inline AblationCurve load_curve(const std::string& path) {
  auto in = detail::open_input(path);
  return read_curve(in);
}

}  // namespace nlens

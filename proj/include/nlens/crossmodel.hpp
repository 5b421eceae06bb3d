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

// Unsupervised neuron rankings.
//
// A neuron of model i is scored by its best Pearson correlation with any
// neuron of any other model trained for the same task. Activation matrices
// are (tokens x neurons), one column per neuron trace, and every model must
// have been run over the same tokens.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "nlens/activation_store.hpp"
#include "nlens/detail/io.hpp"
#include "nlens/errors.hpp"
#include "nlens/ranking.hpp"

namespace nlens {

namespace detail {

// Column-centered copy plus the sum of squares of each centered column.
struct CenteredTraces {
  Matrix centered;
  Vector sum_squares;
};

inline CenteredTraces center_columns(const Matrix& traces) {
  CenteredTraces out;
  out.centered = traces;
  out.sum_squares.resize(traces.cols());
  const double count = static_cast<double>(traces.rows());
  for (Eigen::Index j = 0; j < traces.cols(); ++j) {
    double sum = 0.0;
    for (Eigen::Index t = 0; t < traces.rows(); ++t) sum += traces(t, j);
    const double mean = sum / count;
    double ss = 0.0;
    for (Eigen::Index t = 0; t < traces.rows(); ++t) {
      const double d = traces(t, j) - mean;
      out.centered(t, j) = d;
      ss += d * d;
    }
    out.sum_squares(j) = ss;
  }
  return out;
}

// Correlation of two centered traces. The accumulation order is fixed and
// symmetric in the arguments.
inline double centered_correlation(const double* x, double sxx, const double* y, double syy, Eigen::Index n) {
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  double sxy = 0.0;
  for (Eigen::Index t = 0; t < n; ++t) sxy += x[t] * y[t];
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

}  // namespace detail

// Pearson correlation; 0 when either trace is constant.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("pearson: traces have different lengths");
  if (x.size() < 2) throw InputError("pearson: traces need at least two values");
  const auto n = static_cast<Eigen::Index>(x.size());
  const Matrix both = [&] {
    Matrix m(n, 2);
    for (Eigen::Index t = 0; t < n; ++t) {
      m(t, 0) = x[static_cast<std::size_t>(t)];
      m(t, 1) = y[static_cast<std::size_t>(t)];
    }
    return m;
  }();
  const detail::CenteredTraces c = detail::center_columns(both);
  return detail::centered_correlation(c.centered.col(0).data(), c.sum_squares(0), c.centered.col(1).data(),
                                      c.sum_squares(1), n);
}

struct CrossModelScores {
  std::vector<double> score;
  std::vector<std::size_t> best_model;
  std::vector<std::size_t> best_neuron;
};

struct CrossModelOptions {
  // Use the signed maximum instead of the maximum absolute correlation.
  bool signed_max = false;
  // Target neurons are split across this many threads; results do not
  // depend on the count.
  std::size_t workers = 1;
};

inline CrossModelScores cross_model_scores(std::span<const Matrix> models, std::size_t target,
                                           const CrossModelOptions& options = {}) {
  if (models.size() < 2) throw InputError("cross-model scoring needs at least two models");
  if (target >= models.size()) throw InputError("target model index out of range");
  const Eigen::Index tokens = models[target].rows();
  if (tokens < 2) throw InputError("cross-model scoring needs at least two tokens");
  for (const Matrix& m : models) {
    if (m.rows() != tokens) throw InputError("models were evaluated on different numbers of tokens");
  }
  std::vector<detail::CenteredTraces> centered;
  centered.reserve(models.size());
  for (const Matrix& m : models) centered.push_back(detail::center_columns(m));

  const auto dim = static_cast<std::size_t>(models[target].cols());
  CrossModelScores out;
  out.score.assign(dim, options.signed_max ? -1.0 : 0.0);
  out.best_model.assign(dim, 0);
  out.best_neuron.assign(dim, 0);
  const detail::CenteredTraces& mine = centered[target];

  auto sweep = [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      bool found = false;
      double best = 0.0;
      for (std::size_t other = 0; other < models.size(); ++other) {
        if (other == target) continue;
        const detail::CenteredTraces& theirs = centered[other];
        for (Eigen::Index k = 0; k < theirs.centered.cols(); ++k) {
          double r = detail::centered_correlation(mine.centered.col(jj).data(), mine.sum_squares(jj),
                                                  theirs.centered.col(k).data(), theirs.sum_squares(k), tokens);
          if (!options.signed_max) r = std::abs(r);
          if (!found || r > best) {
            found = true;
            best = r;
            out.best_model[j] = other;
            out.best_neuron[j] = static_cast<std::size_t>(k);
          }
        }
      }
      out.score[j] = found ? best : 0.0;
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(options.workers, 1, std::max<std::size_t>(dim, 1));
  if (workers == 1) {
    sweep(0, dim);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (dim + workers - 1) / workers;
    for (std::size_t begin = 0; begin < dim; begin += chunk) {
      pool.emplace_back(sweep, begin, std::min(dim, begin + chunk));
    }
  }
  return out;
}

inline NeuronRanking rank_by_scores(const std::vector<double>& scores, std::string method) {
  NeuronRanking ranking;
  ranking.order = order_by_score_desc(scores);
  ranking.method = std::move(method);
  return ranking;
}

inline NeuronRanking cross_model_ranking(const CrossModelScores& scores) {
  return rank_by_scores(scores.score, "crossmodel");
}

inline NeuronRanking rank_by_variance(const Matrix& activations) {
  if (activations.rows() < 2) throw InputError("variance ranking needs at least two tokens");
  const detail::CenteredTraces c = detail::center_columns(activations);
  std::vector<double> variance(static_cast<std::size_t>(activations.cols()));
  for (Eigen::Index j = 0; j < activations.cols(); ++j) {
    variance[static_cast<std::size_t>(j)] = c.sum_squares(j) / static_cast<double>(activations.rows());
  }
  return rank_by_scores(variance, "variance");
}

// Mean absolute deviation from the neuron's mean, high to low.
inline NeuronRanking rank_by_mean_distance(const Matrix& activations) {
  if (activations.rows() < 1) throw InputError("mean-distance ranking needs at least one token");
  const detail::CenteredTraces c = detail::center_columns(activations);
  std::vector<double> distance(static_cast<std::size_t>(activations.cols()));
  for (Eigen::Index j = 0; j < activations.cols(); ++j) {
    distance[static_cast<std::size_t>(j)] =
        c.centered.col(j).cwiseAbs().sum() / static_cast<double>(activations.rows());
  }
  return rank_by_scores(distance, "mean_distance");
}

// Lines "neuron_index score best_model best_neuron".
inline void write_scores(std::ostream& out, const CrossModelScores& scores) {
  std::string line;
  for (std::size_t j = 0; j < scores.score.size(); ++j) {
    line = std::to_string(j) + ' ';
    detail::append_double(line, scores.score[j]);
    line += ' ' + std::to_string(scores.best_model[j]) + ' ' + std::to_string(scores.best_neuron[j]) + '\n';
    out << line;
  }
}

inline void save_scores(const std::string& path, const CrossModelScores& scores) {
  auto out = detail::open_output(path);
  write_scores(out, scores);
  detail::finish_output(out, path);
}

}  // namespace nlens

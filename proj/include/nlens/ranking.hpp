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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "nlens/detail/io.hpp"
#include "nlens/errors.hpp"
#include "nlens/probe.hpp"

namespace nlens {

// Neuron indices ordered from most to least important.
struct NeuronRanking {
  std::vector<std::size_t> order;
  std::string method;  // linguistic | crossmodel | variance | mean_distance
  std::map<std::string, std::string> params;

  std::size_t size() const { return order.size(); }

  bool is_permutation() const {
    std::vector<bool> seen(order.size(), false);
    for (std::size_t idx : order) {
      if (idx >= order.size() || seen[idx]) return false;
      seen[idx] = true;
    }
    return true;
  }

  std::vector<std::size_t> top(std::size_t k) const {
    k = std::min(k, order.size());
    return {order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k)};
  }

  std::vector<std::size_t> bottom(std::size_t k) const {
    k = std::min(k, order.size());
    return {order.end() - static_cast<std::ptrdiff_t>(k), order.end()};
  }
};

// Indices 0..n-1 sorted by score descending, lower index first on ties.
inline std::vector<std::size_t> order_by_score_desc(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

namespace detail {

inline void check_label(const ProbeModel& model, std::size_t label) {
  if (label >= model.num_labels()) {
    throw InputError("label id " + std::to_string(label) + " out of range (model has " +
                     std::to_string(model.num_labels()) + " labels)");
  }
}

inline void check_percentage(double p) {
  if (!(p > 0.0 && p <= 100.0)) throw InputError("percentage must be in (0, 100]");
}

}  // namespace detail

// Shortest prefix of the |weight|-sorted neurons for `label` whose
// cumulative |weight| reaches p% of the column's total mass.
inline std::vector<std::size_t> top_neurons_per_label(const ProbeModel& model, std::size_t label, double p) {
  detail::check_label(model, label);
  detail::check_percentage(p);
  std::vector<double> mass(model.dim());
  for (std::size_t j = 0; j < model.dim(); ++j) {
    mass[j] = std::abs(model.weights(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(label)));
  }
  const std::vector<std::size_t> order = order_by_score_desc(mass);
  double total = 0.0;
  for (std::size_t j : order) total += mass[j];
  std::vector<std::size_t> selected;
  if (total == 0.0) return selected;
  const double threshold = p / 100.0 * total;
  double cumulative = 0.0;
  for (std::size_t j : order) {
    selected.push_back(j);
    cumulative += mass[j];
    if (cumulative >= threshold) break;
  }
  return selected;
}

// Global ordering over all labels. Percentages alpha, 2*alpha, ... are swept
// up to 100 (100 is always visited last). At each step the union of the
// per-label salient sets is taken and neurons not yet ordered are appended,
// sorted by their largest |weight| over labels. Neurons with all-zero weights
// are appended at the end in index order.
inline NeuronRanking extract_ranking(const ProbeModel& model, double alpha = 1.0) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InputError("alpha must be positive");
  const std::size_t dim = model.dim();
  std::vector<double> peak(dim, 0.0);
  for (std::size_t j = 0; j < dim; ++j) {
    peak[j] = model.weights.row(static_cast<Eigen::Index>(j)).cwiseAbs().maxCoeff();
  }
  NeuronRanking ranking;
  ranking.method = "linguistic";
  ranking.params["alpha"] = detail::format_double(alpha);
  std::vector<bool> placed(dim, false);

  auto visit = [&](double p) {
    std::vector<std::size_t> fresh;
    for (std::size_t label = 0; label < model.num_labels(); ++label) {
      for (std::size_t j : top_neurons_per_label(model, label, p)) {
        if (!placed[j]) {
          placed[j] = true;
          fresh.push_back(j);
        }
      }
    }
    std::sort(fresh.begin(), fresh.end(), [&](std::size_t a, std::size_t b) {
      if (peak[a] != peak[b]) return peak[a] > peak[b];
      return a < b;
    });
    ranking.order.insert(ranking.order.end(), fresh.begin(), fresh.end());
  };

  for (std::size_t step = 1;; ++step) {
    const double p = static_cast<double>(step) * alpha;
    if (p >= 100.0) break;
    visit(p);
  }
  visit(100.0);
  for (std::size_t j = 0; j < dim; ++j) {
    if (!placed[j]) ranking.order.push_back(j);
  }
  return ranking;
}

struct LabelCount {
  std::string label;
  std::size_t count = 0;
};

// Number of salient neurons per label at p% of the weight mass.
inline std::vector<LabelCount> salient_count_per_label(const ProbeModel& model, double p = 25.0) {
  std::vector<LabelCount> out;
  for (std::size_t label = 0; label < model.num_labels(); ++label) {
    out.push_back({model.label_vocab[label], top_neurons_per_label(model, label, p).size()});
  }
  return out;
}

// |top-k(a) ∩ top-k(b)| / k.
inline double topk_overlap(const NeuronRanking& a, const NeuronRanking& b, std::size_t k) {
  if (a.size() != b.size()) throw InputError("rankings cover different numbers of neurons");
  if (k < 1 || k > a.size()) throw InputError("k must be in [1, " + std::to_string(a.size()) + "]");
  std::vector<bool> in_a(a.size(), false);
  for (std::size_t i = 0; i < k; ++i) in_a.at(a.order[i]) = true;
  std::size_t shared = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (in_a.at(b.order[i])) ++shared;
  }
  return static_cast<double>(shared) / static_cast<double>(k);
}

struct SharedNeurons {
  // Neurons salient for every requested label, in the first label's order.
  std::vector<std::size_t> shared;
  // Per requested label, neurons salient for it and for none of the others.
  std::vector<std::vector<std::size_t>> exclusive;
};

inline SharedNeurons shared_neurons(const ProbeModel& model, const std::vector<std::size_t>& labels, double p) {
  if (labels.size() < 2) throw InputError("shared-neuron analysis needs at least two labels");
  std::vector<std::vector<std::size_t>> sets;
  std::vector<std::size_t> hits(model.dim(), 0);
  for (std::size_t label : labels) {
    sets.push_back(top_neurons_per_label(model, label, p));
    for (std::size_t j : sets.back()) ++hits[j];
  }
  SharedNeurons out;
  for (std::size_t j : sets.front()) {
    if (hits[j] == labels.size()) out.shared.push_back(j);
  }
  for (const auto& set : sets) {
    auto& exclusive = out.exclusive.emplace_back();
    for (std::size_t j : set) {
      if (hits[j] == 1) exclusive.push_back(j);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ranking files: '#' comment lines, then one neuron index per line.

inline void write_ranking(std::ostream& out, const NeuronRanking& ranking) {
  out << "# method=" << ranking.method << '\n';
  for (const auto& [key, value] : ranking.params) out << "# " << key << '=' << value << '\n';
  for (std::size_t idx : ranking.order) out << idx << '\n';
}

inline void save_ranking(const std::string& path, const NeuronRanking& ranking) {
  auto out = detail::open_output(path);
  write_ranking(out, ranking);
  detail::finish_output(out, path);
}

inline NeuronRanking read_ranking(std::istream& in) {
  NeuronRanking ranking;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = detail::strip_cr(line);
    if (text.empty()) continue;
    if (text.front() == '#') {
      const auto body = detail::split_whitespace(text.substr(1));
      for (const std::string& item : body) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) continue;
        if (item.substr(0, eq) == "method") {
          ranking.method = item.substr(eq + 1);
        } else {
          ranking.params[item.substr(0, eq)] = item.substr(eq + 1);
        }
      }
      continue;
    }
    std::size_t consumed = 0;
    unsigned long long value = 0;
    try {
      value = std::stoull(std::string(text), &consumed);
    } catch (const std::exception&) {
      consumed = 0;
    }
    if (consumed != text.size() || text.front() == '-') {
      throw InputError("ranking line " + std::to_string(line_no) + ": expected a neuron index");
    }
    ranking.order.push_back(static_cast<std::size_t>(value));
  }
  if (!ranking.is_permutation()) throw InputError("ranking is not a permutation of 0..D-1");
  return ranking;
}

inline NeuronRanking load_ranking(const std::string& path) {
  auto in = detail::open_input(path);
  return read_ranking(in);
}

}  // namespace nlens

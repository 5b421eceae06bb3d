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

// Token-aligned activations and labels.
//
// Activation files are JSON lines, one sentence per line:
//
//   {"tokens": ["w1", "w2"], "activations": [[0.1, 0.2], [0.3, 0.4]]}
//
// The width D is taken from the first token in the file and enforced for
// every later token. An optional "metadata" object of string values may
// appear on any line; entries are merged. Label files are plain text with
// one sentence per line and one tag per token.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "nlens/detail/io.hpp"
#include "nlens/errors.hpp"
#include "nlens/random.hpp"

namespace nlens {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct ActivationDataset {
  std::vector<std::vector<std::string>> sentences;
  // One (tokens x dim) matrix per sentence.
  std::vector<Matrix> activations;
  std::size_t dim = 0;
  std::map<std::string, std::string> metadata;

  std::size_t num_sentences() const { return sentences.size(); }

  std::size_t num_tokens() const {
    std::size_t total = 0;
    for (const auto& s : sentences) total += s.size();
    return total;
  }

  // Throws InputError naming the first violated invariant.
  void validate() const {
    if (sentences.size() != activations.size()) {
      throw InputError("dataset has " + std::to_string(sentences.size()) + " sentences but " +
                       std::to_string(activations.size()) + " activation blocks");
    }
    if (dim == 0 && num_tokens() > 0) throw InputError("dataset dimension must be positive");
    for (std::size_t s = 0; s < sentences.size(); ++s) {
      const Matrix& block = activations[s];
      if (static_cast<std::size_t>(block.rows()) != sentences[s].size()) {
        throw InputError("sentence " + std::to_string(s + 1) + ": " +
                         std::to_string(sentences[s].size()) + " tokens but " +
                         std::to_string(block.rows()) + " activation vectors");
      }
      if (block.rows() > 0 && static_cast<std::size_t>(block.cols()) != dim) {
        throw InputError("sentence " + std::to_string(s + 1) + ": dimension mismatch, expected " +
                         std::to_string(dim) + " got " + std::to_string(block.cols()));
      }
      if (!block.allFinite()) {
        throw InputError("sentence " + std::to_string(s + 1) + ": non-finite activation value");
      }
    }
  }
};

struct LabeledDataset {
  ActivationDataset base;
  std::vector<std::vector<int>> labels;
  std::vector<std::string> label_vocab;

  std::size_t num_labels() const { return label_vocab.size(); }
  std::size_t dim() const { return base.dim; }
  std::size_t num_tokens() const { return base.num_tokens(); }

  void validate() const {
    base.validate();
    if (labels.size() != base.sentences.size()) {
      throw InputError("label count " + std::to_string(labels.size()) + " differs from sentence count " +
                       std::to_string(base.sentences.size()));
    }
    for (std::size_t s = 0; s < labels.size(); ++s) {
      if (labels[s].size() != base.sentences[s].size()) {
        throw InputError("sentence " + std::to_string(s + 1) + ": " + std::to_string(labels[s].size()) +
                         " labels for " + std::to_string(base.sentences[s].size()) + " tokens");
      }
      for (int id : labels[s]) {
        if (id < 0 || static_cast<std::size_t>(id) >= label_vocab.size()) {
          throw InputError("sentence " + std::to_string(s + 1) + ": label id out of range");
        }
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Activation files

inline ActivationDataset read_activations(std::istream& in) {
  using nlohmann::json;
  ActivationDataset data;
  bool have_dim = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = detail::strip_cr(line);
    if (text.find_first_not_of(" \t") == std::string_view::npos) continue;
    const std::string where = "line " + std::to_string(line_no);
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::exception& e) {
      throw InputError(where + ": malformed JSON (" + e.what() + ")");
    }
    if (!obj.is_object() || !obj.contains("tokens") || !obj.contains("activations")) {
      throw InputError(where + ": expected an object with \"tokens\" and \"activations\"");
    }
    const json& tokens = obj["tokens"];
    const json& acts = obj["activations"];
    if (!tokens.is_array() || !acts.is_array()) {
      throw InputError(where + ": \"tokens\" and \"activations\" must be arrays");
    }
    const std::size_t sentence_no = data.sentences.size() + 1;
    const std::string sentence_tag = "sentence " + std::to_string(sentence_no) + " (" + where + ")";
    if (tokens.size() != acts.size()) {
      throw InputError(sentence_tag + ": " + std::to_string(tokens.size()) + " tokens but " +
                       std::to_string(acts.size()) + " activation vectors");
    }
    std::vector<std::string> words;
    words.reserve(tokens.size());
    for (const json& t : tokens) {
      if (!t.is_string()) throw InputError(sentence_tag + ": token is not a string");
      words.push_back(t.get<std::string>());
    }
    if (!have_dim && !acts.empty()) {
      if (!acts[0].is_array() || acts[0].empty()) {
        throw InputError(sentence_tag + ": activation vector must be a non-empty array");
      }
      data.dim = acts[0].size();
      have_dim = true;
    }
    Matrix block(static_cast<Eigen::Index>(acts.size()), static_cast<Eigen::Index>(data.dim));
    for (std::size_t t = 0; t < acts.size(); ++t) {
      const json& vec = acts[t];
      if (!vec.is_array() || vec.size() != data.dim) {
        throw InputError(sentence_tag + ", token " + std::to_string(t + 1) + ": dimension mismatch, expected " +
                         std::to_string(data.dim) + " got " +
                         (vec.is_array() ? std::to_string(vec.size()) : std::string("non-array")));
      }
      for (std::size_t j = 0; j < data.dim; ++j) {
        if (!vec[j].is_number()) {
          throw InputError(sentence_tag + ", token " + std::to_string(t + 1) + ": value is not a number");
        }
        const double v = vec[j].get<double>();
        if (!std::isfinite(v)) {
          throw InputError(sentence_tag + ", token " + std::to_string(t + 1) + ": non-finite value");
        }
        block(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = v;
      }
    }
    if (obj.contains("metadata")) {
      const json& meta = obj["metadata"];
      if (!meta.is_object()) throw InputError(where + ": \"metadata\" must be an object");
      for (const auto& [key, value] : meta.items()) {
        data.metadata[key] = value.is_string() ? value.get<std::string>() : value.dump();
      }
    }
    data.sentences.push_back(std::move(words));
    data.activations.push_back(std::move(block));
  }
  data.validate();
  return data;
}

inline ActivationDataset load_activations(const std::string& path) {
  auto in = detail::open_input(path);
  return read_activations(in);
}

inline void write_activations(std::ostream& out, const ActivationDataset& data) {
  data.validate();
  std::string line;
  for (std::size_t s = 0; s < data.sentences.size(); ++s) {
    line.clear();
    line += "{\"tokens\":[";
    for (std::size_t t = 0; t < data.sentences[s].size(); ++t) {
      if (t) line += ',';
      line += nlohmann::json(data.sentences[s][t]).dump();
    }
    line += "],\"activations\":[";
    const Matrix& block = data.activations[s];
    for (Eigen::Index t = 0; t < block.rows(); ++t) {
      if (t) line += ',';
      line += '[';
      for (Eigen::Index j = 0; j < block.cols(); ++j) {
        if (j) line += ',';
        detail::append_double(line, block(t, j));
      }
      line += ']';
    }
    line += ']';
    if (s == 0 && !data.metadata.empty()) {
      line += ",\"metadata\":";
      line += nlohmann::json(data.metadata).dump();
    }
    line += "}\n";
    out << line;
  }
}

inline void save_activations(const std::string& path, const ActivationDataset& data) {
  auto out = detail::open_output(path);
  write_activations(out, data);
  detail::finish_output(out, path);
}

// ---------------------------------------------------------------------------
// Labels

// Tags are mapped through `vocab`; tags not yet in it are appended in
// first-occurrence order. Passing a trained model's vocabulary keeps ids
// aligned between train and test files.
inline LabeledDataset attach_labels(const ActivationDataset& base,
                                    const std::vector<std::vector<std::string>>& tags,
                                    std::vector<std::string> vocab = {}) {
  if (tags.size() != base.sentences.size()) {
    throw InputError("label file has " + std::to_string(tags.size()) + " lines but the dataset has " +
                     std::to_string(base.sentences.size()) + " sentences");
  }
  std::unordered_map<std::string, int> ids;
  for (std::size_t i = 0; i < vocab.size(); ++i) ids.emplace(vocab[i], static_cast<int>(i));
  LabeledDataset out;
  out.base = base;
  out.labels.resize(tags.size());
  for (std::size_t s = 0; s < tags.size(); ++s) {
    if (tags[s].size() != base.sentences[s].size()) {
      throw InputError("line " + std::to_string(s + 1) + ": " + std::to_string(tags[s].size()) +
                       " tags for " + std::to_string(base.sentences[s].size()) + " tokens");
    }
    out.labels[s].reserve(tags[s].size());
    for (const std::string& tag : tags[s]) {
      auto [it, inserted] = ids.emplace(tag, static_cast<int>(vocab.size()));
      if (inserted) vocab.push_back(tag);
      out.labels[s].push_back(it->second);
    }
  }
  out.label_vocab = std::move(vocab);
  return out;
}

inline std::vector<std::vector<std::string>> read_tag_lines(std::istream& in) {
  std::vector<std::vector<std::string>> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(detail::split_whitespace(detail::strip_cr(line)));
  return lines;
}

inline LabeledDataset load_labels(const std::string& path, const ActivationDataset& base,
                                  std::vector<std::string> vocab = {}) {
  auto in = detail::open_input(path);
  return attach_labels(base, read_tag_lines(in), std::move(vocab));
}

inline void save_labels(const std::string& path, const LabeledDataset& data) {
  auto out = detail::open_output(path);
  for (const auto& sentence : data.labels) {
    for (std::size_t t = 0; t < sentence.size(); ++t) {
      if (t) out << ' ';
      out << data.label_vocab[static_cast<std::size_t>(sentence[t])];
    }
    out << '\n';
  }
  detail::finish_output(out, path);
}

// Position class of token t in a sentence of length n: B for the first
// ceil(n/3) tokens, E for the last floor(n/3), M in between. Two-token
// sentences are B, E.
inline char position_class(std::size_t t, std::size_t n) {
  if (n == 2) return t == 0 ? 'B' : 'E';
  const std::size_t head = (n + 2) / 3;
  const std::size_t tail = n / 3;
  if (t < head) return 'B';
  if (t >= n - tail) return 'E';
  return 'M';
}

inline LabeledDataset auto_label_position(const ActivationDataset& base) {
  std::vector<std::vector<std::string>> tags(base.sentences.size());
  for (std::size_t s = 0; s < base.sentences.size(); ++s) {
    const std::size_t n = base.sentences[s].size();
    if (n == 0) throw InputError("sentence " + std::to_string(s + 1) + " is empty");
    for (std::size_t t = 0; t < n; ++t) tags[s].emplace_back(1, position_class(t, n));
  }
  return attach_labels(base, tags);
}

// Per-word most frequent tag; words unseen in `train` get the globally most
// frequent tag. Ties go to the lowest label id. Gold and predicted tags are
// compared as strings.
inline double majority_baseline(const LabeledDataset& train, const LabeledDataset& test) {
  if (train.num_tokens() == 0) throw InputError("majority baseline needs a non-empty training set");
  if (test.num_tokens() == 0) throw InputError("majority baseline needs a non-empty test set");
  const std::size_t num_labels = train.label_vocab.size();
  std::unordered_map<std::string, std::vector<std::size_t>> per_word;
  std::vector<std::size_t> global(num_labels, 0);
  for (std::size_t s = 0; s < train.labels.size(); ++s) {
    for (std::size_t t = 0; t < train.labels[s].size(); ++t) {
      const auto id = static_cast<std::size_t>(train.labels[s][t]);
      auto& counts = per_word[train.base.sentences[s][t]];
      if (counts.empty()) counts.assign(num_labels, 0);
      ++counts[id];
      ++global[id];
    }
  }
  auto argmax = [](const std::vector<std::size_t>& counts) {
    return static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  };
  const std::string& fallback = train.label_vocab[argmax(global)];
  std::size_t correct = 0;
  for (std::size_t s = 0; s < test.labels.size(); ++s) {
    for (std::size_t t = 0; t < test.labels[s].size(); ++t) {
      auto it = per_word.find(test.base.sentences[s][t]);
      const std::string& predicted = it == per_word.end() ? fallback : train.label_vocab[argmax(it->second)];
      if (predicted == test.label_vocab[static_cast<std::size_t>(test.labels[s][t])]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(test.num_tokens());
}

// ---------------------------------------------------------------------------
// Partitioning

// Part sizes are floor(fraction * n); the remainder goes to the earliest
// parts. Indices inside each part keep their original order.
inline std::vector<std::vector<std::size_t>> partition_indices(std::size_t n, std::span<const double> fractions,
                                                               std::uint64_t seed) {
  if (fractions.empty()) throw InputError("split needs at least one fraction");
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0) || !std::isfinite(f)) throw InputError("split fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InputError("split fractions must sum to 1");
  std::vector<std::size_t> sizes;
  std::size_t assigned = 0;
  for (double f : fractions) {
    sizes.push_back(static_cast<std::size_t>(std::floor(f * static_cast<double>(n) + 1e-9)));
    assigned += sizes.back();
  }
  for (std::size_t k = 0; assigned < n; k = (k + 1) % sizes.size(), ++assigned) ++sizes[k];
  Rng rng(seed);
  const std::vector<std::size_t> order = rng.permutation(n);
  std::vector<std::vector<std::size_t>> parts(sizes.size());
  std::size_t cursor = 0;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    parts[k].assign(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                    order.begin() + static_cast<std::ptrdiff_t>(cursor + sizes[k]));
    std::sort(parts[k].begin(), parts[k].end());
    cursor += sizes[k];
  }
  return parts;
}

inline ActivationDataset select_sentences(const ActivationDataset& data, std::span<const std::size_t> indices) {
  ActivationDataset out;
  out.dim = data.dim;
  out.metadata = data.metadata;
  for (std::size_t i : indices) {
    out.sentences.push_back(data.sentences.at(i));
    out.activations.push_back(data.activations.at(i));
  }
  return out;
}

inline LabeledDataset select_sentences(const LabeledDataset& data, std::span<const std::size_t> indices) {
  LabeledDataset out;
  out.base = select_sentences(data.base, indices);
  out.label_vocab = data.label_vocab;
  for (std::size_t i : indices) out.labels.push_back(data.labels.at(i));
  return out;
}

// Parts share the parent's label vocabulary so ids stay comparable.
inline std::vector<LabeledDataset> split(const LabeledDataset& data, std::span<const double> fractions,
                                         std::uint64_t seed) {
  std::vector<LabeledDataset> out;
  for (const auto& part : partition_indices(data.base.num_sentences(), fractions, seed)) {
    out.push_back(select_sentences(data, part));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Flat views used by the probe and the correlation code.

// All tokens stacked in corpus order: (num_tokens x dim).
inline Matrix stack_activations(const ActivationDataset& data) {
  Matrix out(static_cast<Eigen::Index>(data.num_tokens()), static_cast<Eigen::Index>(data.dim));
  Eigen::Index row = 0;
  for (const Matrix& block : data.activations) {
    if (block.rows() == 0) continue;
    out.middleRows(row, block.rows()) = block;
    row += block.rows();
  }
  return out;
}

inline std::vector<int> flat_labels(const LabeledDataset& data) {
  std::vector<int> out;
  out.reserve(data.num_tokens());
  for (const auto& sentence : data.labels) out.insert(out.end(), sentence.begin(), sentence.end());
  return out;
}

}  // namespace nlens

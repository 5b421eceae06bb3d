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

// A small word-level LSTM language model.
//
// Each sentence is read independently from a zero state. The model consumes
// <s> w1 ... wn and predicts w1 ... wn </s>. The activation of token wi is
// the concatenation over layers of the hidden state h emitted right after wi
// was consumed, so a clamp index u addresses unit u % hidden of layer
// u / hidden in that same layout. Clamped units are forced to zero as soon as
// the cell emits them, which removes them from the recurrence, from the
// next layer, and from the output projection.
//
// Training uses truncated backpropagation over `unroll` steps on batches of
// sentences padded to a common length, with Adam and global-norm clipping.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <istream>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "nlens/activation_store.hpp"
#include "nlens/detail/io.hpp"
#include "nlens/errors.hpp"
#include "nlens/random.hpp"

namespace nlens {

using Sentence = std::vector<std::string>;
using Corpus = std::vector<Sentence>;

inline std::string lowercase(std::string word) {
  for (char& ch : word) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return word;
}

// One sentence per line, whitespace tokenized and lowercased. Blank lines
// are skipped.
inline Corpus read_corpus(std::istream& in) {
  Corpus corpus;
  std::string line;
  while (std::getline(in, line)) {
    Sentence words = detail::split_whitespace(line);
    if (words.empty()) continue;
    for (auto& w : words) w = lowercase(std::move(w));
    corpus.push_back(std::move(words));
  }
  return corpus;
}

inline Corpus load_corpus(const std::string& path) {
  auto in = detail::open_input(path);
  return read_corpus(in);
}

struct ToyLMConfig {
  std::size_t vocab_cap = 5000;  // including the three reserved symbols
  std::size_t embedding_dim = 64;
  std::size_t hidden_dim = 64;
  std::size_t layers = 2;
  std::size_t unroll = 32;
  std::size_t batch_size = 16;  // sentences per update
  std::size_t epochs = 5;
  double learning_rate = 5e-3;
  double clip_norm = 5.0;
  double init_scale = 0.1;
  std::uint64_t seed = 42;

  void validate() const {
    if (vocab_cap < 4) throw InputError("vocab cap must leave room for at least one word");
    if (embedding_dim == 0 || hidden_dim == 0 || layers == 0 || unroll == 0 || batch_size == 0) {
      throw InputError("toy LM dimensions must be positive");
    }
    if (!(learning_rate > 0.0) || !(init_scale > 0.0)) throw InputError("learning rate and init scale must be positive");
  }
};

class Vocabulary {
 public:
  static constexpr int kUnknown = 0;
  static constexpr int kBegin = 1;
  static constexpr int kEnd = 2;

  Vocabulary() : words_{"<unk>", "<s>", "</s>"} { reindex(); }

  explicit Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
    if (words_.size() < 3 || words_[0] != "<unk>" || words_[1] != "<s>" || words_[2] != "</s>") {
      throw InputError("vocabulary must start with <unk>, <s>, </s>");
    }
    reindex();
  }

  // Most frequent words first (ties alphabetical), capped at `cap` entries.
  static Vocabulary build(const Corpus& corpus, std::size_t cap) {
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& sentence : corpus) {
      for (const auto& w : sentence) ++counts[w];
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    Vocabulary vocab;
    for (const auto& [word, count] : ranked) {
      if (vocab.words_.size() >= cap) break;
      if (word == "<unk>" || word == "<s>" || word == "</s>") continue;
      vocab.words_.push_back(word);
    }
    vocab.reindex();
    return vocab;
  }

  int id(const std::string& word) const {
    auto it = index_.find(word);
    return it == index_.end() ? kUnknown : it->second;
  }

  const std::string& word(std::size_t id) const { return words_.at(id); }
  const std::vector<std::string>& words() const { return words_; }
  std::size_t size() const { return words_.size(); }

 private:
  void reindex() {
    index_.clear();
    for (std::size_t i = 0; i < words_.size(); ++i) index_.emplace(words_[i], static_cast<int>(i));
  }

  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

// All trainable tensors. Vectors are stored as single-column matrices.
//   0            embedding       (embedding_dim x vocab)
//   1 + 2l       layer l weights (4*hidden x (input + hidden)), gate rows i, f, o, g
//   2 + 2l       layer l bias    (4*hidden x 1)
//   1 + 2L       output weights  (vocab x hidden)
//   2 + 2L       output bias     (vocab x 1)
struct LmParameters {
  std::vector<Matrix> tensors;

  static LmParameters zeros_like(const LmParameters& other) {
    LmParameters out;
    for (const Matrix& t : other.tensors) out.tensors.push_back(Matrix::Zero(t.rows(), t.cols()));
    return out;
  }

  double squared_norm() const {
    double total = 0.0;
    for (const Matrix& t : tensors) total += t.squaredNorm();
    return total;
  }
};

// Per-token negative log-likelihood totals.
struct LikelihoodTotals {
  double nll = 0.0;
  std::size_t tokens = 0;

  double perplexity() const { return std::exp(nll / static_cast<double>(tokens)); }
};

class ToyLM {
 public:
  ToyLM() = default;

  ToyLM(ToyLMConfig config, Vocabulary vocab) : config_(config), vocab_(std::move(vocab)) {
    config_.validate();
    const auto v = static_cast<Eigen::Index>(vocab_.size());
    const auto e = static_cast<Eigen::Index>(config_.embedding_dim);
    const auto h = static_cast<Eigen::Index>(config_.hidden_dim);
    params_.tensors.push_back(Matrix::Zero(e, v));
    for (std::size_t l = 0; l < config_.layers; ++l) {
      const Eigen::Index in = l == 0 ? e : h;
      params_.tensors.push_back(Matrix::Zero(4 * h, in + h));
      params_.tensors.push_back(Matrix::Zero(4 * h, 1));
    }
    params_.tensors.push_back(Matrix::Zero(v, h));
    params_.tensors.push_back(Matrix::Zero(v, 1));
  }

  // Uniform(-init_scale, init_scale) weights, zero biases except the forget
  // gate, which starts at 1.
  void initialize(std::uint64_t seed) {
    Rng rng(seed);
    const double s = config_.init_scale;
    for (std::size_t k = 0; k < params_.tensors.size(); ++k) {
      Matrix& t = params_.tensors[k];
      const bool is_bias = k > 0 && k % 2 == 0;
      for (Eigen::Index c = 0; c < t.cols(); ++c) {
        for (Eigen::Index r = 0; r < t.rows(); ++r) t(r, c) = is_bias ? 0.0 : rng.uniform(-s, s);
      }
    }
    const auto h = static_cast<Eigen::Index>(config_.hidden_dim);
    for (std::size_t l = 0; l < config_.layers; ++l) layer_bias(l).middleRows(h, h).setOnes();
  }

  const ToyLMConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  LmParameters& parameters() { return params_; }
  const LmParameters& parameters() const { return params_; }

  std::size_t activation_dim() const { return config_.layers * config_.hidden_dim; }

  Matrix& embedding() { return params_.tensors[0]; }
  const Matrix& embedding() const { return params_.tensors[0]; }
  Matrix& layer_weights(std::size_t l) { return params_.tensors[1 + 2 * l]; }
  const Matrix& layer_weights(std::size_t l) const { return params_.tensors[1 + 2 * l]; }
  Matrix& layer_bias(std::size_t l) { return params_.tensors[2 + 2 * l]; }
  const Matrix& layer_bias(std::size_t l) const { return params_.tensors[2 + 2 * l]; }
  Matrix& output_weights() { return params_.tensors[1 + 2 * config_.layers]; }
  const Matrix& output_weights() const { return params_.tensors[1 + 2 * config_.layers]; }
  Matrix& output_bias() { return params_.tensors[2 + 2 * config_.layers]; }
  const Matrix& output_bias() const { return params_.tensors[2 + 2 * config_.layers]; }

  // Per-unit multipliers (1 keep, 0 clamp) in activation layout.
  Vector clamp_mask(std::span<const std::size_t> clamp) const {
    Vector mask = Vector::Ones(static_cast<Eigen::Index>(activation_dim()));
    for (std::size_t u : clamp) {
      if (u >= activation_dim()) {
        throw InputError("clamp index " + std::to_string(u) + " out of range (model has " +
                         std::to_string(activation_dim()) + " units)");
      }
      mask(static_cast<Eigen::Index>(u)) = 0.0;
    }
    return mask;
  }

  // Output distribution after consuming `prefix` (starting from <s>).
  Vector next_distribution(const Sentence& prefix) const;

  LikelihoodTotals likelihood(const Corpus& corpus, std::span<const std::size_t> clamp = {}) const;

  // Mean per-token NLL over `corpus` and its exact gradient (no truncation).
  std::pair<double, LmParameters> loss_and_gradients(const Corpus& corpus) const;

  // Runs one truncated-BPTT epoch in place; returns the training totals.
  LikelihoodTotals train_epoch(const Corpus& corpus, Rng& rng, LmParameters& adam_m, LmParameters& adam_v,
                               std::size_t& adam_step);

  ActivationDataset extract(const Corpus& corpus) const;

 private:
  struct Batch {
    Eigen::Index width = 0;
    std::size_t steps = 0;
    std::vector<std::vector<int>> inputs;   // [step][column]
    std::vector<std::vector<int>> targets;  // [step][column], -1 for padding
  };

  struct LayerCache {
    Matrix concat, i, f, o, g, c_prev, tanh_c;
  };

  struct StepCache {
    std::vector<LayerCache> layers;
    Matrix top;  // top-layer h after clamping
    Matrix probs;
  };

  struct State {
    std::vector<Matrix> h, c;
  };

  Batch make_batch(const Corpus& corpus, std::span<const std::size_t> rows) const;
  State zero_state(Eigen::Index width) const;
  // Advances one step; fills `cache` when non-null. `hidden_out` receives
  // each layer's (clamped) h when non-null.
  void step(const std::vector<int>& inputs, const Vector& mask, State& state, LayerCache* cache,
            std::vector<Matrix>* hidden_out) const;
  // Column-wise log-softmax of the output layer applied to `top`.
  Matrix log_probs(const Matrix& top) const;
  // Forward + backward over steps [begin, end) of `batch`, starting from
  // `state` (updated in place). Returns the summed NLL; gradients are
  // accumulated into `grads` with weight `scale` per token.
  double chunk(const Batch& batch, std::size_t begin, std::size_t end, State& state, double scale,
               LmParameters& grads) const;

  ToyLMConfig config_;
  Vocabulary vocab_;
  LmParameters params_;
};

// ---------------------------------------------------------------------------
// Implementation

namespace detail {

inline Matrix sigmoid(const Matrix& x) { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); }

}  // namespace detail

inline ToyLM::Batch ToyLM::make_batch(const Corpus& corpus, std::span<const std::size_t> rows) const {
  Batch batch;
  batch.width = static_cast<Eigen::Index>(rows.size());
  for (std::size_t r : rows) batch.steps = std::max(batch.steps, corpus[r].size() + 1);
  batch.inputs.assign(batch.steps, std::vector<int>(rows.size(), Vocabulary::kEnd));
  batch.targets.assign(batch.steps, std::vector<int>(rows.size(), -1));
  for (std::size_t col = 0; col < rows.size(); ++col) {
    const Sentence& s = corpus[rows[col]];
    batch.inputs[0][col] = Vocabulary::kBegin;
    for (std::size_t t = 0; t < s.size(); ++t) {
      const int id = vocab_.id(s[t]);
      batch.inputs[t + 1][col] = id;
      batch.targets[t][col] = id;
    }
    batch.targets[s.size()][col] = Vocabulary::kEnd;
  }
  return batch;
}

inline ToyLM::State ToyLM::zero_state(Eigen::Index width) const {
  State state;
  const auto h = static_cast<Eigen::Index>(config_.hidden_dim);
  state.h.assign(config_.layers, Matrix::Zero(h, width));
  state.c.assign(config_.layers, Matrix::Zero(h, width));
  return state;
}

inline void ToyLM::step(const std::vector<int>& inputs, const Vector& mask, State& state, LayerCache* cache,
                        std::vector<Matrix>* hidden_out) const {
  const auto width = static_cast<Eigen::Index>(inputs.size());
  const auto h = static_cast<Eigen::Index>(config_.hidden_dim);
  Matrix x(embedding().rows(), width);
  for (Eigen::Index col = 0; col < width; ++col) x.col(col) = embedding().col(inputs[static_cast<std::size_t>(col)]);
  if (hidden_out) hidden_out->clear();
  for (std::size_t l = 0; l < config_.layers; ++l) {
    Matrix concat(x.rows() + h, width);
    concat.topRows(x.rows()) = x;
    concat.bottomRows(h) = state.h[l];
    Matrix pre = layer_weights(l) * concat;
    pre.colwise() += layer_bias(l).col(0);
    Matrix i = detail::sigmoid(pre.middleRows(0, h));
    Matrix f = detail::sigmoid(pre.middleRows(h, h));
    Matrix o = detail::sigmoid(pre.middleRows(2 * h, h));
    Matrix g = pre.middleRows(3 * h, h).array().tanh().matrix();
    Matrix c = (f.array() * state.c[l].array() + i.array() * g.array()).matrix();
    Matrix tanh_c = c.array().tanh().matrix();
    Matrix out = (o.array() * tanh_c.array()).matrix();
    out.array().colwise() *= mask.segment(static_cast<Eigen::Index>(l) * h, h).array();
    if (cache) {
      LayerCache& lc = cache[l];
      lc.concat = std::move(concat);
      lc.i = std::move(i);
      lc.f = std::move(f);
      lc.o = std::move(o);
      lc.g = std::move(g);
      lc.c_prev = state.c[l];
      lc.tanh_c = std::move(tanh_c);
    }
    state.c[l] = std::move(c);
    state.h[l] = out;
    if (hidden_out) hidden_out->push_back(out);
    x = std::move(out);
  }
}

inline Matrix ToyLM::log_probs(const Matrix& top) const {
  Matrix logits = output_weights() * top;
  logits.colwise() += output_bias().col(0);
  for (Eigen::Index col = 0; col < logits.cols(); ++col) {
    auto column = logits.col(col);
    const double peak = column.maxCoeff();
    const double log_norm = peak + std::log((column.array() - peak).exp().sum());
    column.array() -= log_norm;
  }
  return logits;
}

inline Vector ToyLM::next_distribution(const Sentence& prefix) const {
  const Vector mask = clamp_mask({});
  State state = zero_state(1);
  std::vector<int> input{Vocabulary::kBegin};
  step(input, mask, state, nullptr, nullptr);
  for (const auto& w : prefix) {
    input[0] = vocab_.id(w);
    step(input, mask, state, nullptr, nullptr);
  }
  return log_probs(state.h.back()).col(0).array().exp().matrix();
}

inline LikelihoodTotals ToyLM::likelihood(const Corpus& corpus, std::span<const std::size_t> clamp) const {
  if (corpus.empty()) throw InputError("corpus is empty");
  const Vector mask = clamp_mask(clamp);
  constexpr std::size_t kEvalBatch = 64;
  LikelihoodTotals totals;
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < corpus.size(); start += kEvalBatch) {
    rows.clear();
    for (std::size_t r = start; r < std::min(corpus.size(), start + kEvalBatch); ++r) rows.push_back(r);
    const Batch batch = make_batch(corpus, rows);
    State state = zero_state(batch.width);
    for (std::size_t t = 0; t < batch.steps; ++t) {
      step(batch.inputs[t], mask, state, nullptr, nullptr);
      const Matrix lp = log_probs(state.h.back());
      for (Eigen::Index col = 0; col < batch.width; ++col) {
        const int target = batch.targets[t][static_cast<std::size_t>(col)];
        if (target < 0) continue;
        totals.nll -= lp(target, col);
        ++totals.tokens;
      }
    }
  }
  return totals;
}

inline double ToyLM::chunk(const Batch& batch, std::size_t begin, std::size_t end, State& state, double scale,
                           LmParameters& grads) const {
  const Vector mask = clamp_mask({});
  const auto h = static_cast<Eigen::Index>(config_.hidden_dim);
  const std::size_t layers = config_.layers;
  std::vector<StepCache> caches(end - begin);
  double nll = 0.0;
  for (std::size_t t = begin; t < end; ++t) {
    StepCache& sc = caches[t - begin];
    sc.layers.resize(layers);
    step(batch.inputs[t], mask, state, sc.layers.data(), nullptr);
    sc.top = state.h.back();
    sc.probs = log_probs(sc.top);
    for (Eigen::Index col = 0; col < batch.width; ++col) {
      const int target = batch.targets[t][static_cast<std::size_t>(col)];
      if (target >= 0) nll -= sc.probs(target, col);
    }
    sc.probs = sc.probs.array().exp().matrix();
  }

  Matrix& d_embedding = grads.tensors[0];
  Matrix& d_out_w = grads.tensors[1 + 2 * layers];
  Matrix& d_out_b = grads.tensors[2 + 2 * layers];
  std::vector<Matrix> dh_next(layers, Matrix::Zero(h, batch.width));
  std::vector<Matrix> dc_next(layers, Matrix::Zero(h, batch.width));
  for (std::size_t t = end; t-- > begin;) {
    StepCache& sc = caches[t - begin];
    Matrix d_logits = std::move(sc.probs);
    for (Eigen::Index col = 0; col < batch.width; ++col) {
      const int target = batch.targets[t][static_cast<std::size_t>(col)];
      if (target < 0) {
        d_logits.col(col).setZero();
      } else {
        d_logits(target, col) -= 1.0;
      }
    }
    d_logits *= scale;
    d_out_w.noalias() += d_logits * sc.top.transpose();
    d_out_b.col(0) += d_logits.rowwise().sum();
    Matrix d_from_above = output_weights().transpose() * d_logits;

    for (std::size_t l = layers; l-- > 0;) {
      const LayerCache& lc = sc.layers[l];
      Matrix dh = d_from_above + dh_next[l];
      dh.array().colwise() *= mask.segment(static_cast<Eigen::Index>(l) * h, h).array();
      const Eigen::ArrayXXd d_o = dh.array() * lc.tanh_c.array();
      const Eigen::ArrayXXd dc =
          dh.array() * lc.o.array() * (1.0 - lc.tanh_c.array().square()) + dc_next[l].array();
      Matrix d_pre(4 * h, batch.width);
      d_pre.middleRows(0, h) = (dc * lc.g.array() * lc.i.array() * (1.0 - lc.i.array())).matrix();
      d_pre.middleRows(h, h) = (dc * lc.c_prev.array() * lc.f.array() * (1.0 - lc.f.array())).matrix();
      d_pre.middleRows(2 * h, h) = (d_o * lc.o.array() * (1.0 - lc.o.array())).matrix();
      d_pre.middleRows(3 * h, h) = (dc * lc.i.array() * (1.0 - lc.g.array().square())).matrix();
      dc_next[l] = (dc * lc.f.array()).matrix();
      grads.tensors[1 + 2 * l].noalias() += d_pre * lc.concat.transpose();
      grads.tensors[2 + 2 * l].col(0) += d_pre.rowwise().sum();
      Matrix d_concat = layer_weights(l).transpose() * d_pre;
      const Eigen::Index in = d_concat.rows() - h;
      dh_next[l] = d_concat.bottomRows(h);
      d_from_above = d_concat.topRows(in);
    }
    for (Eigen::Index col = 0; col < batch.width; ++col) {
      d_embedding.col(batch.inputs[t][static_cast<std::size_t>(col)]) += d_from_above.col(col);
    }
  }
  return nll;
}

inline std::pair<double, LmParameters> ToyLM::loss_and_gradients(const Corpus& corpus) const {
  if (corpus.empty()) throw InputError("corpus is empty");
  std::vector<std::size_t> rows(corpus.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  const Batch batch = make_batch(corpus, rows);
  std::size_t targets = 0;
  for (const auto& s : corpus) targets += s.size() + 1;
  LmParameters grads = LmParameters::zeros_like(params_);
  State state = zero_state(batch.width);
  const double scale = 1.0 / static_cast<double>(targets);
  const double nll = chunk(batch, 0, batch.steps, state, scale, grads);
  return {nll * scale, std::move(grads)};
}

inline LikelihoodTotals ToyLM::train_epoch(const Corpus& corpus, Rng& rng, LmParameters& adam_m,
                                           LmParameters& adam_v, std::size_t& adam_step) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEpsilon = 1e-8;
  const std::vector<std::size_t> order = rng.permutation(corpus.size());
  LikelihoodTotals totals;
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
    rows.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + config_.batch_size)));
    const Batch batch = make_batch(corpus, rows);
    State state = zero_state(batch.width);
    for (std::size_t begin = 0; begin < batch.steps; begin += config_.unroll) {
      const std::size_t end = std::min(batch.steps, begin + config_.unroll);
      std::size_t count = 0;
      for (std::size_t t = begin; t < end; ++t) {
        for (int target : batch.targets[t]) count += target >= 0 ? 1 : 0;
      }
      if (count == 0) break;
      LmParameters grads = LmParameters::zeros_like(params_);
      const double nll = chunk(batch, begin, end, state, 1.0 / static_cast<double>(count), grads);
      // Later chunks see the state but not its history.
      if (!std::isfinite(nll)) throw NumericalError("language model training diverged (non-finite loss)");
      totals.nll += nll;
      totals.tokens += count;
      const double norm = std::sqrt(grads.squared_norm());
      if (!std::isfinite(norm)) throw NumericalError("language model training diverged (non-finite gradient)");
      const double clip = norm > config_.clip_norm ? config_.clip_norm / norm : 1.0;
      ++adam_step;
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam_step));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam_step));
      for (std::size_t k = 0; k < params_.tensors.size(); ++k) {
        const Matrix g = grads.tensors[k] * clip;
        adam_m.tensors[k] = kBeta1 * adam_m.tensors[k] + (1.0 - kBeta1) * g;
        adam_v.tensors[k] = kBeta2 * adam_v.tensors[k] + (1.0 - kBeta2) * g.cwiseAbs2();
        params_.tensors[k].array() -= config_.learning_rate * (adam_m.tensors[k] / c1).array() /
                                      ((adam_v.tensors[k] / c2).array().sqrt() + kEpsilon);
      }
    }
  }
  return totals;
}

inline ActivationDataset ToyLM::extract(const Corpus& corpus) const {
  if (corpus.empty()) throw InputError("corpus is empty");
  const Vector mask = clamp_mask({});
  const auto h = static_cast<Eigen::Index>(config_.hidden_dim);
  ActivationDataset data;
  data.dim = activation_dim();
  data.metadata = {{"model", "toylm"},
                   {"layers", std::to_string(config_.layers)},
                   {"hidden_dim", std::to_string(config_.hidden_dim)}};
  std::vector<Matrix> hidden;
  std::vector<int> input(1);
  for (const Sentence& sentence : corpus) {
    Matrix block(static_cast<Eigen::Index>(sentence.size()), static_cast<Eigen::Index>(data.dim));
    State state = zero_state(1);
    input[0] = Vocabulary::kBegin;
    step(input, mask, state, nullptr, nullptr);
    for (std::size_t t = 0; t < sentence.size(); ++t) {
      input[0] = vocab_.id(sentence[t]);
      step(input, mask, state, nullptr, &hidden);
      for (std::size_t l = 0; l < config_.layers; ++l) {
        block.row(static_cast<Eigen::Index>(t)).segment(static_cast<Eigen::Index>(l) * h, h) =
            hidden[l].col(0).transpose();
      }
    }
    data.sentences.push_back(sentence);
    data.activations.push_back(std::move(block));
  }
  return data;
}

// ---------------------------------------------------------------------------
// Free-function interface

struct TrainedLM {
  ToyLM model;
  std::vector<double> epoch_perplexity;
};

inline TrainedLM train_lm(const Corpus& corpus, const ToyLMConfig& config) {
  config.validate();
  if (corpus.empty()) throw InputError("corpus is empty");
  TrainedLM out{ToyLM(config, Vocabulary::build(corpus, config.vocab_cap)), {}};
  out.model.initialize(config.seed);
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  LmParameters m = LmParameters::zeros_like(out.model.parameters());
  LmParameters v = LmParameters::zeros_like(out.model.parameters());
  std::size_t adam_step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    out.epoch_perplexity.push_back(out.model.train_epoch(corpus, rng, m, v, adam_step).perplexity());
  }
  return out;
}

// exp of the mean per-token NLL, counting the end-of-sentence prediction.
inline double perplexity(const ToyLM& lm, const Corpus& corpus) { return lm.likelihood(corpus).perplexity(); }

inline ActivationDataset extract_activations(const ToyLM& lm, const Corpus& corpus) { return lm.extract(corpus); }

struct ThreeModels {
  std::vector<TrainedLM> models;
  std::vector<std::vector<std::size_t>> parts;  // sentence indices per model
};

// Disjoint, seeded split of sentence indices into `parts` near-equal shares.
inline std::vector<std::vector<std::size_t>> corpus_parts(std::size_t sentences, std::size_t parts,
                                                          std::uint64_t seed) {
  if (parts == 0) throw InputError("number of corpus parts must be positive");
  if (sentences < parts) throw InputError("corpus has fewer sentences than requested parts");
  const std::vector<double> fractions(parts, 1.0 / static_cast<double>(parts));
  return partition_indices(sentences, fractions, seed);
}

inline Corpus select_corpus(const Corpus& corpus, std::span<const std::size_t> indices) {
  Corpus out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(corpus.at(i));
  return out;
}

// Model k of `parts` trains on share k with seed + 1 + k.
inline TrainedLM train_lm_part(const Corpus& corpus, const ToyLMConfig& config, std::size_t part, std::size_t parts) {
  if (part >= parts) throw InputError("part index out of range");
  const auto split = corpus_parts(corpus.size(), parts, config.seed);
  ToyLMConfig cfg = config;
  cfg.seed = config.seed + 1 + part;
  return train_lm(select_corpus(corpus, split[part]), cfg);
}

// Three models with identical settings on disjoint thirds of the corpus,
// seeded seed + 1, seed + 2, seed + 3.
inline ThreeModels train_three_models(const Corpus& corpus, const ToyLMConfig& config) {
  ThreeModels out;
  out.parts = corpus_parts(corpus.size(), 3, config.seed);
  for (std::size_t k = 0; k < 3; ++k) out.models.push_back(train_lm_part(corpus, config, k, 3));
  return out;
}

// ---------------------------------------------------------------------------
// Serialization: a JSON header line, then one line of values per tensor.

inline void write_lm(std::ostream& out, const ToyLM& lm) {
  const ToyLMConfig& c = lm.config();
  nlohmann::json shapes = nlohmann::json::array();
  for (const Matrix& t : lm.parameters().tensors) shapes.push_back({t.rows(), t.cols()});
  const nlohmann::json header = {
      {"format", "nlens-toylm"},
      {"version", 1},
      {"config",
       {{"vocab_cap", c.vocab_cap},
        {"embedding_dim", c.embedding_dim},
        {"hidden_dim", c.hidden_dim},
        {"layers", c.layers},
        {"unroll", c.unroll},
        {"batch_size", c.batch_size},
        {"epochs", c.epochs},
        {"learning_rate", c.learning_rate},
        {"clip_norm", c.clip_norm},
        {"init_scale", c.init_scale},
        {"seed", c.seed}}},
      {"vocab", lm.vocab().words()},
      {"shapes", shapes},
  };
  out << header.dump() << '\n';
  std::string line;
  for (const Matrix& t : lm.parameters().tensors) {
    line.clear();
    for (Eigen::Index c = 0; c < t.cols(); ++c) {
      for (Eigen::Index r = 0; r < t.rows(); ++r) {
        if (!line.empty()) line += ' ';
        detail::append_double(line, t(r, c));
      }
    }
    out << line << '\n';
  }
}

inline ToyLM read_lm(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("language model file is empty");
  nlohmann::json header;
  ToyLMConfig config;
  std::vector<std::string> words;
  try {
    header = nlohmann::json::parse(line);
    if (header.at("format") != "nlens-toylm") throw InputError("not a toy language model file");
    const auto& c = header.at("config");
    config.vocab_cap = c.at("vocab_cap").get<std::size_t>();
    config.embedding_dim = c.at("embedding_dim").get<std::size_t>();
    config.hidden_dim = c.at("hidden_dim").get<std::size_t>();
    config.layers = c.at("layers").get<std::size_t>();
    config.unroll = c.at("unroll").get<std::size_t>();
    config.batch_size = c.at("batch_size").get<std::size_t>();
    config.epochs = c.at("epochs").get<std::size_t>();
    config.learning_rate = c.at("learning_rate").get<double>();
    config.clip_norm = c.at("clip_norm").get<double>();
    config.init_scale = c.at("init_scale").get<double>();
    config.seed = c.at("seed").get<std::uint64_t>();
    words = header.at("vocab").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed language model header: ") + e.what());
  }
  ToyLM lm(config, Vocabulary(std::move(words)));
  for (std::size_t k = 0; k < lm.parameters().tensors.size(); ++k) {
    Matrix& t = lm.parameters().tensors[k];
    if (!std::getline(in, line)) throw InputError("language model file is truncated");
    std::istringstream values(line);
    for (Eigen::Index c = 0; c < t.cols(); ++c) {
      for (Eigen::Index r = 0; r < t.rows(); ++r) {
        std::string token;
        if (!(values >> token)) throw InputError("tensor " + std::to_string(k) + " has too few values");
        char* stop = nullptr;
        t(r, c) = std::strtod(token.c_str(), &stop);
        if (stop != token.c_str() + token.size() || !std::isfinite(t(r, c))) {
          throw InputError("tensor " + std::to_string(k) + ": bad value '" + token + "'");
        }
      }
    }
    std::string extra;
    if (values >> extra) throw InputError("tensor " + std::to_string(k) + " has too many values");
  }
  return lm;
}

inline void save_lm(const std::string& path, const ToyLM& lm) {
  auto out = detail::open_output(path);
  write_lm(out, lm);
  detail::finish_output(out, path);
}

inline ToyLM load_lm(const std::string& path) {
  auto in = detail::open_input(path);
  return read_lm(in);
}

}  // namespace nlens

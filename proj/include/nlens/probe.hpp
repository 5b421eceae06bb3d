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

// Elastic-net regularized multinomial logistic regression over neuron
// activations.
//
// The objective for a batch of tokens is
//
//   -sum_i log softmax(W^T z_i + b)[l_i] + lambda1 |W|_1 + lambda2 |W|_2^2
//
// The bias is never regularized. Training runs Adam on the smooth part and
// follows each step with a soft-threshold on W, so the L1 term produces
// exact zeros. The threshold is scaled by Adam's per-coordinate step size,
// which makes it the proximal map of the L1 term in Adam's diagonal metric.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
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

struct ProbeConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 256;
  std::size_t epochs = 10;
  std::uint64_t seed = 42;
  bool use_bias = true;
  // z-score inputs with training-set statistics; stored in the model.
  bool normalize = false;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct ProbeModel {
  Matrix weights;  // dim x labels
  Vector bias;     // labels; all zero when config.use_bias is false
  std::vector<std::string> label_vocab;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  ProbeConfig config;
  // Empty unless config.normalize.
  Vector input_mean;
  Vector input_scale;

  ProbeModel() = default;

  ProbeModel(std::size_t dim, std::vector<std::string> vocab)
      : weights(Matrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(vocab.size()))),
        bias(Vector::Zero(static_cast<Eigen::Index>(vocab.size()))),
        label_vocab(std::move(vocab)) {}

  std::size_t dim() const { return static_cast<std::size_t>(weights.rows()); }
  std::size_t num_labels() const { return static_cast<std::size_t>(weights.cols()); }

  // Fraction of exactly-zero weights; the bias is not counted.
  double sparsity() const {
    if (weights.size() == 0) return 0.0;
    return static_cast<double>((weights.array() == 0.0).count()) / static_cast<double>(weights.size());
  }

  // Applies the stored normalization (if any) to a (tokens x dim) matrix.
  Matrix prepare(const Matrix& inputs) const {
    if (input_mean.size() == 0) return inputs;
    return (inputs.rowwise() - input_mean.transpose()).array().rowwise() / input_scale.transpose().array();
  }
};

struct TrainReport {
  // Regularized objective on the full training set after each epoch, with
  // the data term averaged over tokens.
  std::vector<double> epoch_loss;
  double train_accuracy = 0.0;
  std::optional<double> test_accuracy;
  double sparsity = 0.0;
};

enum class LossReduction { kSum, kMean };

struct LossGradient {
  double loss = 0.0;  // data term + lambda1 |W|_1 + lambda2 |W|_2^2
  double data_loss = 0.0;
  Matrix weights;  // gradient of the smooth part
  Vector bias;
};

namespace detail {

inline void softmax_rows(Matrix& logits) {
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
}

inline std::size_t argmax_lowest(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  std::size_t best = 0;
  for (Eigen::Index j = 1; j < row.size(); ++j) {
    if (row(j) > row(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(j);
  }
  return best;
}

inline void check_batch(const ProbeModel& model, const Matrix& inputs, std::span<const int> labels) {
  if (inputs.rows() == 0) throw InputError("batch is empty");
  if (static_cast<std::size_t>(inputs.cols()) != model.dim()) {
    throw InputError("dimension mismatch: model has " + std::to_string(model.dim()) + " inputs, data has " +
                     std::to_string(inputs.cols()));
  }
  if (static_cast<std::size_t>(inputs.rows()) != labels.size()) {
    throw InputError("batch has " + std::to_string(inputs.rows()) + " rows but " + std::to_string(labels.size()) +
                     " labels");
  }
  for (int id : labels) {
    if (id < 0 || static_cast<std::size_t>(id) >= model.num_labels()) throw InputError("label id out of range");
  }
}

inline double l1_norm(const Matrix& w) { return w.array().abs().sum(); }

}  // namespace detail

// Loss and smooth-part gradient on prepared inputs (normalization already
// applied). The L1 term is included in `loss` but not in the gradient.
inline LossGradient loss_and_gradient(const ProbeModel& model, const Matrix& inputs, std::span<const int> labels,
                                      LossReduction reduction = LossReduction::kSum) {
  detail::check_batch(model, inputs, labels);
  Matrix probs = inputs * model.weights;
  probs.rowwise() += model.bias.transpose();
  // Log-sum-exp per row for the loss, then turn the row into probabilities.
  double nll = 0.0;
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    auto row = probs.row(r);
    const double top = row.maxCoeff();
    const double log_norm = top + std::log((row.array() - top).exp().sum());
    nll += log_norm - row(labels[static_cast<std::size_t>(r)]);
  }
  detail::softmax_rows(probs);
  for (Eigen::Index r = 0; r < probs.rows(); ++r) probs(r, labels[static_cast<std::size_t>(r)]) -= 1.0;
  const double scale = reduction == LossReduction::kMean ? 1.0 / static_cast<double>(inputs.rows()) : 1.0;

  LossGradient out;
  out.data_loss = nll * scale;
  out.loss = out.data_loss + model.lambda1 * detail::l1_norm(model.weights) +
             model.lambda2 * model.weights.squaredNorm();
  out.weights = scale * (inputs.transpose() * probs) + 2.0 * model.lambda2 * model.weights;
  if (model.config.use_bias) {
    out.bias = scale * probs.colwise().sum().transpose();
  } else {
    out.bias = Vector::Zero(model.bias.size());
  }
  return out;
}

inline LossGradient loss_and_gradient(const ProbeModel& model, const LabeledDataset& batch,
                                      LossReduction reduction = LossReduction::kSum) {
  const std::vector<int> labels = flat_labels(batch);
  return loss_and_gradient(model, model.prepare(stack_activations(batch.base)), labels, reduction);
}

// Softmax distribution over labels for one activation vector.
inline Vector predict(const ProbeModel& model, const Eigen::Ref<const Vector>& activation) {
  if (static_cast<std::size_t>(activation.size()) != model.dim()) {
    throw InputError("dimension mismatch: expected " + std::to_string(model.dim()) + " values");
  }
  if (!activation.allFinite()) throw InputError("activation contains a non-finite value");
  Matrix row = activation.transpose();
  row = model.prepare(row);
  Matrix logits = row * model.weights;
  logits.row(0) += model.bias.transpose();
  detail::softmax_rows(logits);
  return logits.row(0).transpose();
}

// Maps the dataset's label ids onto the model's vocabulary by name.
inline std::vector<int> labels_in_model_vocab(const ProbeModel& model, const LabeledDataset& data) {
  std::unordered_map<std::string, int> model_ids;
  for (std::size_t i = 0; i < model.label_vocab.size(); ++i) model_ids.emplace(model.label_vocab[i], static_cast<int>(i));
  std::vector<int> remap(data.label_vocab.size(), -1);
  for (std::size_t i = 0; i < data.label_vocab.size(); ++i) {
    auto it = model_ids.find(data.label_vocab[i]);
    if (it != model_ids.end()) remap[i] = it->second;
  }
  std::vector<int> out;
  out.reserve(data.num_tokens());
  for (const auto& sentence : data.labels) {
    for (int id : sentence) {
      const int mapped = remap.at(static_cast<std::size_t>(id));
      if (mapped < 0) {
        throw InputError("label '" + data.label_vocab[static_cast<std::size_t>(id)] + "' is unknown to the model");
      }
      out.push_back(mapped);
    }
  }
  return out;
}

// Accuracy of argmax predictions on prepared inputs; ties go to the lowest id.
inline double accuracy(const ProbeModel& model, const Matrix& inputs, std::span<const int> labels) {
  detail::check_batch(model, inputs, labels);
  Matrix logits = inputs * model.weights;
  logits.rowwise() += model.bias.transpose();
  std::size_t correct = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    if (detail::argmax_lowest(logits.row(r)) == static_cast<std::size_t>(labels[static_cast<std::size_t>(r)])) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(inputs.rows());
}

inline double evaluate(const ProbeModel& model, const LabeledDataset& test) {
  if (test.dim() != model.dim() && test.num_tokens() > 0) {
    throw InputError("dimension mismatch: model has " + std::to_string(model.dim()) + " inputs, data has " +
                     std::to_string(test.dim()));
  }
  const std::vector<int> labels = labels_in_model_vocab(model, test);
  return accuracy(model, model.prepare(stack_activations(test.base)), labels);
}

namespace detail {

struct AdamState {
  Matrix m, v;
  Vector mb, vb;
  std::size_t step = 0;
};

}  // namespace detail

inline std::pair<ProbeModel, TrainReport> train_probe(const LabeledDataset& train, double lambda1, double lambda2,
                                                      const ProbeConfig& config = {},
                                                      const LabeledDataset* test = nullptr) {
  if (train.num_tokens() == 0) throw InputError("training set is empty");
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw InputError("regularization strengths must be non-negative");
  if (config.batch_size == 0 || config.epochs == 0) throw InputError("batch size and epochs must be positive");
  if (!(config.learning_rate > 0.0)) throw InputError("learning rate must be positive");

  ProbeModel model(train.dim(), train.label_vocab);
  model.lambda1 = lambda1;
  model.lambda2 = lambda2;
  model.config = config;

  Matrix inputs = stack_activations(train.base);
  if (config.normalize) {
    model.input_mean = inputs.colwise().mean().transpose();
    Vector var = (inputs.rowwise() - model.input_mean.transpose()).array().square().colwise().mean().transpose();
    model.input_scale = var.array().sqrt().max(1e-12).matrix();
    inputs = model.prepare(inputs);
  }
  const std::vector<int> labels = flat_labels(train);
  const std::size_t n = labels.size();

  detail::AdamState adam;
  adam.m = Matrix::Zero(model.weights.rows(), model.weights.cols());
  adam.v = adam.m;
  adam.mb = Vector::Zero(model.bias.size());
  adam.vb = adam.mb;

  Rng rng(config.seed);
  TrainReport report;
  std::vector<int> batch_labels;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<std::size_t> order = rng.permutation(n);
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t stop = std::min(n, start + config.batch_size);
      std::vector<Eigen::Index> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                     order.begin() + static_cast<std::ptrdiff_t>(stop));
      const Matrix batch = inputs(rows, Eigen::all);
      batch_labels.clear();
      for (Eigen::Index r : rows) batch_labels.push_back(labels[static_cast<std::size_t>(r)]);

      const LossGradient g = loss_and_gradient(model, batch, batch_labels, LossReduction::kMean);
      if (!std::isfinite(g.loss) || !g.weights.allFinite()) {
        throw NumericalError("probe training diverged (non-finite loss) in epoch " + std::to_string(epoch + 1));
      }
      ++adam.step;
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(adam.step));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(adam.step));
      adam.m = config.beta1 * adam.m + (1.0 - config.beta1) * g.weights;
      adam.v = config.beta2 * adam.v + (1.0 - config.beta2) * g.weights.cwiseAbs2();
      const Matrix denom = ((adam.v / c2).array().sqrt() + config.epsilon).matrix();
      model.weights.array() -= config.learning_rate * (adam.m / c1).array() / denom.array();
      if (lambda1 > 0.0) {
        const Eigen::ArrayXXd threshold = config.learning_rate * lambda1 / denom.array();
        model.weights = (model.weights.array().sign() * (model.weights.array().abs() - threshold).max(0.0)).matrix();
      }
      if (config.use_bias) {
        adam.mb = config.beta1 * adam.mb + (1.0 - config.beta1) * g.bias;
        adam.vb = config.beta2 * adam.vb + (1.0 - config.beta2) * g.bias.cwiseAbs2();
        model.bias.array() -=
            config.learning_rate * (adam.mb / c1).array() / ((adam.vb / c2).array().sqrt() + config.epsilon);
      }
    }
    const double objective = loss_and_gradient(model, inputs, labels, LossReduction::kMean).loss;
    if (!std::isfinite(objective)) {
      throw NumericalError("probe training diverged (non-finite loss) in epoch " + std::to_string(epoch + 1));
    }
    report.epoch_loss.push_back(objective);
  }
  report.train_accuracy = accuracy(model, inputs, labels);
  if (test != nullptr) report.test_accuracy = evaluate(model, *test);
  report.sparsity = model.sparsity();
  return {std::move(model), std::move(report)};
}

struct GridRow {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double accuracy = 0.0;
  double sparsity = 0.0;
};

// One row per (lambda1, lambda2) pair, lambda1-major.
inline std::vector<GridRow> grid_search(const LabeledDataset& train, const LabeledDataset& heldout,
                                        std::span<const double> lambda1_values, std::span<const double> lambda2_values,
                                        const ProbeConfig& config = {}) {
  if (lambda1_values.empty() || lambda2_values.empty()) throw InputError("grid search needs non-empty value lists");
  std::vector<GridRow> rows;
  for (double l1 : lambda1_values) {
    for (double l2 : lambda2_values) {
      auto [model, report] = train_probe(train, l1, l2, config);
      rows.push_back({l1, l2, evaluate(model, heldout), report.sparsity});
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json probe_to_json(const ProbeModel& model) {
  using nlohmann::json;
  json weights = json::array();
  for (Eigen::Index r = 0; r < model.weights.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < model.weights.cols(); ++c) row.push_back(model.weights(r, c));
    weights.push_back(std::move(row));
  }
  auto vec = [](const Vector& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
  };
  const ProbeConfig& c = model.config;
  json doc = {
      {"dim", model.dim()},
      {"label_vocab", model.label_vocab},
      {"lambda1", model.lambda1},
      {"lambda2", model.lambda2},
      {"bias", vec(model.bias)},
      {"weights", std::move(weights)},
      {"config",
       {{"learning_rate", c.learning_rate},
        {"batch_size", c.batch_size},
        {"epochs", c.epochs},
        {"seed", c.seed},
        {"use_bias", c.use_bias},
        {"normalize", c.normalize},
        {"beta1", c.beta1},
        {"beta2", c.beta2},
        {"epsilon", c.epsilon}}},
  };
  if (model.input_mean.size() > 0) {
    doc["input_mean"] = vec(model.input_mean);
    doc["input_scale"] = vec(model.input_scale);
  }
  return doc;
}

inline ProbeModel probe_from_json(const nlohmann::json& doc) {
  try {
    const auto dim = doc.at("dim").get<std::size_t>();
    ProbeModel model(dim, doc.at("label_vocab").get<std::vector<std::string>>());
    model.lambda1 = doc.at("lambda1").get<double>();
    model.lambda2 = doc.at("lambda2").get<double>();
    const auto& weights = doc.at("weights");
    if (weights.size() != dim) throw InputError("probe weights must have " + std::to_string(dim) + " rows");
    for (std::size_t r = 0; r < dim; ++r) {
      if (weights[r].size() != model.num_labels()) throw InputError("probe weight row has the wrong length");
      for (std::size_t c = 0; c < model.num_labels(); ++c) {
        model.weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = weights[r][c].get<double>();
      }
    }
    auto read_vec = [](const nlohmann::json& arr, std::size_t expected) {
      if (arr.size() != expected) throw InputError("probe vector has the wrong length");
      Vector v(static_cast<Eigen::Index>(expected));
      for (std::size_t i = 0; i < expected; ++i) v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
      return v;
    };
    model.bias = read_vec(doc.at("bias"), model.num_labels());
    if (doc.contains("input_mean")) {
      model.input_mean = read_vec(doc.at("input_mean"), dim);
      model.input_scale = read_vec(doc.at("input_scale"), dim);
    }
    if (doc.contains("config")) {
      const auto& c = doc.at("config");
      ProbeConfig& cfg = model.config;
      cfg.learning_rate = c.value("learning_rate", cfg.learning_rate);
      cfg.batch_size = c.value("batch_size", cfg.batch_size);
      cfg.epochs = c.value("epochs", cfg.epochs);
      cfg.seed = c.value("seed", cfg.seed);
      cfg.use_bias = c.value("use_bias", cfg.use_bias);
      cfg.normalize = c.value("normalize", cfg.normalize);
      cfg.beta1 = c.value("beta1", cfg.beta1);
      cfg.beta2 = c.value("beta2", cfg.beta2);
      cfg.epsilon = c.value("epsilon", cfg.epsilon);
    }
    if (!model.weights.allFinite() || !model.bias.allFinite()) throw InputError("probe contains non-finite values");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed probe model: ") + e.what());
  }
}

inline void save_probe(const std::string& path, const ProbeModel& model) {
  auto out = detail::open_output(path);
  out << probe_to_json(model).dump(1) << '\n';
  detail::finish_output(out, path);
}

inline ProbeModel load_probe(const std::string& path) {
  auto in = detail::open_input(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("'" + path + "': malformed JSON (" + e.what() + ")");
  }
  return probe_from_json(doc);
}

}  // namespace nlens

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

// Command-line front end. `run` returns the process exit code:
// 0 success, 1 input or usage error, 2 numerical failure.

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif
#include <nlohmann/json.hpp>

#include "nlens/ablation.hpp"
#include "nlens/activation_store.hpp"
#include "nlens/crossmodel.hpp"
#include "nlens/detail/io.hpp"
#include "nlens/errors.hpp"
#include "nlens/probe.hpp"
#include "nlens/ranking.hpp"
#include "nlens/report.hpp"
#include "nlens/toylm.hpp"

namespace nlens::cli {

enum ExitCode : int { kOk = 0, kInputError = 1, kNumericalError = 2 };

namespace detail {

inline void write_json(const std::string& path, const nlohmann::json& doc) {
  auto out = nlens::detail::open_output(path);
  out << doc.dump(2) << '\n';
  nlens::detail::finish_output(out, path);
}

inline void write_text(const std::string& path, const std::string& text) {
  auto out = nlens::detail::open_output(path);
  out << text;
  nlens::detail::finish_output(out, path);
}

inline LabeledDataset load_labeled(const std::string& activations, const std::string& labels,
                                   const std::vector<std::string>& vocab = {}) {
  const ActivationDataset base = load_activations(activations);
  if (labels.empty()) return auto_label_position(base);
  return load_labels(labels, base, vocab);
}

// "name=path" or a bare path (named after its position).
inline std::pair<std::string, std::string> split_named(const std::string& item, std::size_t position) {
  const auto eq = item.find('=');
  if (eq == std::string::npos) return {std::to_string(position), item};
  if (eq == 0 || eq + 1 == item.size()) throw InputError("expected name=path, got '" + item + "'");
  return {item.substr(0, eq), item.substr(eq + 1)};
}

inline std::vector<std::size_t> label_ids(const ProbeModel& model, const std::vector<std::string>& tags) {
  std::vector<std::size_t> ids;
  for (const auto& tag : tags) {
    const auto it = std::find(model.label_vocab.begin(), model.label_vocab.end(), tag);
    if (it == model.label_vocab.end()) throw InputError("label '" + tag + "' is not known to the probe");
    ids.push_back(static_cast<std::size_t>(it - model.label_vocab.begin()));
  }
  return ids;
}

inline std::vector<std::size_t> curve_steps(const std::vector<std::size_t>& counts, const std::vector<double>& percents,
                                            std::size_t dim) {
  std::vector<std::size_t> steps = counts;
  for (double p : percents) steps.push_back(p == 0.0 ? 0 : percent_count(p, dim));
  std::sort(steps.begin(), steps.end());
  steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
  return steps;
}

inline std::string join(const std::vector<std::size_t>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? " " : "") + std::to_string(xs[i]);
  return out;
}

}  // namespace detail

// Parses and executes one command. Help goes to `out`; diagnostics, the
// resolved configuration and progress go to `err`; results go to files.
inline int run(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Neuron-level analysis of trained models: probes, rankings, ablation and a toy language model.",
               "nlens"};
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 42;
  bool quiet = false;
  app.add_option("--seed", seed, "Random seed")->capture_default_str();
  app.add_flag("--quiet", quiet, "Suppress progress and configuration output");

  // Probe options shared by the training commands.
  ProbeConfig probe_cfg;
  double l1 = 1e-5, l2 = 1e-5;
  bool no_bias = false;
  auto add_probe_options = [&](CLI::App* sub) {
    sub->add_option("--l1", l1, "L1 weight")->capture_default_str()->check(CLI::NonNegativeNumber);
    sub->add_option("--l2", l2, "L2 weight")->capture_default_str()->check(CLI::NonNegativeNumber);
    sub->add_option("--lr", probe_cfg.learning_rate, "Learning rate")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--batch", probe_cfg.batch_size, "Mini-batch size")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--epochs", probe_cfg.epochs, "Training epochs")->capture_default_str();
    sub->add_flag("--no-bias", no_bias, "Train without a bias term");
    sub->add_flag("--normalize", probe_cfg.normalize, "z-score inputs with training statistics");
  };

  std::string activations, labels, model_path, out_path, ranking_path, direction_text = "top";

  // probe-train
  auto* probe_train = app.add_subcommand("probe-train", "Train an elastic-net probe on labeled activations");
  std::string test_activations, test_labels, report_path;
  probe_train->add_option("--activations", activations, "Activation file (JSON lines)")->required();
  probe_train->add_option("--labels", labels, "Tag file, one line of tags per sentence (default: position classes)");
  probe_train->add_option("--test-activations", test_activations, "Optional test activations");
  probe_train->add_option("--test-labels", test_labels, "Tags for the test activations");
  probe_train->add_option("--report", report_path, "Write the training report (JSON) here");
  probe_train->add_option("--out", out_path, "Output probe (JSON)")->required();
  add_probe_options(probe_train);

  // probe-eval
  auto* probe_eval = app.add_subcommand("probe-eval", "Accuracy of a trained probe");
  probe_eval->add_option("--model", model_path, "Probe file")->required();
  probe_eval->add_option("--activations", activations, "Activation file")->required();
  probe_eval->add_option("--labels", labels, "Tag file (default: position classes)");
  probe_eval->add_option("--out", out_path, "Output metrics (JSON)")->required();

  // rank
  double alpha = 1.0;
  auto* rank = app.add_subcommand("rank", "Global neuron ranking from probe weights");
  rank->add_option("--model", model_path, "Probe file")->required();
  rank->add_option("--alpha", alpha, "Percentage increment")->capture_default_str()->check(CLI::Range(1e-9, 100.0));
  rank->add_option("--out", out_path, "Output ranking")->required();

  // rank-cross
  std::vector<std::string> model_activations;
  std::size_t target = 0, workers = 1;
  std::string method = "cross", scores_path;
  bool signed_max = false;
  auto* rank_cross = app.add_subcommand("rank-cross", "Unsupervised ranking from activations of several models");
  rank_cross->add_option("--activations", model_activations, "Activation file per model, same tokens in each")
      ->required();
  rank_cross->add_option("--target", target, "Index of the model to rank")->capture_default_str();
  rank_cross->add_option("--method", method, "cross | variance | mean_distance")
      ->capture_default_str()
      ->check(CLI::IsMember({"cross", "variance", "mean_distance"}));
  rank_cross->add_flag("--signed", signed_max, "Use the signed rather than absolute correlation");
  rank_cross->add_option("--workers", workers, "Threads for the correlation sweep")->capture_default_str();
  rank_cross->add_option("--scores", scores_path, "Also write per-neuron scores here");
  rank_cross->add_option("--out", out_path, "Output ranking")->required();

  // ablate-mask
  double percent = 10.0;
  std::vector<std::size_t> step_counts;
  std::vector<double> step_percents;
  auto* ablate_mask = app.add_subcommand("ablate-mask", "Mask neurons at test time and score a trained probe");
  ablate_mask->add_option("--model", model_path, "Probe file")->required();
  ablate_mask->add_option("--activations", activations, "Test activations")->required();
  ablate_mask->add_option("--labels", labels, "Test tags (default: position classes)");
  ablate_mask->add_option("--ranking", ranking_path, "Neuron ranking")->required();
  ablate_mask->add_option("--direction", direction_text, "top | bottom")
      ->capture_default_str()
      ->check(CLI::IsMember({"top", "bottom"}));
  ablate_mask->add_option("--percent", percent, "Keep this percentage of neurons from the chosen end")
      ->capture_default_str()
      ->check(CLI::Range(1e-9, 100.0));
  auto* mask_steps = ablate_mask->add_option("--steps", step_counts, "Curve mode: numbers of neurons to mask");
  ablate_mask->add_option("--step-percents", step_percents, "Curve mode: percentages of neurons to mask");
  ablate_mask->add_option("--out", out_path, "Output metrics (JSON) or curve file in curve mode")->required();

  // ablate-retrain
  std::string train_activations, train_labels;
  auto* ablate_retrain = app.add_subcommand("ablate-retrain", "Retrain a probe on a neuron subset");
  ablate_retrain->add_option("--train-activations", train_activations, "Training activations")->required();
  ablate_retrain->add_option("--train-labels", train_labels, "Training tags (default: position classes)");
  ablate_retrain->add_option("--test-activations", test_activations, "Test activations")->required();
  ablate_retrain->add_option("--test-labels", test_labels, "Test tags (default: position classes)");
  ablate_retrain->add_option("--ranking", ranking_path, "Neuron ranking")->required();
  ablate_retrain->add_option("--direction", direction_text, "top | bottom")
      ->capture_default_str()
      ->check(CLI::IsMember({"top", "bottom"}));
  ablate_retrain->add_option("--percent", percent, "Keep this percentage of neurons")
      ->capture_default_str()
      ->check(CLI::Range(1e-9, 100.0));
  ablate_retrain->add_option("--out", out_path, "Output metrics (JSON)")->required();
  add_probe_options(ablate_retrain);

  // lm-train
  ToyLMConfig lm_cfg;
  std::string corpus_path;
  std::size_t part = 0, parts = 1;
  auto* lm_train = app.add_subcommand("lm-train", "Train the toy LSTM language model");
  lm_train->add_option("--corpus", corpus_path, "Training text, one sentence per line")->required();
  lm_train->add_option("--part", part, "Train on this share of the corpus")->capture_default_str();
  lm_train->add_option("--parts", parts, "Number of disjoint shares")->capture_default_str()->check(CLI::PositiveNumber);
  lm_train->add_option("--vocab-cap", lm_cfg.vocab_cap, "Vocabulary size including reserved symbols")
      ->capture_default_str();
  lm_train->add_option("--embedding-dim", lm_cfg.embedding_dim, "Embedding width")->capture_default_str();
  lm_train->add_option("--hidden-dim", lm_cfg.hidden_dim, "Hidden units per layer")->capture_default_str();
  lm_train->add_option("--layers", lm_cfg.layers, "LSTM layers")->capture_default_str();
  lm_train->add_option("--unroll", lm_cfg.unroll, "Truncated BPTT length")->capture_default_str();
  lm_train->add_option("--batch", lm_cfg.batch_size, "Sentences per update")->capture_default_str();
  lm_train->add_option("--epochs", lm_cfg.epochs, "Training epochs")->capture_default_str();
  lm_train->add_option("--lr", lm_cfg.learning_rate, "Learning rate")->capture_default_str();
  lm_train->add_option("--clip", lm_cfg.clip_norm, "Gradient norm clip")->capture_default_str();
  lm_train->add_option("--out", out_path, "Output model")->required();

  // lm-extract
  auto* lm_extract = app.add_subcommand("lm-extract", "Record hidden activations of a toy LM");
  lm_extract->add_option("--model", model_path, "Model file")->required();
  lm_extract->add_option("--corpus", corpus_path, "Text to run")->required();
  lm_extract->add_option("--out", out_path, "Output activations (JSON lines)")->required();

  // lm-ablate
  auto* lm_ablate = app.add_subcommand("lm-ablate", "Perplexity curve while clamping ranked units to zero");
  lm_ablate->add_option("--model", model_path, "Model file")->required();
  lm_ablate->add_option("--corpus", corpus_path, "Evaluation text")->required();
  lm_ablate->add_option("--ranking", ranking_path, "Neuron ranking")->required();
  lm_ablate->add_option("--direction", direction_text, "top | bottom")
      ->capture_default_str()
      ->check(CLI::IsMember({"top", "bottom"}));
  lm_ablate->add_option("--steps", step_counts, "Numbers of units to clamp");
  lm_ablate->add_option("--step-percents", step_percents, "Percentages of units to clamp");
  lm_ablate->add_option("--out", out_path, "Output curve")->required();

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Neuron-level analyses");
  analyze->require_subcommand(1);
  double salient_percent = 25.0;
  auto* salient = analyze->add_subcommand("salient-counts", "Salient neurons per label");
  salient->add_option("--model", model_path, "Probe file")->required();
  salient->add_option("--percent", salient_percent, "Share of weight mass")
      ->capture_default_str()
      ->check(CLI::Range(1e-9, 100.0));
  salient->add_option("--out", out_path, "Output table (TSV)")->required();

  std::vector<std::string> tags;
  auto* shared = analyze->add_subcommand("shared", "Neurons shared between labels and exclusive to each");
  shared->add_option("--model", model_path, "Probe file")->required();
  shared->add_option("--tags", tags, "Two or more labels")->required()->expected(2, -1);
  shared->add_option("--percent", salient_percent, "Share of weight mass")
      ->capture_default_str()
      ->check(CLI::Range(1e-9, 100.0));
  shared->add_option("--out", out_path, "Output table (TSV)")->required();

  std::vector<std::string> ranking_paths;
  std::size_t k = 10;
  auto* overlap = analyze->add_subcommand("overlap", "Pairwise top-k overlap of rankings");
  overlap->add_option("--ranking", ranking_paths, "Ranking files, optionally name=path")->required()->expected(2, -1);
  overlap->add_option("--k", k, "Prefix length")->capture_default_str()->check(CLI::PositiveNumber);
  overlap->add_option("--out", out_path, "Output matrix (TSV)")->required();

  std::size_t neuron = 0, sentence = 0, min_count = 5;
  auto* top_words = analyze->add_subcommand("top-words", "Words that most activate a neuron");
  top_words->add_option("--activations", activations, "Activation file")->required();
  top_words->add_option("--neuron", neuron, "Neuron index")->required();
  top_words->add_option("--k", k, "Words to list")->capture_default_str();
  top_words->add_option("--min-count", min_count, "Minimum occurrences")->capture_default_str();
  top_words->add_option("--out", out_path, "Output table (TSV)")->required();

  std::string format = "text";
  auto* heat = analyze->add_subcommand("heatmap", "Per-token activation heatmap of one neuron");
  heat->add_option("--activations", activations, "Activation file")->required();
  heat->add_option("--sentence", sentence, "Sentence index")->required();
  heat->add_option("--neuron", neuron, "Neuron index")->required();
  heat->add_option("--format", format, "text | html")->capture_default_str()->check(CLI::IsMember({"text", "html"}));
  heat->add_option("--out", out_path, "Output file")->required();

  // report
  std::vector<std::string> curve_paths;
  std::vector<double> salient_percents;
  std::string out_dir;
  std::size_t overlap_k = 50;
  auto* report = app.add_subcommand("report", "Summary report directory");
  report->add_option("--model", model_path, "Probe file")->required();
  report->add_option("--ranking", ranking_paths, "Ranking files, optionally name=path");
  report->add_option("--curve", curve_paths, "Curve files, optionally name=path");
  report->add_option("--salient", salient_percents, "Salient-count tables at these percentages");
  report->add_option("--shared", tags, "Labels for a shared-neuron table");
  report->add_option("--overlap-k", overlap_k, "Prefix length for the overlap matrix")->capture_default_str();
  report->add_option("--out-dir", out_dir, "Output directory")->required();

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kInputError;
  }

  CLI::App* active = app.get_subcommands().front();
  CLI::App* leaf = active->get_subcommands().empty() ? active : active->get_subcommands().front();
  auto log = [&](const std::string& message) {
    if (!quiet) err << message << '\n';
  };
  if (!quiet) {
    err << "# nlens " << leaf->get_name() << "\nseed=" << seed << '\n' << leaf->config_to_str(true, false);
  }

  probe_cfg.seed = seed;
  probe_cfg.use_bias = !no_bias;
  lm_cfg.seed = seed;

  try {
    if (active == probe_train) {
      const LabeledDataset train = detail::load_labeled(activations, labels);
      std::optional<LabeledDataset> test;
      if (!test_activations.empty()) test = detail::load_labeled(test_activations, test_labels, train.label_vocab);
      log("training probe on " + std::to_string(train.num_tokens()) + " tokens, " + std::to_string(train.dim()) +
          " neurons, " + std::to_string(train.num_labels()) + " labels");
      auto [model, rep] = train_probe(train, l1, l2, probe_cfg, test ? &*test : nullptr);
      save_probe(out_path, model);
      log("train accuracy " + nlens::detail::format_double(rep.train_accuracy) + ", sparsity " +
          nlens::detail::format_double(rep.sparsity));
      if (!report_path.empty()) {
        nlohmann::json doc{{"epoch_loss", rep.epoch_loss},
                           {"train_accuracy", rep.train_accuracy},
                           {"sparsity", rep.sparsity}};
        if (rep.test_accuracy) doc["test_accuracy"] = *rep.test_accuracy;
        detail::write_json(report_path, doc);
      }
    } else if (active == probe_eval) {
      const ProbeModel model = load_probe(model_path);
      const LabeledDataset test = detail::load_labeled(activations, labels, model.label_vocab);
      const double acc = evaluate(model, test);
      detail::write_json(out_path, {{"accuracy", acc}, {"tokens", test.num_tokens()}});
      log("accuracy " + nlens::detail::format_double(acc));
    } else if (active == rank) {
      save_ranking(out_path, extract_ranking(load_probe(model_path), alpha));
    } else if (active == rank_cross) {
      std::vector<ActivationDataset> sets;
      for (const auto& path : model_activations) sets.push_back(load_activations(path));
      if (target >= sets.size()) throw InputError("--target is out of range");
      for (const auto& set : sets) {
        if (set.sentences != sets.front().sentences) {
          throw InputError("activation files were not extracted from the same sentences");
        }
      }
      std::vector<Matrix> stacked;
      for (const auto& set : sets) stacked.push_back(stack_activations(set));
      NeuronRanking ranking;
      if (method == "cross") {
        const CrossModelScores scores =
            cross_model_scores(stacked, target, CrossModelOptions{signed_max, std::max<std::size_t>(workers, 1)});
        if (!scores_path.empty()) save_scores(scores_path, scores);
        ranking = cross_model_ranking(scores);
        ranking.params["signed"] = signed_max ? "true" : "false";
        ranking.params["target"] = std::to_string(target);
      } else if (method == "variance") {
        ranking = rank_by_variance(stacked[target]);
      } else {
        ranking = rank_by_mean_distance(stacked[target]);
      }
      save_ranking(out_path, ranking);
    } else if (active == ablate_mask) {
      const ProbeModel model = load_probe(model_path);
      const LabeledDataset test = detail::load_labeled(activations, labels, model.label_vocab);
      const NeuronRanking ranking = load_ranking(ranking_path);
      if (ranking.size() != model.dim()) throw InputError("ranking and probe disagree on the number of neurons");
      const Direction direction = parse_direction(direction_text);
      if (!step_counts.empty() || !step_percents.empty() || mask_steps->count() > 0) {
        const auto steps = detail::curve_steps(step_counts, step_percents, model.dim());
        save_curve(out_path, ablation_curve(ranking, direction, steps, masked_probe_evaluator(model, test)));
      } else {
        const auto keep = select_neurons(ranking, direction, percent_count(percent, model.dim()));
        const double acc = evaluate_masked(model, test, keep);
        detail::write_json(out_path, {{"direction", direction_text},
                                      {"percent", percent},
                                      {"kept", keep},
                                      {"accuracy", acc},
                                      {"unmasked_accuracy", evaluate(model, test)}});
        log("masked accuracy " + nlens::detail::format_double(acc));
      }
    } else if (active == ablate_retrain) {
      const LabeledDataset train = detail::load_labeled(train_activations, train_labels);
      const LabeledDataset test = detail::load_labeled(test_activations, test_labels, train.label_vocab);
      const NeuronRanking ranking = load_ranking(ranking_path);
      if (ranking.size() != train.dim()) throw InputError("ranking and activations disagree on the number of neurons");
      const auto keep = select_neurons(ranking, parse_direction(direction_text), percent_count(percent, train.dim()));
      const double acc = retrain_subset(train, test, keep, l1, l2, probe_cfg);
      detail::write_json(out_path,
                         {{"direction", direction_text}, {"percent", percent}, {"kept", keep}, {"accuracy", acc}});
      log("retrained accuracy " + nlens::detail::format_double(acc));
    } else if (active == lm_train) {
      const Corpus corpus = load_corpus(corpus_path);
      TrainedLM trained = parts == 1 && part == 0 ? train_lm(corpus, lm_cfg) : train_lm_part(corpus, lm_cfg, part, parts);
      for (std::size_t e = 0; e < trained.epoch_perplexity.size(); ++e) {
        log("epoch " + std::to_string(e + 1) + " training perplexity " +
            nlens::detail::format_double(trained.epoch_perplexity[e]));
      }
      save_lm(out_path, trained.model);
    } else if (active == lm_extract) {
      save_activations(out_path, extract_activations(load_lm(model_path), load_corpus(corpus_path)));
    } else if (active == lm_ablate) {
      const ToyLM lm = load_lm(model_path);
      const Corpus corpus = load_corpus(corpus_path);
      const NeuronRanking ranking = load_ranking(ranking_path);
      if (ranking.size() != lm.activation_dim()) throw InputError("ranking and model disagree on the number of units");
      std::vector<std::size_t> steps = detail::curve_steps(step_counts, step_percents, lm.activation_dim());
      if (steps.empty()) steps = {0, std::min<std::size_t>(20, lm.activation_dim())};
      const AblationCurve curve = ablation_curve(ranking, parse_direction(direction_text), steps, toy_lm_evaluator(lm, corpus));
      for (const auto& p : curve.points) {
        log("clamped " + std::to_string(p.count) + " perplexity " + nlens::detail::format_double(p.metric));
      }
      save_curve(out_path, curve);
    } else if (leaf == salient) {
      std::ostringstream table;
      table << "label\tcount\n";
      for (const auto& row : salient_count_per_label(load_probe(model_path), salient_percent)) {
        table << row.label << '\t' << row.count << '\n';
      }
      detail::write_text(out_path, table.str());
    } else if (leaf == shared) {
      const ProbeModel model = load_probe(model_path);
      const SharedNeurons result = shared_neurons(model, detail::label_ids(model, tags), salient_percent);
      std::ostringstream table;
      table << "set\tneurons\nshared\t" << detail::join(result.shared) << '\n';
      for (std::size_t i = 0; i < tags.size(); ++i) table << "only:" << tags[i] << '\t' << detail::join(result.exclusive[i]) << '\n';
      detail::write_text(out_path, table.str());
    } else if (leaf == overlap) {
      std::vector<std::pair<std::string, NeuronRanking>> named;
      for (std::size_t i = 0; i < ranking_paths.size(); ++i) {
        auto [name, path] = detail::split_named(ranking_paths[i], i);
        named.emplace_back(name, load_ranking(path));
      }
      std::ostringstream table;
      table << "ranking";
      for (const auto& [name, r] : named) table << '\t' << name;
      table << '\n';
      for (const auto& [name_a, a] : named) {
        table << name_a;
        for (const auto& [name_b, b] : named) table << '\t' << nlens::detail::format_double(topk_overlap(a, b, k));
        table << '\n';
      }
      detail::write_text(out_path, table.str());
    } else if (leaf == top_words) {
      const NeuronProfile profile = top_words_for_neuron(load_activations(activations), neuron, k, min_count);
      std::ostringstream table;
      table << "# neuron=" << profile.neuron << " statistic=" << profile.statistic << "\nword\tscore\tcount\n";
      for (const auto& w : profile.words) table << w.word << '\t' << nlens::detail::format_double(w.score) << '\t' << w.count << '\n';
      detail::write_text(out_path, table.str());
    } else if (leaf == heat) {
      detail::write_text(out_path, heatmap(load_activations(activations), sentence, neuron, parse_heatmap_format(format)));
    } else if (active == report) {
      const ProbeModel model = load_probe(model_path);
      std::vector<NamedRanking> rankings;
      for (std::size_t i = 0; i < ranking_paths.size(); ++i) {
        auto [name, path] = detail::split_named(ranking_paths[i], i);
        rankings.push_back({name, load_ranking(path)});
      }
      std::vector<Analysis> analyses;
      for (double p : salient_percents) analyses.emplace_back(SalientCountsAnalysis{p});
      if (!tags.empty()) analyses.emplace_back(SharedNeuronsAnalysis{detail::label_ids(model, tags), 25.0});
      for (std::size_t i = 0; i < curve_paths.size(); ++i) {
        auto [name, path] = detail::split_named(curve_paths[i], i);
        analyses.emplace_back(CurveAnalysis{name, load_curve(path)});
      }
      const auto files = summary_report(model, rankings, analyses, out_dir, ReportOptions{overlap_k});
      log("wrote " + std::to_string(files.size()) + " files to " + out_dir);
    }
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
  return kOk;
}

inline int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(std::move(args));
}

}  // namespace nlens::cli

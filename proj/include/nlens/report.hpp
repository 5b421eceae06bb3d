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

// Qualitative views of neurons: top words, per-sentence heatmaps, and a
// summary report directory.
//
// Text heatmaps print every token as `word(b)` where b is a signed bucket in
// -4..+4: b = round(4 * v / m), m being the neuron's largest |activation|
// over the dataset. Negative buckets render red and positive buckets blue in
// HTML, with 0 as white.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "nlens/ablation.hpp"
#include "nlens/activation_store.hpp"
#include "nlens/detail/io.hpp"
#include "nlens/errors.hpp"
#include "nlens/probe.hpp"
#include "nlens/ranking.hpp"

namespace nlens {

struct WordScore {
  std::string word;
  double score = 0.0;
  std::size_t count = 0;
};

struct NeuronProfile {
  std::size_t neuron = 0;
  std::string statistic = "mean_abs";
  std::vector<WordScore> words;  // score descending, then word ascending
};

namespace detail {

inline void check_neuron(const ActivationDataset& data, std::size_t neuron) {
  if (neuron >= data.dim) {
    throw InputError("neuron " + std::to_string(neuron) + " out of range (dim " + std::to_string(data.dim) + ")");
  }
}

}  // namespace detail

// Words ranked by mean |activation| of `neuron` over their occurrences.
// Values are summed in sorted order so the result does not depend on the
// order of sentences in the dataset.
inline NeuronProfile top_words_for_neuron(const ActivationDataset& data, std::size_t neuron, std::size_t k,
                                          std::size_t min_count = 5) {
  detail::check_neuron(data, neuron);
  std::map<std::string, std::vector<double>> values;
  for (std::size_t s = 0; s < data.sentences.size(); ++s) {
    for (std::size_t t = 0; t < data.sentences[s].size(); ++t) {
      values[data.sentences[s][t]].push_back(
          std::abs(data.activations[s](static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(neuron))));
    }
  }
  NeuronProfile profile;
  profile.neuron = neuron;
  for (auto& [word, xs] : values) {
    if (xs.size() < min_count || xs.empty()) continue;
    std::sort(xs.begin(), xs.end());
    double sum = 0.0;
    for (double x : xs) sum += x;
    profile.words.push_back({word, sum / static_cast<double>(xs.size()), xs.size()});
  }
  std::stable_sort(profile.words.begin(), profile.words.end(),
                   [](const WordScore& a, const WordScore& b) { return a.score > b.score; });
  if (profile.words.size() > k) profile.words.resize(k);
  return profile;
}

enum class HeatmapFormat { kText, kHtml };

inline HeatmapFormat parse_heatmap_format(const std::string& text) {
  if (text == "text") return HeatmapFormat::kText;
  if (text == "html") return HeatmapFormat::kHtml;
  throw InputError("heatmap format must be 'text' or 'html'");
}

inline double neuron_max_abs(const ActivationDataset& data, std::size_t neuron) {
  double peak = 0.0;
  for (const Matrix& block : data.activations) {
    if (block.rows() == 0) continue;
    peak = std::max(peak, block.col(static_cast<Eigen::Index>(neuron)).cwiseAbs().maxCoeff());
  }
  return peak;
}

// Signed intensity bucket in -4..+4.
inline int heat_bucket(double value, double scale) {
  if (scale <= 0.0) return 0;
  const long b = std::lround(4.0 * value / scale);
  return static_cast<int>(std::clamp<long>(b, -4, 4));
}

inline std::string escape_html(const std::string& text) {
  std::string out;
  for (char ch : text) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += ch;
    }
  }
  return out;
}

// Diverging color: red for negative, white at zero, blue for positive.
inline std::string heat_color(double value, double scale) {
  const double x = scale > 0.0 ? std::clamp(value / scale, -1.0, 1.0) : 0.0;
  const int fade = static_cast<int>(std::lround(255.0 * (1.0 - std::abs(x))));
  int r = 255, g = 255, b = 255;
  if (x < 0.0) {
    g = b = fade;
  } else if (x > 0.0) {
    r = g = fade;
  }
  return "rgb(" + std::to_string(r) + "," + std::to_string(g) + "," + std::to_string(b) + ")";
}

inline std::string heatmap(const ActivationDataset& data, std::size_t sentence, std::size_t neuron,
                           HeatmapFormat format) {
  detail::check_neuron(data, neuron);
  if (sentence >= data.sentences.size()) {
    throw InputError("sentence " + std::to_string(sentence) + " out of range (" +
                     std::to_string(data.sentences.size()) + " sentences)");
  }
  const double scale = neuron_max_abs(data, neuron);
  const auto& words = data.sentences[sentence];
  const Matrix& block = data.activations[sentence];
  std::ostringstream out;
  if (format == HeatmapFormat::kText) {
    out << "# sentence=" << sentence << " neuron=" << neuron << " scale=" << detail::format_double(scale) << '\n';
    for (std::size_t t = 0; t < words.size(); ++t) {
      const int b = heat_bucket(block(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(neuron)), scale);
      if (t) out << ' ';
      out << words[t] << '(' << (b > 0 ? "+" : "") << b << ')';
    }
    out << '\n';
    return out.str();
  }
  out << "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\"/>\n<title>neuron " << neuron << ", sentence "
      << sentence << "</title>\n</head>\n<body>\n<div class=\"heatmap\" style=\"font-family:monospace;line-height:2\">\n";
  for (std::size_t t = 0; t < words.size(); ++t) {
    const double v = block(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(neuron));
    out << "<span class=\"cell\" style=\"background-color:" << heat_color(v, scale) << ";padding:2px\" title=\""
        << detail::format_double(v) << "\">" << escape_html(words[t]) << "</span>\n";
  }
  out << "</div>\n</body>\n</html>\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Summary report

struct NamedRanking {
  std::string name;
  NeuronRanking ranking;
};

struct SalientCountsAnalysis {
  double percent = 25.0;
};

struct SharedNeuronsAnalysis {
  std::vector<std::size_t> labels;
  double percent = 25.0;
};

struct CurveAnalysis {
  std::string name;
  AblationCurve curve;
};

using Analysis = std::variant<SalientCountsAnalysis, SharedNeuronsAnalysis, CurveAnalysis>;

struct ReportOptions {
  std::size_t overlap_k = 50;
};

namespace detail {

inline std::string file_safe(const std::string& name) {
  std::string out;
  for (char ch : name) {
    const bool ok = std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.';
    out += ok ? ch : '_';
  }
  return out.empty() ? std::string("unnamed") : out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = open_output(path.string());
  out << text;
  finish_output(out, path.string());
}

inline std::string join_indices(const std::vector<std::size_t>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(xs[i]);
  }
  return out;
}

}  // namespace detail

// Writes report files into `out_dir` (created if needed) and returns their
// names relative to it; index.md is always first. Output contains no
// timestamps, so identical inputs give identical bytes.
inline std::vector<std::string> summary_report(const ProbeModel& probe, const std::vector<NamedRanking>& rankings,
                                               const std::vector<Analysis>& analyses, const std::string& out_dir,
                                               const ReportOptions& options = {}) {
  namespace fs = std::filesystem;
  for (const auto& r : rankings) {
    if (r.ranking.size() != probe.dim()) {
      throw InputError("ranking '" + r.name + "' covers " + std::to_string(r.ranking.size()) +
                       " neurons but the probe has " + std::to_string(probe.dim()));
    }
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create report directory '" + out_dir + "': " + ec.message());
  const fs::path root(out_dir);

  std::vector<std::string> files{"index.md"};
  std::ostringstream index;
  index << "# Neuron analysis report\n\n## Probe\n\n";
  index << "- neurons: " << probe.dim() << '\n';
  index << "- labels (" << probe.num_labels() << "):";
  for (const auto& label : probe.label_vocab) index << ' ' << label;
  index << '\n';
  index << "- lambda1: " << detail::format_double(probe.lambda1) << '\n';
  index << "- lambda2: " << detail::format_double(probe.lambda2) << '\n';
  index << "- bias: " << (probe.config.use_bias ? "yes" : "no") << '\n';
  index << "- sparsity: " << detail::format_double(probe.sparsity()) << '\n';

  if (!rankings.empty()) {
    index << "\n## Rankings\n\n";
    for (const auto& r : rankings) {
      const std::string name = "ranking_" + detail::file_safe(r.name) + ".txt";
      std::ostringstream body;
      write_ranking(body, r.ranking);
      detail::write_text(root / name, body.str());
      files.push_back(name);
      const std::vector<std::size_t> head = r.ranking.top(std::min<std::size_t>(10, r.ranking.size()));
      index << "- [" << r.name << "](" << name << "), method " << r.ranking.method << ", top 10: "
            << detail::join_indices(head) << '\n';
    }
    if (rankings.size() >= 2 && probe.dim() > 0) {
      const std::size_t k = std::min(options.overlap_k, probe.dim());
      std::ostringstream table;
      table << "# top-" << k << " overlap\nranking";
      for (const auto& r : rankings) table << '\t' << r.name;
      table << '\n';
      for (const auto& a : rankings) {
        table << a.name;
        for (const auto& b : rankings) table << '\t' << detail::format_double(topk_overlap(a.ranking, b.ranking, k));
        table << '\n';
      }
      detail::write_text(root / "overlap.tsv", table.str());
      files.push_back("overlap.tsv");
      index << "- [top-" << k << " overlap matrix](overlap.tsv)\n";
    }
  }

  if (!analyses.empty()) index << "\n## Analyses\n\n";
  std::size_t serial = 0;
  for (const Analysis& analysis : analyses) {
    ++serial;
    if (const auto* sc = std::get_if<SalientCountsAnalysis>(&analysis)) {
      const std::string name = "salient_counts_" + std::to_string(serial) + ".tsv";
      std::ostringstream table;
      table << "# salient neurons at " << detail::format_double(sc->percent) << "% of the weight mass\nlabel\tcount\n";
      for (const auto& row : salient_count_per_label(probe, sc->percent)) table << row.label << '\t' << row.count << '\n';
      detail::write_text(root / name, table.str());
      files.push_back(name);
      index << "- [salient neuron counts at " << detail::format_double(sc->percent) << "%](" << name << ")\n";
    } else if (const auto* sh = std::get_if<SharedNeuronsAnalysis>(&analysis)) {
      const SharedNeurons result = shared_neurons(probe, sh->labels, sh->percent);
      const std::string name = "shared_" + std::to_string(serial) + ".tsv";
      std::ostringstream table;
      table << "# shared and exclusive neurons at " << detail::format_double(sh->percent) << "%\nset\tneurons\n";
      table << "shared\t" << detail::join_indices(result.shared) << '\n';
      for (std::size_t i = 0; i < sh->labels.size(); ++i) {
        table << "only:" << probe.label_vocab.at(sh->labels[i]) << '\t' << detail::join_indices(result.exclusive[i])
              << '\n';
      }
      detail::write_text(root / name, table.str());
      files.push_back(name);
      index << "- [shared neurons](" << name << ")\n";
    } else if (const auto* cv = std::get_if<CurveAnalysis>(&analysis)) {
      const std::string name = "curve_" + detail::file_safe(cv->name) + ".csv";
      std::ostringstream body;
      write_curve(body, cv->curve);
      detail::write_text(root / name, body.str());
      files.push_back(name);
      index << "- [ablation curve " << cv->name << "](" << name << "), direction " << to_string(cv->curve.direction)
            << ", metric " << cv->curve.metric_kind << '\n';
    }
  }
  detail::write_text(root / "index.md", index.str());
  return files;
}

}  // namespace nlens

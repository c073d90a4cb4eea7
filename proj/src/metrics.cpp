// Copyright 2026 The Sparsify Authors.
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

#include "sparsify/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include "sparsify/error.hpp"
#include "sparsify/vocab.hpp"

namespace sparsify {
namespace {

double micro_f1(double tp, double fp, double fn) {
  if (tp + fp + fn == 0) return 1.0;
  return 2 * tp / (2 * tp + fp + fn);
}

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw InputError(std::string(what) + ": " + std::to_string(a) + " predictions for " + std::to_string(b) +
                     " gold items");
  }
}

}  // namespace

std::vector<EntitySpan> bio_spans(const std::vector<std::string>& tags) {
  std::vector<EntitySpan> spans;
  bool open = false;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const std::string type = bio_type(tags[i]);
    const int pos = static_cast<int>(i);
    if (type.empty()) {
      open = false;
    } else if (tags[i][0] == 'I' && open && spans.back().type == type) {
      spans.back().end = pos;
    } else {
      spans.push_back({pos, pos, type});
      open = true;
    }
  }
  return spans;
}

double span_f1(const std::vector<std::vector<std::string>>& predicted,
               const std::vector<std::vector<std::string>>& gold) {
  check_lengths(predicted.size(), gold.size(), "span_f1");
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    check_lengths(predicted[s].size(), gold[s].size(), "span_f1 sentence");
    const auto p = bio_spans(predicted[s]);
    const auto g = bio_spans(gold[s]);
    std::set<EntitySpan> gs(g.begin(), g.end());
    double hit = 0;
    for (const auto& span : p) hit += gs.count(span) ? 1 : 0;
    tp += hit;
    fp += static_cast<double>(p.size()) - hit;
    fn += static_cast<double>(g.size()) - hit;
  }
  return micro_f1(tp, fp, fn);
}

double label_f1(std::span<const int> predicted, std::span<const int> gold, int negative_label) {
  check_lengths(predicted.size(), gold.size(), "label_f1");
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const int p = predicted[i], g = gold[i];
    if (p == g) {
      if (g != negative_label) tp += 1;
      continue;
    }
    if (p != negative_label) fp += 1;
    if (g != negative_label) fn += 1;
  }
  return micro_f1(tp, fp, fn);
}

double accuracy(std::span<const int> predicted, std::span<const int> gold) {
  check_lengths(predicted.size(), gold.size(), "accuracy");
  if (gold.empty()) return 1.0;
  double hit = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hit += predicted[i] == gold[i] ? 1 : 0;
  return hit / static_cast<double>(gold.size());
}

std::string normalize_answer(const std::string& text) {
  std::string cleaned;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::ispunct(c)) continue;
    cleaned.push_back(static_cast<char>(std::tolower(c)));
  }
  std::string out;
  for (const auto& w : split_words(cleaned)) {
    if (w == "a" || w == "an" || w == "the") continue;
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

double squad_f1(const std::string& predicted, const std::vector<std::string>& gold_answers) {
  if (gold_answers.empty()) throw InputError("squad_f1 needs at least one gold answer");
  const auto p = split_words(normalize_answer(predicted));
  double best = 0;
  for (const auto& answer : gold_answers) {
    const auto g = split_words(normalize_answer(answer));
    double f1;
    if (p.empty() || g.empty()) {
      f1 = p.empty() && g.empty() ? 1.0 : 0.0;
    } else {
      std::map<std::string, int> counts;
      for (const auto& w : g) ++counts[w];
      double common = 0;
      for (const auto& w : p) {
        auto it = counts.find(w);
        if (it != counts.end() && it->second > 0) {
          --it->second;
          common += 1;
        }
      }
      if (common == 0) {
        f1 = 0;
      } else {
        const double precision = common / static_cast<double>(p.size());
        const double recall = common / static_cast<double>(g.size());
        f1 = 2 * precision * recall / (precision + recall);
      }
    }
    best = std::max(best, f1);
  }
  return best;
}

double compute_metric(const TaskDataset& dataset, const TaskPredictions& predictions,
                      const std::vector<TaskExample>& gold) {
  switch (dataset.metric) {
    case MetricKind::kSpanF1: {
      std::vector<std::vector<std::string>> g;
      g.reserve(gold.size());
      for (const auto& ex : gold) g.push_back(ex.tags);
      return span_f1(predictions.tags, g);
    }
    case MetricKind::kF1:
    case MetricKind::kAccuracy: {
      std::vector<int> g;
      g.reserve(gold.size());
      for (const auto& ex : gold) g.push_back(ex.label);
      return dataset.metric == MetricKind::kF1 ? label_f1(predictions.labels, g, dataset.negative_label)
                                               : accuracy(predictions.labels, g);
    }
    case MetricKind::kSquadF1: {
      check_lengths(predictions.answers.size(), gold.size(), "squad_f1");
      if (gold.empty()) return 1.0;
      double total = 0;
      for (std::size_t i = 0; i < gold.size(); ++i) {
        std::vector<std::string> texts;
        for (const auto& a : gold[i].answers) texts.push_back(a.text);
        total += squad_f1(predictions.answers[i], texts);
      }
      return total / static_cast<double>(gold.size());
    }
  }
  return 0;
}

}  // namespace sparsify

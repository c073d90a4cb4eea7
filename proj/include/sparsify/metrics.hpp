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

#ifndef SPARSIFY_METRICS_HPP_
#define SPARSIFY_METRICS_HPP_

#include <span>
#include <string>
#include <vector>

#include "sparsify/datasets.hpp"

namespace sparsify {

// Entity span decoded from BIO tags; begin and end inclusive.
struct EntitySpan {
  int begin = 0;
  int end = 0;
  std::string type;
  friend auto operator<=>(const EntitySpan&, const EntitySpan&) = default;
};

// An I-X that does not continue an open X entity opens a new one.
std::vector<EntitySpan> bio_spans(const std::vector<std::string>& tags);

// Micro-F1 over exact (begin, end, type) spans. 1.0 when neither side has spans.
double span_f1(const std::vector<std::vector<std::string>>& predicted,
               const std::vector<std::vector<std::string>>& gold);

// Micro-F1 over labels; `negative_label` (if >= 0) counts as "no relation"
// and earns no true positives.
double label_f1(std::span<const int> predicted, std::span<const int> gold, int negative_label = -1);

double accuracy(std::span<const int> predicted, std::span<const int> gold);

// Lowercase, drop punctuation and articles, collapse whitespace.
std::string normalize_answer(const std::string& text);
// Token-overlap F1 against the best-matching gold answer.
double squad_f1(const std::string& predicted, const std::vector<std::string>& gold_answers);

// Model outputs for a split; the member matching the metric is used.
struct TaskPredictions {
  std::vector<std::vector<std::string>> tags;
  std::vector<int> labels;
  std::vector<std::string> answers;
};

// Metric of `predictions` against `gold` examples, on the 0-1 scale.
double compute_metric(const TaskDataset& dataset, const TaskPredictions& predictions,
                      const std::vector<TaskExample>& gold);

}  // namespace sparsify

#endif  // SPARSIFY_METRICS_HPP_

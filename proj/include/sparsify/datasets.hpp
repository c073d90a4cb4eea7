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

#ifndef SPARSIFY_DATASETS_HPP_
#define SPARSIFY_DATASETS_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace sparsify {

enum class TaskKind { kEntityRecognition, kRelationExtraction, kQuestionAnswering };
enum class MetricKind { kSpanF1, kF1, kAccuracy, kSquadF1 };

const char* task_kind_name(TaskKind kind);
TaskKind parse_task_kind(std::string_view name);
const char* metric_kind_name(MetricKind kind);
MetricKind parse_metric_kind(std::string_view name);

// Answer span over context words, inclusive on both ends.
struct SpanAnswer {
  int begin = 0;
  int end = 0;
  std::string text;
  friend bool operator==(const SpanAnswer&, const SpanAnswer&) = default;
};

// One example, typed by the owning dataset's kind:
//   entity recognition   words + tags
//   relation extraction  words (+ words_b) + label
//   question answering   words (context) + question + label or answers
struct TaskExample {
  std::vector<std::string> words;
  std::vector<std::string> tags;
  std::vector<std::string> words_b;
  std::vector<std::string> question;
  int label = -1;
  std::vector<SpanAnswer> answers;
  friend bool operator==(const TaskExample&, const TaskExample&) = default;
};

struct TaskDataset {
  std::string name;
  TaskKind kind = TaskKind::kEntityRecognition;
  MetricKind metric = MetricKind::kSpanF1;
  // Tag inventory for entity recognition ("O" first), class names otherwise.
  std::vector<std::string> labels;
  // Label excluded from relation micro-F1, or -1.
  int negative_label = -1;
  std::vector<TaskExample> train, dev, test;
  int bio_repairs = 0;

  bool span_qa() const { return metric == MetricKind::kSquadF1; }
  int label_id(std::string_view label) const;  // DataError when unknown
  // The split that metrics are reported on: test when present, otherwise
  // everything that was loaded.
  const std::vector<TaskExample>& report_split() const;
  friend bool operator==(const TaskDataset&, const TaskDataset&) = default;
};

// Entity type of a BIO tag ("B-Chem" -> "Chem"), empty for "O".
// Throws DataError for anything else.
std::string bio_type(std::string_view tag);

// Rewrites I-X that does not continue an X entity as B-X. Returns the
// number of rewritten tags.
int repair_bio(std::vector<std::string>& tags);
bool bio_valid(const std::vector<std::string>& tags);

// Sorted tag inventory with "O" first, covering B- and I- of each type.
std::vector<std::string> tag_inventory(const std::vector<TaskExample>& examples);

// Loaders. A directory argument reads train/dev/test files from it
// (train.conll or train.jsonl etc.); a single file is loaded into train.
TaskDataset load_conll(const std::string& path);
TaskDataset load_qa_jsonl(const std::string& path);
// {"text": ..., "text_b": ..., "label": ...} per line.
TaskDataset load_relation_jsonl(const std::string& path);
// Dispatches on extension (.conll vs .jsonl) or directory contents.
TaskDataset load_task(const std::string& path);

void write_conll(const std::string& path, const std::vector<TaskExample>& examples);
void write_qa_jsonl(const std::string& path, const TaskDataset& dataset, const std::vector<TaskExample>& examples);
void write_relation_jsonl(const std::string& path, const TaskDataset& dataset,
                          const std::vector<TaskExample>& examples);
// Writes train/dev/test files into `dir` in the format matching the kind.
void write_task(const std::string& dir, const TaskDataset& dataset);

// Uniform sample without replacement of ceil(fraction * n) training
// examples, kept in their original order. dev/test are copied untouched.
TaskDataset subsample_train(const TaskDataset& dataset, double fraction, std::uint64_t seed);

// Corpus file: one document per line; blank lines skipped.
std::vector<std::string> load_corpus(const std::string& path);
void write_corpus(const std::string& path, const std::vector<std::string>& documents);

}  // namespace sparsify

#endif  // SPARSIFY_DATASETS_HPP_

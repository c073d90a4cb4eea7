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

#include "sparsify/datasets.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sparsify/error.hpp"
#include "sparsify/vocab.hpp"

namespace sparsify {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string join(const std::vector<std::string>& words, std::size_t begin, std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) out += ' ';
    out += words[i];
  }
  return out;
}

std::string join(const std::vector<std::string>& words) { return join(words, 0, words.size()); }

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  return out;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

// Word start/end character offsets of a whitespace-split context.
struct WordSpan {
  std::size_t begin, end;  // [begin, end)
};

std::vector<WordSpan> word_offsets(std::string_view text) {
  std::vector<WordSpan> spans;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i >= text.size()) break;
    const std::size_t b = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    spans.push_back({b, i});
  }
  return spans;
}

std::string label_string(const json& v, int line) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer() || v.is_boolean()) return v.dump();
  throw DataError("line " + std::to_string(line) + ": label must be a string");
}

const json& field(const json& rec, const char* key, int line) {
  auto it = rec.find(key);
  if (it == rec.end()) throw DataError("line " + std::to_string(line) + ": missing field '" + key + "'");
  return *it;
}

std::string string_field(const json& rec, const char* key, int line) {
  const json& v = field(rec, key, line);
  if (!v.is_string()) throw DataError("line " + std::to_string(line) + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

template <typename Fn>
void for_each_json_line(const std::string& path, Fn&& fn) {
  auto in = open_in(path);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    line = strip_cr(line);
    if (blank(line)) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), number);
    }
    if (!rec.is_object()) throw ParseError("expected a JSON object", number);
    fn(rec, number);
  }
}

// Files of a dataset: a directory gives up to three splits, a file gives one.
struct SplitFiles {
  std::string train, dev, test;
};

SplitFiles split_files(const std::string& path, const char* ext) {
  if (!fs::is_directory(path)) return {path, "", ""};
  SplitFiles files;
  auto pick = [&](const char* split) {
    fs::path p = fs::path(path) / (std::string(split) + ext);
    return fs::exists(p) ? p.string() : std::string();
  };
  files.train = pick("train");
  files.dev = pick("dev");
  files.test = pick("test");
  if (files.train.empty() && files.dev.empty() && files.test.empty()) {
    throw InputError(std::string("no train/dev/test") + ext + " files in " + path);
  }
  return files;
}

std::string dataset_name(const std::string& path) {
  fs::path p(path);
  if (fs::is_directory(p)) return p.filename().empty() ? p.parent_path().filename().string() : p.filename().string();
  return p.stem().string();
}

std::vector<TaskExample> read_conll_file(const std::string& path, int& repairs) {
  std::vector<TaskExample> out;
  auto in = open_in(path);
  std::string line;
  int number = 0;
  TaskExample current;
  auto flush = [&] {
    if (current.words.empty()) return;
    repairs += repair_bio(current.tags);
    out.push_back(std::move(current));
    current = TaskExample{};
  };
  while (std::getline(in, line)) {
    ++number;
    line = strip_cr(line);
    if (blank(line)) {
      flush();
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw ParseError("expected 'token<TAB>tag'", number);
    }
    std::string token = line.substr(0, tab);
    std::string tag = line.substr(tab + 1);
    if (token.empty() || tag.empty() || split_words(token).size() != 1) {
      throw ParseError("empty or whitespace-containing token/tag", number);
    }
    try {
      bio_type(tag);
    } catch (const DataError&) {
      throw ParseError("invalid BIO tag '" + tag + "'", number);
    }
    current.words.push_back(split_words(token).front());
    current.tags.push_back(std::move(tag));
  }
  flush();
  return out;
}

}  // namespace

const char* task_kind_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::kEntityRecognition: return "entity_recognition";
    case TaskKind::kRelationExtraction: return "relation_extraction";
    case TaskKind::kQuestionAnswering: return "question_answering";
  }
  return "?";
}

TaskKind parse_task_kind(std::string_view name) {
  for (TaskKind k : {TaskKind::kEntityRecognition, TaskKind::kRelationExtraction, TaskKind::kQuestionAnswering}) {
    if (name == task_kind_name(k)) return k;
  }
  throw ConfigError("unknown task kind '" + std::string(name) + "'");
}

const char* metric_kind_name(MetricKind kind) {
  switch (kind) {
    case MetricKind::kSpanF1: return "span_f1";
    case MetricKind::kF1: return "f1";
    case MetricKind::kAccuracy: return "accuracy";
    case MetricKind::kSquadF1: return "squad_f1";
  }
  return "?";
}

MetricKind parse_metric_kind(std::string_view name) {
  for (MetricKind k : {MetricKind::kSpanF1, MetricKind::kF1, MetricKind::kAccuracy, MetricKind::kSquadF1}) {
    if (name == metric_kind_name(k)) return k;
  }
  throw ConfigError("unknown metric '" + std::string(name) + "'");
}

int TaskDataset::label_id(std::string_view label) const {
  auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw DataError("unknown label '" + std::string(label) + "' for dataset " + name);
  return static_cast<int>(it - labels.begin());
}

const std::vector<TaskExample>& TaskDataset::report_split() const { return test.empty() ? train : test; }

std::string bio_type(std::string_view tag) {
  if (tag == "O") return {};
  if (tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-') return std::string(tag.substr(2));
  throw DataError("invalid BIO tag '" + std::string(tag) + "'");
}

int repair_bio(std::vector<std::string>& tags) {
  int repairs = 0;
  std::string open;  // type of the entity the previous tag belongs to
  for (auto& tag : tags) {
    const std::string type = bio_type(tag);
    if (tag[0] == 'I' && type != open) {
      tag[0] = 'B';
      ++repairs;
    }
    open = type;
  }
  return repairs;
}

bool bio_valid(const std::vector<std::string>& tags) {
  std::vector<std::string> copy = tags;
  try {
    return repair_bio(copy) == 0;
  } catch (const DataError&) {
    return false;
  }
}

std::vector<std::string> tag_inventory(const std::vector<TaskExample>& examples) {
  std::set<std::string> types;
  for (const auto& ex : examples) {
    for (const auto& t : ex.tags) {
      auto type = bio_type(t);
      if (!type.empty()) types.insert(type);
    }
  }
  std::vector<std::string> inv = {"O"};
  for (const auto& t : types) {
    inv.push_back("B-" + t);
    inv.push_back("I-" + t);
  }
  return inv;
}

TaskDataset load_conll(const std::string& path) {
  const SplitFiles files = split_files(path, ".conll");
  TaskDataset ds;
  ds.name = dataset_name(path);
  ds.kind = TaskKind::kEntityRecognition;
  ds.metric = MetricKind::kSpanF1;
  if (!files.train.empty()) ds.train = read_conll_file(files.train, ds.bio_repairs);
  if (!files.dev.empty()) ds.dev = read_conll_file(files.dev, ds.bio_repairs);
  if (!files.test.empty()) ds.test = read_conll_file(files.test, ds.bio_repairs);
  std::vector<TaskExample> all = ds.train;
  all.insert(all.end(), ds.dev.begin(), ds.dev.end());
  all.insert(all.end(), ds.test.begin(), ds.test.end());
  ds.labels = tag_inventory(all);
  return ds;
}

TaskDataset load_qa_jsonl(const std::string& path) {
  const SplitFiles files = split_files(path, ".jsonl");
  TaskDataset ds;
  ds.name = dataset_name(path);
  ds.kind = TaskKind::kQuestionAnswering;
  enum { kUnknown, kSpan, kClass } style = kUnknown;
  std::set<std::string> label_names;
  struct Raw {
    TaskExample ex;
    std::string label;
  };
  auto read = [&](const std::string& file) {
    std::vector<Raw> out;
    if (file.empty()) return out;
    for_each_json_line(file, [&](const json& rec, int line) {
      const bool has_answers = rec.contains("answers");
      const bool has_label = rec.contains("label");
      if (has_answers == has_label) {
        throw DataError("line " + std::to_string(line) + ": record needs exactly one of 'answers' or 'label'");
      }
      const auto this_style = has_answers ? kSpan : kClass;
      if (style != kUnknown && style != this_style) {
        throw DataError("line " + std::to_string(line) + ": span and classification records mixed in one dataset");
      }
      style = this_style;
      const std::string context = string_field(rec, "context", line);
      Raw raw;
      raw.ex.words = split_words(context);
      raw.ex.question = split_words(string_field(rec, "question", line));
      if (has_label) {
        raw.label = label_string(rec["label"], line);
        label_names.insert(raw.label);
      } else {
        const json& answers = rec["answers"];
        if (!answers.is_array() || answers.empty()) {
          throw DataError("line " + std::to_string(line) + ": 'answers' must be a nonempty array");
        }
        const auto offsets = word_offsets(context);
        for (const auto& a : answers) {
          if (!a.is_object()) throw DataError("line " + std::to_string(line) + ": answer must be an object");
          const std::string text = string_field(a, "text", line);
          const json& start_v = field(a, "start", line);
          if (!start_v.is_number_integer()) {
            throw DataError("line " + std::to_string(line) + ": answer start must be an integer");
          }
          const long long start = start_v.get<long long>();
          if (start < 0 || static_cast<std::size_t>(start) >= context.size()) {
            throw DataError("line " + std::to_string(line) + ": answer start " + std::to_string(start) +
                            " beyond context length " + std::to_string(context.size()));
          }
          const auto s = static_cast<std::size_t>(start);
          if (text.empty() || context.compare(s, text.size(), text) != 0) {
            throw DataError("line " + std::to_string(line) + ": answer text does not match context at " +
                            std::to_string(start));
          }
          const std::size_t last = s + text.size() - 1;
          int begin = -1, end = -1;
          for (std::size_t w = 0; w < offsets.size(); ++w) {
            if (offsets[w].begin <= s && s < offsets[w].end) begin = static_cast<int>(w);
            if (offsets[w].begin <= last && last < offsets[w].end) end = static_cast<int>(w);
          }
          if (begin < 0 || end < 0) {
            throw DataError("line " + std::to_string(line) + ": answer starts or ends on whitespace");
          }
          raw.ex.answers.push_back({begin, end, text});
        }
      }
      out.push_back(std::move(raw));
    });
    return out;
  };
  auto train = read(files.train), dev = read(files.dev), test = read(files.test);
  ds.metric = style == kClass ? MetricKind::kAccuracy : MetricKind::kSquadF1;
  ds.labels.assign(label_names.begin(), label_names.end());
  auto finish = [&](std::vector<Raw>& raws, std::vector<TaskExample>& split) {
    for (auto& r : raws) {
      if (style == kClass) r.ex.label = ds.label_id(r.label);
      split.push_back(std::move(r.ex));
    }
  };
  finish(train, ds.train);
  finish(dev, ds.dev);
  finish(test, ds.test);
  return ds;
}

TaskDataset load_relation_jsonl(const std::string& path) {
  const SplitFiles files = split_files(path, ".jsonl");
  TaskDataset ds;
  ds.name = dataset_name(path);
  ds.kind = TaskKind::kRelationExtraction;
  ds.metric = MetricKind::kF1;
  std::set<std::string> label_names;
  std::vector<std::pair<TaskExample, std::string>> raws[3];
  const std::string* paths[3] = {&files.train, &files.dev, &files.test};
  for (int s = 0; s < 3; ++s) {
    if (paths[s]->empty()) continue;
    for_each_json_line(*paths[s], [&](const json& rec, int line) {
      TaskExample ex;
      ex.words = split_words(string_field(rec, "text", line));
      if (rec.contains("text_b")) ex.words_b = split_words(string_field(rec, "text_b", line));
      std::string label = label_string(field(rec, "label", line), line);
      label_names.insert(label);
      raws[s].emplace_back(std::move(ex), std::move(label));
    });
  }
  ds.labels.assign(label_names.begin(), label_names.end());
  auto neg = std::find(ds.labels.begin(), ds.labels.end(), "none");
  if (neg != ds.labels.end()) ds.negative_label = static_cast<int>(neg - ds.labels.begin());
  std::vector<TaskExample>* splits[3] = {&ds.train, &ds.dev, &ds.test};
  for (int s = 0; s < 3; ++s) {
    for (auto& [ex, label] : raws[s]) {
      ex.label = ds.label_id(label);
      splits[s]->push_back(std::move(ex));
    }
  }
  return ds;
}

TaskDataset load_task(const std::string& path) {
  fs::path p(path);
  if (fs::is_directory(p)) {
    for (const char* split : {"train", "dev", "test"}) {
      if (fs::exists(p / (std::string(split) + ".conll"))) return load_conll(path);
    }
    for (const char* split : {"train", "dev", "test"}) {
      fs::path f = p / (std::string(split) + ".jsonl");
      if (fs::exists(f)) {
        std::ifstream in(f);
        std::string line;
        while (std::getline(in, line) && blank(line)) {
        }
        return line.find("\"context\"") != std::string::npos ? load_qa_jsonl(path) : load_relation_jsonl(path);
      }
    }
    throw InputError("no task files in " + path);
  }
  if (p.extension() == ".conll") return load_conll(path);
  if (p.extension() == ".jsonl") {
    auto in = open_in(path);
    std::string line;
    while (std::getline(in, line) && blank(line)) {
    }
    return line.find("\"context\"") != std::string::npos ? load_qa_jsonl(path) : load_relation_jsonl(path);
  }
  throw InputError("unrecognized task file " + path + " (expected .conll or .jsonl)");
}

void write_conll(const std::string& path, const std::vector<TaskExample>& examples) {
  auto out = open_out(path);
  for (const auto& ex : examples) {
    for (std::size_t i = 0; i < ex.words.size(); ++i) out << ex.words[i] << '\t' << ex.tags[i] << '\n';
    out << '\n';
  }
}

void write_qa_jsonl(const std::string& path, const TaskDataset& dataset, const std::vector<TaskExample>& examples) {
  auto out = open_out(path);
  for (const auto& ex : examples) {
    json rec;
    rec["context"] = join(ex.words);
    rec["question"] = join(ex.question);
    if (dataset.span_qa()) {
      json answers = json::array();
      for (const auto& a : ex.answers) {
        std::size_t start = 0;
        for (int w = 0; w < a.begin; ++w) start += ex.words[static_cast<std::size_t>(w)].size() + 1;
        answers.push_back({{"text", join(ex.words, static_cast<std::size_t>(a.begin),
                                         static_cast<std::size_t>(a.end) + 1)},
                           {"start", start}});
      }
      rec["answers"] = answers;
    } else {
      rec["label"] = dataset.labels.at(static_cast<std::size_t>(ex.label));
    }
    out << rec.dump() << '\n';
  }
}

void write_relation_jsonl(const std::string& path, const TaskDataset& dataset,
                          const std::vector<TaskExample>& examples) {
  auto out = open_out(path);
  for (const auto& ex : examples) {
    json rec;
    rec["text"] = join(ex.words);
    if (!ex.words_b.empty()) rec["text_b"] = join(ex.words_b);
    rec["label"] = dataset.labels.at(static_cast<std::size_t>(ex.label));
    out << rec.dump() << '\n';
  }
}

void write_task(const std::string& dir, const TaskDataset& dataset) {
  fs::create_directories(dir);
  const std::pair<const char*, const std::vector<TaskExample>*> splits[] = {
      {"train", &dataset.train}, {"dev", &dataset.dev}, {"test", &dataset.test}};
  for (const auto& [name, examples] : splits) {
    const std::string base = (fs::path(dir) / name).string();
    switch (dataset.kind) {
      case TaskKind::kEntityRecognition: write_conll(base + ".conll", *examples); break;
      case TaskKind::kRelationExtraction: write_relation_jsonl(base + ".jsonl", dataset, *examples); break;
      case TaskKind::kQuestionAnswering: write_qa_jsonl(base + ".jsonl", dataset, *examples); break;
    }
  }
}

TaskDataset subsample_train(const TaskDataset& dataset, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw InputError("subsample fraction must lie in (0, 1]");
  const std::size_t n = dataset.train.size();
  const auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  if (k == 0) throw InputError("subsample of " + std::to_string(n) + " examples yields none");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first k slots become a uniform sample.
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  TaskDataset out = dataset;
  out.train.clear();
  out.train.reserve(k);
  for (auto i : idx) out.train.push_back(dataset.train[i]);
  return out;
}

std::vector<std::string> load_corpus(const std::string& path) {
  auto in = open_in(path);
  std::vector<std::string> docs;
  std::string line;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (!blank(line)) docs.push_back(line);
  }
  return docs;
}

void write_corpus(const std::string& path, const std::vector<std::string>& documents) {
  auto out = open_out(path);
  for (const auto& d : documents) out << d << '\n';
}

}  // namespace sparsify

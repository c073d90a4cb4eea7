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

#include "sparsify/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include "sparsify/error.hpp"

namespace sparsify {
namespace {

const char* const kReserved[kNumReservedIds] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};

}  // namespace

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  Vocab v;
  for (int i = 0; i < kNumReservedIds; ++i) {
    if (static_cast<int>(tokens.size()) <= i || tokens[static_cast<std::size_t>(i)] != kReserved[i]) {
      throw InputError("vocabulary must start with the reserved tokens");
    }
  }
  v.tokens_ = std::move(tokens);
  for (int i = 0; i < v.size(); ++i) {
    if (!v.ids_.emplace(v.tokens_[static_cast<std::size_t>(i)], i).second) {
      throw InputError("duplicate vocabulary token '" + v.tokens_[static_cast<std::size_t>(i)] + "'");
    }
  }
  return v;
}

Vocab Vocab::build(std::span<const std::string> documents, int cap) {
  if (cap < kNumReservedIds) throw ConfigError("vocabulary cap must leave room for the reserved tokens");
  std::map<std::string, long> counts;
  for (const auto& doc : documents) {
    for (auto& w : split_words(doc)) ++counts[std::move(w)];
  }
  if (counts.empty()) throw InputError("cannot build a vocabulary from an empty corpus");
  std::vector<std::pair<std::string, long>> ranked(counts.begin(), counts.end());
  // std::map order is lexicographic, so a stable sort on count keeps ties sorted.
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens(std::begin(kReserved), std::end(kReserved));
  for (const auto& [word, n] : ranked) {
    if (static_cast<int>(tokens.size()) >= cap) break;
    if (std::find(std::begin(kReserved), std::end(kReserved), word) != std::end(kReserved)) continue;
    tokens.push_back(word);
  }
  return from_tokens(std::move(tokens));
}

int Vocab::id(std::string_view word) const {
  auto it = ids_.find(std::string(word));
  return it == ids_.end() ? kUnkId : it->second;
}

bool Vocab::contains(std::string_view word) const { return ids_.count(std::string(word)) != 0; }

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) throw InputError("token id " + std::to_string(id) + " outside vocabulary");
  return tokens_[static_cast<std::size_t>(id)];
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write vocabulary to " + path);
  for (const auto& t : tokens_) out << t << '\n';
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read vocabulary from " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) tokens.push_back(line);
  }
  return from_tokens(std::move(tokens));
}

std::vector<int> encode_words(std::span<const std::string> words, const Vocab& vocab) {
  std::vector<int> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(vocab.id(w));
  return ids;
}

std::vector<int> tokenize(std::string_view text, const Vocab& vocab, int max_seq_len) {
  if (max_seq_len < 2) throw ConfigError("max_seq_len must fit [CLS] and [SEP]");
  const auto words = split_words(text);
  std::vector<int> ids = {kClsId};
  const std::size_t room = static_cast<std::size_t>(max_seq_len - 2);
  for (std::size_t i = 0; i < words.size() && i < room; ++i) ids.push_back(vocab.id(words[i]));
  ids.push_back(kSepId);
  return ids;
}

std::string detokenize(std::span<const int> ids, const Vocab& vocab) {
  std::string out;
  for (int id : ids) {
    if (id < kNumReservedIds && id != kUnkId) continue;
    if (!out.empty()) out += ' ';
    out += vocab.token(id);
  }
  return out;
}

}  // namespace sparsify

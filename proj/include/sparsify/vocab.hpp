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

#ifndef SPARSIFY_VOCAB_HPP_
#define SPARSIFY_VOCAB_HPP_

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sparsify {

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kClsId = 2;
inline constexpr int kSepId = 3;
inline constexpr int kMaskId = 4;
inline constexpr int kNumReservedIds = 5;

// Whitespace split with ASCII lowercasing.
std::vector<std::string> split_words(std::string_view text);

// Token/id bijection. Ids 0..4 are [PAD] [UNK] [CLS] [SEP] [MASK].
class Vocab {
 public:
  // Most frequent words of `documents` up to `cap` ids in total (reserved
  // ids included); frequency ties break lexicographically.
  static Vocab build(std::span<const std::string> documents, int cap);
  static Vocab from_tokens(std::vector<std::string> tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  int id(std::string_view word) const;
  bool contains(std::string_view word) const;
  const std::string& token(int id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  // One token per line, in id order.
  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

// Word ids without framing; unknown words map to [UNK].
std::vector<int> encode_words(std::span<const std::string> words, const Vocab& vocab);

// [CLS] words... [SEP], truncated to max_seq_len ids with [SEP] kept last.
std::vector<int> tokenize(std::string_view text, const Vocab& vocab, int max_seq_len);

// Space-joined words, skipping reserved ids other than [UNK].
std::string detokenize(std::span<const int> ids, const Vocab& vocab);

}  // namespace sparsify

#endif  // SPARSIFY_VOCAB_HPP_

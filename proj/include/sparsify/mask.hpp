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

#ifndef SPARSIFY_MASK_HPP_
#define SPARSIFY_MASK_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sparsify/tensor.hpp"

namespace sparsify {

// Binary keep/prune overlay for one prunable weight matrix.
//
// Bits only ever move from kept to pruned; there is deliberately no way to
// revive an entry once pruned.
class SparsityMask {
 public:
  SparsityMask() = default;
  // All entries kept.
  SparsityMask(std::string component_path, Index rows, Index cols);
  // From explicit bits (nonzero = kept).
  SparsityMask(std::string component_path, Index rows, Index cols, std::vector<std::uint8_t> bits);

  const std::string& component_path() const { return path_; }
  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index size() const { return rows_ * cols_; }
  Index kept_count() const { return kept_; }
  Index pruned_count() const { return size() - kept_; }
  double sparsity() const { return size() ? static_cast<double>(pruned_count()) / static_cast<double>(size()) : 0.0; }

  bool kept(Index i) const { return bits_[static_cast<std::size_t>(i)] != 0; }
  // Marks entry i pruned; a no-op if it already is.
  void prune(Index i);

  const std::vector<std::uint8_t>& bits() const { return bits_; }
  // 0/1 matrix for multiplicative application.
  Matrix as_matrix() const;

  // True when every entry kept here is also kept in `earlier`.
  bool is_subset_of(const SparsityMask& earlier) const;

  friend bool operator==(const SparsityMask& a, const SparsityMask& b) {
    return a.path_ == b.path_ && a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.bits_ == b.bits_;
  }

 private:
  std::string path_;
  Index rows_ = 0;
  Index cols_ = 0;
  Index kept_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Keyed by parameter path.
using MaskSet = std::map<std::string, SparsityMask>;

}  // namespace sparsify

#endif  // SPARSIFY_MASK_HPP_

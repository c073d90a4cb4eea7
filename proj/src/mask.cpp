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

#include "sparsify/mask.hpp"

#include <algorithm>

#include "sparsify/error.hpp"

namespace sparsify {

SparsityMask::SparsityMask(std::string component_path, Index rows, Index cols)
    : path_(std::move(component_path)),
      rows_(rows),
      cols_(cols),
      kept_(rows * cols),
      bits_(static_cast<std::size_t>(rows * cols), 1) {}

SparsityMask::SparsityMask(std::string component_path, Index rows, Index cols, std::vector<std::uint8_t> bits)
    : path_(std::move(component_path)), rows_(rows), cols_(cols), bits_(std::move(bits)) {
  if (static_cast<Index>(bits_.size()) != rows_ * cols_) {
    throw DimensionError("mask for " + path_ + " has " + std::to_string(bits_.size()) + " bits, expected " +
                         std::to_string(rows_ * cols_));
  }
  for (auto& b : bits_) b = b ? 1 : 0;
  kept_ = static_cast<Index>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

void SparsityMask::prune(Index i) {
  auto& bit = bits_[static_cast<std::size_t>(i)];
  if (bit) {
    bit = 0;
    --kept_;
  }
}

Matrix SparsityMask::as_matrix() const {
  Matrix m(rows_, cols_);
  for (Index i = 0; i < size(); ++i) m.data()[i] = bits_[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
  return m;
}

bool SparsityMask::is_subset_of(const SparsityMask& earlier) const {
  if (earlier.size() != size()) return false;
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i] && !earlier.bits_[i]) return false;
  }
  return true;
}

}  // namespace sparsify

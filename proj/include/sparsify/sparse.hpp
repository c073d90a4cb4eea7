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

// Compressed sparse row storage for pruned weights, a naive sparse x dense
// product, byte accounting, and a dense-vs-sparse timing harness.

#ifndef SPARSIFY_SPARSE_HPP_
#define SPARSIFY_SPARSE_HPP_

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "sparsify/checkpoint.hpp"
#include "sparsify/error.hpp"
#include "sparsify/mask.hpp"
#include "sparsify/tensor.hpp"

namespace sparsify {

template <typename Scalar>
struct CsrMatrix {
  Index rows = 0;
  Index cols = 0;
  std::vector<std::int32_t> row_ptr{0};
  std::vector<std::int32_t> col_idx;
  std::vector<Scalar> values;

  Index nnz() const { return static_cast<Index>(values.size()); }

  // Throws DataError unless row_ptr and col_idx are well formed.
  void validate() const {
    if (rows < 0 || cols < 0) throw DataError("csr: negative shape");
    if (static_cast<Index>(row_ptr.size()) != rows + 1) throw DataError("csr: row_ptr length is not rows + 1");
    if (col_idx.size() != values.size()) throw DataError("csr: col_idx and values differ in length");
    if (row_ptr.front() != 0 || row_ptr.back() != nnz()) throw DataError("csr: row_ptr endpoints");
    for (Index r = 0; r < rows; ++r) {
      if (row_ptr[r + 1] < row_ptr[r]) throw DataError("csr: row_ptr decreases at row " + std::to_string(r));
      for (auto p = row_ptr[r]; p < row_ptr[r + 1]; ++p) {
        if (col_idx[p] < 0 || col_idx[p] >= cols) throw DataError("csr: column index out of range");
        if (p > row_ptr[r] && col_idx[p] <= col_idx[p - 1]) throw DataError("csr: columns not increasing");
      }
    }
  }

  friend bool operator==(const CsrMatrix&, const CsrMatrix&) = default;
};

// Kept entries of `w` under `mask`; membership follows the mask, so a kept
// weight that happens to be 0 is stored explicitly.
template <typename Scalar, typename Derived>
CsrMatrix<Scalar> to_csr(const Eigen::MatrixBase<Derived>& w, const SparsityMask& mask) {
  if (w.rows() != mask.rows() || w.cols() != mask.cols()) {
    throw DimensionError("to_csr: weights and mask shapes differ");
  }
  CsrMatrix<Scalar> out;
  out.rows = w.rows();
  out.cols = w.cols();
  out.row_ptr.reserve(static_cast<std::size_t>(out.rows + 1));
  out.col_idx.reserve(static_cast<std::size_t>(mask.kept_count()));
  out.values.reserve(static_cast<std::size_t>(mask.kept_count()));
  for (Index r = 0; r < w.rows(); ++r) {
    for (Index c = 0; c < w.cols(); ++c) {
      if (!mask.kept(r * w.cols() + c)) continue;
      out.col_idx.push_back(static_cast<std::int32_t>(c));
      out.values.push_back(static_cast<Scalar>(w(r, c)));
    }
    out.row_ptr.push_back(static_cast<std::int32_t>(out.values.size()));
  }
  return out;
}

CsrMatrix<double> to_csr(const Tensor& weights, const SparsityMask& mask);

template <typename Scalar>
RowMatrix<Scalar> to_dense(const CsrMatrix<Scalar>& a) {
  RowMatrix<Scalar> out = RowMatrix<Scalar>::Zero(a.rows, a.cols);
  for (Index r = 0; r < a.rows; ++r) {
    for (auto p = a.row_ptr[r]; p < a.row_ptr[r + 1]; ++p) out(r, a.col_idx[p]) = a.values[p];
  }
  return out;
}

namespace detail {

template <typename Scalar>
void csr_rows(const CsrMatrix<Scalar>& a, const RowMatrix<Scalar>& x, RowMatrix<Scalar>& y, Index begin, Index end) {
  const Index n = x.cols();
  for (Index r = begin; r < end; ++r) {
    Scalar* out = y.data() + r * n;
    for (auto p = a.row_ptr[r]; p < a.row_ptr[r + 1]; ++p) {
      const Scalar v = a.values[p];
      const Scalar* in = x.data() + static_cast<Index>(a.col_idx[p]) * n;
      for (Index j = 0; j < n; ++j) out[j] += v * in[j];
    }
  }
}

}  // namespace detail

// y = A x with A in CSR. `threads` > 1 splits rows across workers; each row
// is computed by the same loop, so the result matches the serial path bit
// for bit.
template <typename Scalar>
RowMatrix<Scalar> csr_matmul(const CsrMatrix<Scalar>& a, const RowMatrix<Scalar>& x, int threads = 1) {
  if (a.cols != x.rows()) {
    throw DimensionError("csr_matmul: " + std::to_string(a.rows) + "x" + std::to_string(a.cols) + " times " +
                         std::to_string(x.rows()) + "x" + std::to_string(x.cols()));
  }
  RowMatrix<Scalar> y = RowMatrix<Scalar>::Zero(a.rows, x.cols());
  threads = std::max(1, std::min<int>(threads, static_cast<int>(std::max<Index>(a.rows, 1))));
  if (threads == 1) {
    detail::csr_rows(a, x, y, 0, a.rows);
    return y;
  }
  std::vector<std::thread> pool;
  const Index chunk = (a.rows + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const Index begin = std::min(a.rows, t * chunk);
    const Index end = std::min(a.rows, begin + chunk);
    pool.emplace_back([&, begin, end] { detail::csr_rows(a, x, y, begin, end); });
  }
  for (auto& th : pool) th.join();
  return y;
}

// Naive dense product in the same i-k-j loop order as the CSR kernel.
template <typename Scalar>
RowMatrix<Scalar> naive_dense_matmul(const RowMatrix<Scalar>& w, const RowMatrix<Scalar>& x) {
  if (w.cols() != x.rows()) throw DimensionError("naive_dense_matmul: inner dimensions differ");
  RowMatrix<Scalar> y = RowMatrix<Scalar>::Zero(w.rows(), x.cols());
  const Index n = x.cols();
  for (Index r = 0; r < w.rows(); ++r) {
    Scalar* out = y.data() + r * n;
    for (Index k = 0; k < w.cols(); ++k) {
      const Scalar v = w(r, k);
      const Scalar* in = x.data() + k * n;
      for (Index j = 0; j < n; ++j) out[j] += v * in[j];
    }
  }
  return y;
}

// ---- size accounting ----------------------------------------------------------

inline constexpr long long kValueBytes = 4;
inline constexpr long long kIndexBytes = 4;

struct ComponentBytes {
  std::string path;
  Index rows = 0;
  Index cols = 0;
  Index nnz = 0;
  long long dense_bytes = 0;   // 4 bytes per entry
  long long sparse_bytes = 0;  // nnz (value + index) + (rows + 1) row pointers
  double ratio() const { return dense_bytes ? static_cast<double>(sparse_bytes) / dense_bytes : 0.0; }
};

struct SizeReport {
  std::vector<ComponentBytes> components;  // prunable, CSR encoded
  long long encoder_dense_bytes = 0;
  long long encoder_sparse_bytes = 0;
  // Embeddings, norms, biases and heads, stored dense either way.
  long long remainder_bytes = 0;
  long long total_dense_bytes = 0;
  long long total_sparse_bytes = 0;

  double encoder_ratio() const;
  double total_ratio() const;
  std::string to_csv() const;
};

long long csr_bytes(Index rows, Index nnz);
SizeReport checkpoint_size_report(const Checkpoint& checkpoint);

// ---- export -------------------------------------------------------------------

// "GMPC" file: every prunable component of a checkpoint in CSR with 32-bit
// values and indices, CRC-32 trailer.
std::string export_csr(const Checkpoint& checkpoint);
std::map<std::string, CsrMatrix<float>> import_csr(std::string_view bytes);
void save_csr(const Checkpoint& checkpoint, const std::string& path);
std::map<std::string, CsrMatrix<float>> load_csr(const std::string& path);

// ---- benchmark ----------------------------------------------------------------

struct BenchRow {
  Index dim = 0;
  double sparsity = 0;
  double dense_ns = 0;   // median
  double sparse_ns = 0;  // median
  double ratio = 0;      // dense_ns / sparse_ns
};

struct BenchReport {
  std::vector<BenchRow> rows;
  int repeats = 0;
  Index batch = 0;
  std::string machine;
  std::string to_csv() const;
};

struct BenchConfig {
  std::vector<Index> dims{128, 256, 512};
  std::vector<double> sparsities{0.0, 0.5, 0.7, 0.8, 0.9, 0.95};
  int repeats = 9;
  // Columns of the dense operand, i.e. tokens per product.
  Index batch = 16;
  std::uint64_t seed = 0;
};

// Times naive dense against naive CSR on seeded random weights pruned by
// magnitude; throws ConfigError when repeats < 5.
BenchReport benchmark_speedup(const BenchConfig& config);

std::string machine_description();

}  // namespace sparsify

#endif  // SPARSIFY_SPARSE_HPP_

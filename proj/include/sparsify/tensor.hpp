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

#ifndef SPARSIFY_TENSOR_HPP_
#define SPARSIFY_TENSOR_HPP_

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sparsify/error.hpp"

namespace sparsify {

using Index = Eigen::Index;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Matrix = RowMatrix<double>;

using Shape = std::vector<Index>;

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "x" : "") << shape[i];
  out << ']';
  return out.str();
}

// Dense row-major n-dimensional array with an optional gradient buffer.
//
// Rank-0 tensors are scalars, rank-1 tensors view as a single row, and
// rank-2 tensors view as matrices. Higher ranks are storage only: every
// differentiable op works on the 2-D view.
template <typename Scalar>
class BasicTensor {
 public:
  using MatrixMap = Eigen::Map<RowMatrix<Scalar>>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix<Scalar>>;

  // A scalar zero.
  BasicTensor() : data_(1, Scalar(0)) {}

  explicit BasicTensor(Shape shape, bool requires_grad = false)
      : shape_(std::move(shape)), data_(checked_size(shape_), Scalar(0)), requires_grad_(requires_grad) {}

  BasicTensor(Shape shape, std::vector<Scalar> data, bool requires_grad = false)
      : shape_(std::move(shape)), data_(data.begin(), data.end()), requires_grad_(requires_grad) {
    if (static_cast<Index>(data_.size()) != checked_size(shape_)) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_string(shape_));
    }
  }

  template <typename Derived>
  static BasicTensor from_matrix(const Eigen::MatrixBase<Derived>& m, bool requires_grad = false) {
    BasicTensor t({m.rows(), m.cols()}, requires_grad);
    t.matrix() = m;
    return t;
  }

  static BasicTensor from_rows(std::initializer_list<std::initializer_list<Scalar>> rows) {
    const Index r = static_cast<Index>(rows.size());
    const Index c = r ? static_cast<Index>(rows.begin()->size()) : 0;
    std::vector<Scalar> data;
    data.reserve(static_cast<std::size_t>(r * c));
    for (const auto& row : rows) {
      if (static_cast<Index>(row.size()) != c) throw DimensionError("ragged row list");
      data.insert(data.end(), row.begin(), row.end());
    }
    return BasicTensor({r, c}, std::move(data));
  }

  static BasicTensor vector(std::initializer_list<Scalar> values) {
    return BasicTensor({static_cast<Index>(values.size())}, std::vector<Scalar>(values));
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index size() const { return static_cast<Index>(data_.size()); }

  // Extent of the 2-D view.
  Index rows() const { return rank() < 2 ? 1 : shape_[0]; }
  Index cols() const {
    if (rank() == 0) return 1;
    return rank() == 1 ? shape_[0] : size() / shape_[0];
  }

  std::span<Scalar> data() { return data_; }
  std::span<const Scalar> data() const { return data_; }

  Scalar& operator[](Index i) { return data_[static_cast<std::size_t>(i)]; }
  const Scalar& operator[](Index i) const { return data_[static_cast<std::size_t>(i)]; }
  Scalar& operator()(Index r, Index c) { return data_[static_cast<std::size_t>(r * cols() + c)]; }
  const Scalar& operator()(Index r, Index c) const { return data_[static_cast<std::size_t>(r * cols() + c)]; }

  MatrixMap matrix() { return MatrixMap(data_.data(), rows(), cols()); }
  ConstMatrixMap matrix() const { return ConstMatrixMap(data_.data(), rows(), cols()); }

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool on) { requires_grad_ = on; }

  bool has_grad() const { return grad_.has_value(); }
  // Allocates a zero gradient on first use.
  std::span<Scalar> grad() {
    if (!grad_) grad_.emplace(data_.size(), Scalar(0));
    return *grad_;
  }
  std::span<const Scalar> grad() const {
    if (!grad_) throw ContractError("tensor has no gradient");
    return *grad_;
  }
  MatrixMap grad_matrix() { return MatrixMap(grad().data(), rows(), cols()); }
  void zero_grad() {
    if (grad_) std::fill(grad_->begin(), grad_->end(), Scalar(0));
  }
  void drop_grad() { grad_.reset(); }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  static Index checked_size(const Shape& shape) {
    for (Index d : shape) {
      if (d <= 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
    }
    return shape_size(shape);
  }

  Shape shape_;
  // Over-aligned so Eigen's vectorized reductions split identically on every
  // allocation; plain heap blocks shift the peel and the summation order.
  using Storage = std::vector<Scalar, Eigen::aligned_allocator<Scalar>>;

  Storage data_;
  bool requires_grad_ = false;
  std::optional<Storage> grad_;
};

using Tensor = BasicTensor<double>;

}  // namespace sparsify

#endif  // SPARSIFY_TENSOR_HPP_

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

#ifndef SPARSIFY_AUTODIFF_HPP_
#define SPARSIFY_AUTODIFF_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sparsify/tensor.hpp"

#if defined(__SSE__)
#include <xmmintrin.h>
#endif

namespace sparsify {

enum class OpKind : std::uint8_t {
  kParameter,
  kConstant,
  kMatmul,
  kMatmulNT,
  kTranspose,
  kAdd,
  kSub,
  kHadamard,
  kScale,
  kAddRowBias,
  kAddConstant,
  kMulConstant,
  kSoftmax,
  kLayerNorm,
  kGelu,
  kEmbedding,
  kSlice,
  kConcatRows,
  kConcatCols,
  kGatherRows,
  kReshape,
  kSum,
  kCrossEntropy,
  kCustom,
};

class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;

  Graph* graph() const { return graph_; }
  std::size_t id() const { return id_; }
  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so the node
// list is a topological order by construction and backward() walks it in
// reverse exactly once.
//
// A graph is single-use and single-threaded: build it with one forward
// pass, call backward() at most once, then discard it.
class Graph {
 public:
  // Receives the gradient flowing into the node and the node's own value.
  using BackwardFn = std::function<void(Graph&, const Matrix& grad, const Matrix& value)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaf bound to `tensor`; backward() accumulates into tensor.grad() when
  // tensor.requires_grad(). The tensor must outlive the graph.
  Var parameter(Tensor& tensor);
  // Leaf that never receives a gradient.
  Var constant(Matrix value);

  // Appends an interior node. `backward` may be empty when no input needs a
  // gradient.
  Var record(OpKind kind, std::span<const Var> inputs, Matrix value, BackwardFn backward);

  const Matrix& value(Var v) const { return nodes_[v.id_].value; }
  OpKind kind(Var v) const { return nodes_[v.id_].kind; }
  std::span<const std::size_t> inputs(Var v) const { return nodes_[v.id_].inputs; }
  bool needs_grad(Var v) const { return nodes_[v.id_].needs_grad; }
  std::size_t size() const { return nodes_.size(); }

  template <typename Derived>
  void accumulate(Var v, const Eigen::MatrixBase<Derived>& g) {
    Node& node = nodes_[v.id_];
    if (!node.needs_grad) return;
    if (node.grad.size() == 0) {
      node.grad = g;
    } else {
      node.grad += g;
    }
  }

  // Adds `g` into the block of v's gradient starting at (row, col).
  template <typename Derived>
  void accumulate_block(Var v, Index row, Index col, const Eigen::MatrixBase<Derived>& g) {
    Node& node = nodes_[v.id_];
    if (!node.needs_grad) return;
    if (node.grad.size() == 0) node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
    node.grad.block(row, col, g.rows(), g.cols()) += g;
  }

  // Gradient of `loss` (which must be 1x1) with respect to every node.
  void backward(Var loss);

  // Gradient held by a node after backward(); empty if none flowed there.
  const Matrix& grad(Var v) const { return nodes_[v.id_].grad; }

 private:
  struct Node {
    OpKind kind;
    std::vector<std::size_t> inputs;
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    Tensor* leaf = nullptr;
    BackwardFn backward;
  };

  Var check_owned(Var v) const;

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

inline const Matrix& Var::value() const { return graph_->value(*this); }

// Differentiable ops. All operate on the 2-D view of their inputs.

Var matmul(Var a, Var b);
// a * b^T
Var matmul_nt(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double factor);
// x[n x m] + bias[1 x m] broadcast over rows; the only broadcast supported.
Var add_row_bias(Var x, Var bias);
Var add_constant(Var x, const Matrix& c);
Var mul_constant(Var x, const Matrix& c);

// Numerically stable softmax along `axis` (0, 1, or -1 for the last axis).
Var softmax(Var x, int axis = -1);
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-12);
// Tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
Var gelu(Var x);

// Rows of `table` selected by `ids`; gradients scatter-add back.
Var embedding(Var table, std::span<const int> ids);
Var slice(Var x, Index row, Index col, Index rows, Index cols);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var gather_rows(Var x, std::span<const Index> rows);
// Same row-major data under a new 2-D shape.
Var reshape(Var x, Index rows, Index cols);
Var sum(Var x);

inline constexpr int kIgnoreIndex = -100;

// Mean negative log-softmax of the target class over rows whose target is
// not `ignore_index`. With no such rows the loss and gradient are zero.
Var cross_entropy(Var logits, std::span<const int> targets, int ignore_index = kIgnoreIndex);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }
inline Var operator*(Var a, double s) { return scale(a, s); }

// Flushes subnormal floats to zero while alive and restores the previous
// mode on exit. Attention softmax tails push gradients into the subnormal
// range, where x86 arithmetic slows down by two orders of magnitude.
class ScopedFlushDenormals {
 public:
  ScopedFlushDenormals() {
#if defined(__SSE__)
    saved_ = _mm_getcsr();
    _mm_setcsr(saved_ | 0x8040);  // FTZ | DAZ
#endif
  }
  ~ScopedFlushDenormals() {
#if defined(__SSE__)
    _mm_setcsr(saved_);
#endif
  }
  ScopedFlushDenormals(const ScopedFlushDenormals&) = delete;
  ScopedFlushDenormals& operator=(const ScopedFlushDenormals&) = delete;

 private:
  unsigned saved_ = 0;
};

// Row-wise softmax of a plain matrix, shared by ops and losses.
Matrix softmax_rows(const Matrix& x);
// Row-wise log-softmax of a plain matrix.
Matrix log_softmax_rows(const Matrix& x);

}  // namespace sparsify

#endif  // SPARSIFY_AUTODIFF_HPP_

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

#include "sparsify/autodiff.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace sparsify {
namespace {

std::string dims(const Matrix& m) {
  return "[" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + "]";
}

void require_same_graph(Var a, Var b) {
  if (a.graph() == nullptr || a.graph() != b.graph()) {
    throw ContractError("operands belong to different graphs");
  }
}

void require_same_shape(const char* op, Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shapes " + dims(a.value()) + " and " + dims(b.value()) +
                         " differ");
  }
}

constexpr double kGeluC = 0.044715;

}  // namespace

Var Graph::parameter(Tensor& tensor) {
  Node node{OpKind::kParameter, {}, tensor.matrix(), Matrix(), tensor.requires_grad(), &tensor, nullptr};
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::constant(Matrix value) {
  nodes_.push_back(Node{OpKind::kConstant, {}, std::move(value), Matrix(), false, nullptr, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Graph::check_owned(Var v) const {
  if (v.graph_ != this || v.id_ >= nodes_.size()) throw ContractError("variable does not belong to this graph");
  return v;
}

Var Graph::record(OpKind kind, std::span<const Var> inputs, Matrix value, BackwardFn backward) {
  Node node{kind, {}, std::move(value), Matrix(), false, nullptr, nullptr};
  node.inputs.reserve(inputs.size());
  for (Var in : inputs) {
    check_owned(in);
    node.inputs.push_back(in.id_);
    node.needs_grad = node.needs_grad || nodes_[in.id_].needs_grad;
  }
  if (node.needs_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Graph::backward(Var loss) {
  check_owned(loss);
  const Matrix& v = nodes_[loss.id_].value;
  if (v.rows() != 1 || v.cols() != 1) {
    throw ContractError("backward requires a scalar loss, got " + dims(v));
  }
  if (backward_done_) throw ContractError("backward already ran on this graph");
  backward_done_ = true;
  if (!nodes_[loss.id_].needs_grad) return;
  nodes_[loss.id_].grad = Matrix::Ones(1, 1);
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.grad.size() == 0) continue;
    if (node.leaf != nullptr) {
      node.leaf->grad_matrix() += node.grad;
    } else if (node.backward) {
      node.backward(*this, node.grad, node.value);
    }
  }
}

Matrix softmax_rows(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - m).exp().matrix();
    y.row(r) /= y.row(r).sum();
  }
  return y;
}

Matrix log_softmax_rows(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    const double lse = m + std::log((x.row(r).array() - m).exp().sum());
    y.row(r) = (x.row(r).array() - lse).matrix();
  }
  return y;
}

Var matmul(Var a, Var b) {
  require_same_graph(a, b);
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions of " + dims(a.value()) + " and " + dims(b.value()) +
                         " disagree");
  }
  Matrix out(a.rows(), b.cols());
  out.noalias() = a.value() * b.value();
  const Var in[] = {a, b};
  return a.graph()->record(OpKind::kMatmul, in, std::move(out), [a, b](Graph& g, const Matrix& dc, const Matrix&) {
    if (g.needs_grad(a)) g.accumulate(a, dc * b.value().transpose());
    if (g.needs_grad(b)) g.accumulate(b, a.value().transpose() * dc);
  });
}

Var matmul_nt(Var a, Var b) {
  require_same_graph(a, b);
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: " + dims(a.value()) + " and transposed " + dims(b.value()) + " disagree");
  }
  Matrix out(a.rows(), b.rows());
  out.noalias() = a.value() * b.value().transpose();
  const Var in[] = {a, b};
  return a.graph()->record(OpKind::kMatmulNT, in, std::move(out), [a, b](Graph& g, const Matrix& dc, const Matrix&) {
    if (g.needs_grad(a)) g.accumulate(a, dc * b.value());
    if (g.needs_grad(b)) g.accumulate(b, dc.transpose() * a.value());
  });
}

Var transpose(Var a) {
  const Var in[] = {a};
  return a.graph()->record(OpKind::kTranspose, in, a.value().transpose(),
                           [a](Graph& g, const Matrix& d, const Matrix&) { g.accumulate(a, d.transpose()); });
}

Var add(Var a, Var b) {
  require_same_graph(a, b);
  require_same_shape("add", a, b);
  const Var in[] = {a, b};
  return a.graph()->record(OpKind::kAdd, in, a.value() + b.value(), [a, b](Graph& g, const Matrix& d, const Matrix&) {
    g.accumulate(a, d);
    g.accumulate(b, d);
  });
}

Var sub(Var a, Var b) {
  require_same_graph(a, b);
  require_same_shape("sub", a, b);
  const Var in[] = {a, b};
  return a.graph()->record(OpKind::kSub, in, a.value() - b.value(), [a, b](Graph& g, const Matrix& d, const Matrix&) {
    g.accumulate(a, d);
    g.accumulate(b, -d);
  });
}

Var hadamard(Var a, Var b) {
  require_same_graph(a, b);
  require_same_shape("hadamard", a, b);
  const Var in[] = {a, b};
  return a.graph()->record(OpKind::kHadamard, in, a.value().cwiseProduct(b.value()),
                           [a, b](Graph& g, const Matrix& d, const Matrix&) {
                             if (g.needs_grad(a)) g.accumulate(a, d.cwiseProduct(b.value()));
                             if (g.needs_grad(b)) g.accumulate(b, d.cwiseProduct(a.value()));
                           });
}

Var scale(Var a, double factor) {
  const Var in[] = {a};
  return a.graph()->record(OpKind::kScale, in, a.value() * factor,
                           [a, factor](Graph& g, const Matrix& d, const Matrix&) { g.accumulate(a, d * factor); });
}

Var add_row_bias(Var x, Var bias) {
  require_same_graph(x, bias);
  if (bias.rows() != 1 || bias.cols() != x.cols()) {
    throw DimensionError("add_row_bias: bias " + dims(bias.value()) + " does not match rows of " + dims(x.value()));
  }
  Matrix out = x.value();
  out.rowwise() += bias.value().row(0);
  const Var in[] = {x, bias};
  return x.graph()->record(OpKind::kAddRowBias, in, std::move(out), [x, bias](Graph& g, const Matrix& d, const Matrix&) {
    g.accumulate(x, d);
    if (g.needs_grad(bias)) g.accumulate(bias, d.colwise().sum());
  });
}

Var add_constant(Var x, const Matrix& c) {
  if (c.rows() != x.rows() || c.cols() != x.cols()) {
    throw DimensionError("add_constant: " + dims(c) + " vs " + dims(x.value()));
  }
  const Var in[] = {x};
  return x.graph()->record(OpKind::kAddConstant, in, x.value() + c,
                           [x](Graph& g, const Matrix& d, const Matrix&) { g.accumulate(x, d); });
}

Var mul_constant(Var x, const Matrix& c) {
  if (c.rows() != x.rows() || c.cols() != x.cols()) {
    throw DimensionError("mul_constant: " + dims(c) + " vs " + dims(x.value()));
  }
  const Var in[] = {x};
  return x.graph()->record(OpKind::kMulConstant, in, x.value().cwiseProduct(c),
                           [x, c](Graph& g, const Matrix& d, const Matrix&) { g.accumulate(x, d.cwiseProduct(c)); });
}

Var softmax(Var x, int axis) {
  if (axis < -1 || axis > 1) throw DimensionError("softmax: axis " + std::to_string(axis) + " out of range");
  const bool by_rows = axis != 0;
  Matrix y = by_rows ? softmax_rows(x.value()) : Matrix(softmax_rows(x.value().transpose()).transpose());
  const Var in[] = {x};
  return x.graph()->record(OpKind::kSoftmax, in, std::move(y),
                           [x, by_rows](Graph& g, const Matrix& d, const Matrix& y) {
                             const Matrix dy = d.cwiseProduct(y);
                             if (by_rows) {
                               g.accumulate(x, dy - y.cwiseProduct(dy.rowwise().sum().replicate(1, y.cols())));
                             } else {
                               g.accumulate(x, dy - y.cwiseProduct(dy.colwise().sum().replicate(y.rows(), 1)));
                             }
                           });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  require_same_graph(x, gamma);
  require_same_graph(x, beta);
  const Index n = x.rows();
  const Index h = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != h || beta.rows() != 1 || beta.cols() != h) {
    throw DimensionError("layer_norm: gamma " + dims(gamma.value()) + " / beta " + dims(beta.value()) +
                         " do not match last dimension of " + dims(x.value()));
  }
  if (!(eps > 0.0)) throw ContractError("layer_norm: eps must be positive");
  Matrix xhat(n, h);
  Eigen::VectorXd inv_std(n);
  for (Index r = 0; r < n; ++r) {
    const double mean = x.value().row(r).mean();
    const auto centered = x.value().row(r).array() - mean;
    const double var = centered.square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (centered * inv_std(r)).matrix();
  }
  Matrix out = xhat.array().rowwise() * gamma.value().row(0).array();
  out.rowwise() += beta.value().row(0);
  const Var in[] = {x, gamma, beta};
  return x.graph()->record(
      OpKind::kLayerNorm, in, std::move(out),
      [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph& g, const Matrix& d,
                                                                              const Matrix&) {
        if (g.needs_grad(gamma)) g.accumulate(gamma, d.cwiseProduct(xhat).colwise().sum());
        if (g.needs_grad(beta)) g.accumulate(beta, d.colwise().sum());
        if (!g.needs_grad(x)) return;
        const Matrix dxhat = d.array().rowwise() * gamma.value().row(0).array();
        Matrix dx(dxhat.rows(), dxhat.cols());
        for (Index r = 0; r < dxhat.rows(); ++r) {
          const double m1 = dxhat.row(r).mean();
          const double m2 = dxhat.row(r).dot(xhat.row(r)) / static_cast<double>(dxhat.cols());
          dx.row(r) = inv_std(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2).matrix();
        }
        g.accumulate(x, dx);
      });
}

Var gelu(Var x) {
  const double k = std::sqrt(2.0 / std::numbers::pi);
  Matrix t = (k * (x.value().array() + kGeluC * x.value().array().cube())).tanh().matrix();
  Matrix out = (0.5 * x.value().array() * (1.0 + t.array())).matrix();
  const Var in[] = {x};
  return x.graph()->record(OpKind::kGelu, in, std::move(out),
                           [x, k, t = std::move(t)](Graph& g, const Matrix& d, const Matrix&) {
                             const auto xv = x.value().array();
                             const auto deriv = 0.5 * (1.0 + t.array()) +
                                                0.5 * xv * (1.0 - t.array().square()) * k *
                                                    (1.0 + 3.0 * kGeluC * xv.square());
                             g.accumulate(x, (d.array() * deriv).matrix());
                           });
}

Var embedding(Var table, std::span<const int> ids) {
  const Index vocab = table.rows();
  Matrix out(static_cast<Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= vocab) {
      throw InputError("embedding: id " + std::to_string(ids[i]) + " outside [0, " + std::to_string(vocab) + ")");
    }
    out.row(static_cast<Index>(i)) = table.value().row(ids[i]);
  }
  const Var in[] = {table};
  return table.graph()->record(OpKind::kEmbedding, in, std::move(out),
                               [table, ids = std::vector<int>(ids.begin(), ids.end())](
                                   Graph& g, const Matrix& d, const Matrix&) {
                                 for (std::size_t i = 0; i < ids.size(); ++i) {
                                   g.accumulate_block(table, ids[i], 0, d.row(static_cast<Index>(i)));
                                 }
                               });
}

Var slice(Var x, Index row, Index col, Index rows, Index cols) {
  if (row < 0 || col < 0 || rows <= 0 || cols <= 0 || row + rows > x.rows() || col + cols > x.cols()) {
    throw DimensionError("slice [" + std::to_string(row) + "+" + std::to_string(rows) + ", " + std::to_string(col) +
                         "+" + std::to_string(cols) + "] outside " + dims(x.value()));
  }
  const Var in[] = {x};
  return x.graph()->record(OpKind::kSlice, in, x.value().block(row, col, rows, cols),
                           [x, row, col](Graph& g, const Matrix& d, const Matrix&) {
                             g.accumulate_block(x, row, col, d);
                           });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  Index total = 0;
  for (Var p : parts) {
    require_same_graph(parts[0], p);
    if (p.cols() != parts[0].cols()) throw DimensionError("concat_rows: column counts differ");
    total += p.rows();
  }
  Matrix out(total, parts[0].cols());
  Index at = 0;
  for (Var p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  std::vector<Var> keep(parts.begin(), parts.end());
  return parts[0].graph()->record(OpKind::kConcatRows, parts, std::move(out),
                                  [keep](Graph& g, const Matrix& d, const Matrix&) {
                                    Index at = 0;
                                    for (Var p : keep) {
                                      g.accumulate_block(p, 0, 0, d.middleRows(at, p.rows()));
                                      at += p.rows();
                                    }
                                  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  Index total = 0;
  for (Var p : parts) {
    require_same_graph(parts[0], p);
    if (p.rows() != parts[0].rows()) throw DimensionError("concat_cols: row counts differ");
    total += p.cols();
  }
  Matrix out(parts[0].rows(), total);
  Index at = 0;
  for (Var p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  std::vector<Var> keep(parts.begin(), parts.end());
  return parts[0].graph()->record(OpKind::kConcatCols, parts, std::move(out),
                                  [keep](Graph& g, const Matrix& d, const Matrix&) {
                                    Index at = 0;
                                    for (Var p : keep) {
                                      g.accumulate_block(p, 0, 0, d.middleCols(at, p.cols()));
                                      at += p.cols();
                                    }
                                  });
}

Var gather_rows(Var x, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= x.rows()) throw DimensionError("gather_rows: row index out of range");
    out.row(static_cast<Index>(i)) = x.value().row(rows[i]);
  }
  const Var in[] = {x};
  return x.graph()->record(OpKind::kGatherRows, in, std::move(out),
                           [x, rows = std::vector<Index>(rows.begin(), rows.end())](Graph& g, const Matrix& d,
                                                                                    const Matrix&) {
                             for (std::size_t i = 0; i < rows.size(); ++i) {
                               g.accumulate_block(x, rows[i], 0, d.row(static_cast<Index>(i)));
                             }
                           });
}

Var reshape(Var x, Index rows, Index cols) {
  if (rows * cols != x.value().size()) {
    throw DimensionError("reshape: cannot view " + dims(x.value()) + " as [" + std::to_string(rows) + "x" +
                         std::to_string(cols) + "]");
  }
  Matrix out = Eigen::Map<const Matrix>(x.value().data(), rows, cols);
  const Var in[] = {x};
  return x.graph()->record(OpKind::kReshape, in, std::move(out), [x](Graph& g, const Matrix& d, const Matrix&) {
    g.accumulate(x, Eigen::Map<const Matrix>(d.data(), x.rows(), x.cols()));
  });
}

Var sum(Var x) {
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  const Var in[] = {x};
  return x.graph()->record(OpKind::kSum, in, std::move(out), [x](Graph& g, const Matrix& d, const Matrix&) {
    g.accumulate(x, Matrix::Constant(x.rows(), x.cols(), d(0, 0)));
  });
}

Var cross_entropy(Var logits, std::span<const int> targets, int ignore_index) {
  const Index n = logits.rows();
  const Index c = logits.cols();
  if (static_cast<Index>(targets.size()) != n) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for " + std::to_string(n) +
                         " rows");
  }
  const Matrix logp = log_softmax_rows(logits.value());
  double total = 0.0;
  Index count = 0;
  for (Index r = 0; r < n; ++r) {
    const int t = targets[static_cast<std::size_t>(r)];
    if (t == ignore_index) continue;
    if (t < 0 || t >= c) {
      throw InputError("cross_entropy: target " + std::to_string(t) + " outside [0, " + std::to_string(c) + ")");
    }
    total -= logp(r, t);
    ++count;
  }
  Matrix out(1, 1);
  out(0, 0) = count ? total / static_cast<double>(count) : 0.0;
  const Var in[] = {logits};
  return logits.graph()->record(
      OpKind::kCrossEntropy, in, std::move(out),
      [logits, logp, count, ignore_index, t = std::vector<int>(targets.begin(), targets.end())](
          Graph& g, const Matrix& d, const Matrix&) {
        Matrix dl = Matrix::Zero(logp.rows(), logp.cols());
        if (count > 0) {
          const double w = d(0, 0) / static_cast<double>(count);
          for (Index r = 0; r < logp.rows(); ++r) {
            if (t[static_cast<std::size_t>(r)] == ignore_index) continue;
            dl.row(r) = w * logp.row(r).array().exp().matrix();
            dl(r, t[static_cast<std::size_t>(r)]) -= w;
          }
        }
        g.accumulate(logits, dl);
      });
}

}  // namespace sparsify

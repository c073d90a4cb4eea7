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

#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "gradcheck.hpp"
#include "sparsify/autodiff.hpp"

using namespace sparsify;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.data()) v = u(rng);
  return t;
}

}  // namespace

TEST_CASE("tensor shape invariants") {
  Tensor t({2, 3});
  CHECK(t.size() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK_THROWS_AS(Tensor({2, 0}), DimensionError);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  Tensor scalar;
  CHECK(scalar.size() == 1);
  CHECK(scalar.rank() == 0);
  CHECK(t.grad().size() == 6);
}

TEST_CASE("matmul") {
  Graph g;
  Tensor i2 = Tensor::from_rows({{1, 0}, {0, 1}});
  Tensor b = Tensor::from_rows({{3, 4}, {5, 6}});
  Var c = matmul(g.parameter(i2), g.parameter(b));
  CHECK(c.value() == b.matrix());

  Tensor row = Tensor::from_rows({{1, 2}});
  Tensor col = Tensor::from_rows({{3}, {4}});
  CHECK(matmul(g.parameter(row), g.parameter(col)).value()(0, 0) == 11.0);

  SUBCASE("matches a triple loop") {
    std::mt19937_64 rng(7);
    Tensor a = random_tensor({4, 5}, rng);
    Tensor bb = random_tensor({5, 3}, rng);
    const Matrix out = matmul(g.parameter(a), g.parameter(bb)).value();
    for (Index i = 0; i < 4; ++i) {
      for (Index j = 0; j < 3; ++j) {
        double acc = 0.0;
        for (Index k = 0; k < 5; ++k) acc += a(i, k) * bb(k, j);
        CHECK(std::abs(out(i, j) - acc) < 1e-12);
      }
    }
  }

  SUBCASE("identity is exact on both sides") {
    Tensor a = Tensor::from_rows({{0.5, -2, 3}, {1.25, 8, -0.75}});
    Tensor left = Tensor::from_matrix(Matrix::Identity(2, 2));
    Tensor right = Tensor::from_matrix(Matrix::Identity(3, 3));
    CHECK(matmul(g.parameter(left), g.parameter(a)).value() == a.matrix());
    CHECK(matmul(g.parameter(a), g.parameter(right)).value() == a.matrix());
  }

  SUBCASE("shape mismatch names both shapes") {
    Tensor x({2, 3});
    Tensor y({2, 3});
    try {
      matmul(g.parameter(x), g.parameter(y));
      FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
      const std::string what = e.what();
      CHECK(what.find("[2x3]") != std::string::npos);
    }
  }
}

TEST_CASE("softmax") {
  Graph g;
  Tensor zeros({3});
  const Matrix s = softmax(g.parameter(zeros)).value();
  for (Index i = 0; i < 3; ++i) CHECK(std::abs(s(0, i) - 1.0 / 3.0) < 1e-15);

  Tensor big = Tensor::vector({1000.0, 0.0});
  const Matrix sb = softmax(g.parameter(big)).value();
  CHECK(std::isfinite(sb(0, 0)));
  CHECK(sb(0, 0) == doctest::Approx(1.0));
  CHECK(sb(0, 1) < 1e-300);

  Tensor v = Tensor::vector({1.0, 2.0, 3.0});
  const Matrix sv = softmax(g.parameter(v)).value();
  long double z = 0;
  for (int i = 1; i <= 3; ++i) z += std::exp(static_cast<long double>(i));
  for (int i = 1; i <= 3; ++i) {
    const long double expected = std::exp(static_cast<long double>(i)) / z;
    CHECK(std::abs(sv(0, i - 1) - static_cast<double>(expected)) < 1e-12);
  }

  SUBCASE("rows sum to one and ignore constant shifts") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
      Tensor x = random_tensor({3, 6}, rng, -10, 10);
      Tensor shifted = x;
      std::uniform_real_distribution<double> u(-5, 5);
      for (Index r = 0; r < 3; ++r) {
        const double c = u(rng);
        for (Index k = 0; k < 6; ++k) shifted(r, k) += c;
      }
      const Matrix a = softmax(g.parameter(x)).value();
      const Matrix b = softmax(g.parameter(shifted)).value();
      for (Index r = 0; r < 3; ++r) CHECK(std::abs(a.row(r).sum() - 1.0) < 1e-12);
      CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  SUBCASE("column axis") {
    Tensor x = Tensor::from_rows({{1, 5}, {3, 5}});
    const Matrix c = softmax(g.parameter(x), 0).value();
    CHECK(c(0, 1) == doctest::Approx(0.5));
    CHECK(c.col(0).sum() == doctest::Approx(1.0));
    CHECK_THROWS_AS(softmax(g.parameter(x), 2), DimensionError);
  }
}

TEST_CASE("layer_norm") {
  Graph g;
  Tensor ones({1, 3});
  for (double& v : ones.data()) v = 1.0;
  Tensor gamma = Tensor::vector({1, 1, 1});
  Tensor beta = Tensor::vector({0, 0, 0});
  const Matrix flat = layer_norm(g.parameter(ones), g.parameter(gamma), g.parameter(beta), 1e-12).value();
  CHECK(flat.cwiseAbs().maxCoeff() == 0.0);

  Tensor x = Tensor::from_rows({{1, 2, 3}});
  const Matrix y = layer_norm(g.parameter(x), g.parameter(gamma), g.parameter(beta), 1e-12).value();
  const double mean = y.mean();
  const double var = (y.array() - mean).square().mean();
  CHECK(std::abs(mean) < 1e-12);
  CHECK(std::abs(var - 1.0) < 1e-9);

  Tensor x2 = Tensor::from_rows({{0, 2}});
  Tensor g2 = Tensor::vector({2, 2});
  Tensor b2 = Tensor::vector({1, 1});
  const double eps = 1e-5;
  const Matrix y2 = layer_norm(g.parameter(x2), g.parameter(g2), g.parameter(b2), eps).value();
  // mean 1, population variance 1
  const double sigma_norm = 1.0 / std::sqrt(1.0 + eps);
  CHECK(std::abs(y2(0, 0) - (1.0 - 2.0 * sigma_norm)) < 1e-14);
  CHECK(std::abs(y2(0, 1) - (1.0 + 2.0 * sigma_norm)) < 1e-14);
}

TEST_CASE("gelu") {
  Graph g;
  Tensor x = Tensor::vector({0.0, 1.0, 30.0});
  const Matrix y = gelu(g.parameter(x)).value();
  CHECK(y(0, 0) == 0.0);
  CHECK(std::abs(y(0, 2) - 30.0) < 1e-9);
  const long double one = 1.0L;
  const long double k = std::sqrt(2.0L / std::numbers::pi_v<long double>);
  const long double expected = 0.5L * one * (1.0L + std::tanh(k * (one + 0.044715L * one * one * one)));
  CHECK(std::abs(y(0, 1) - static_cast<double>(expected)) < 1e-6);

  Tensor grid({61});
  for (Index i = 0; i < 61; ++i) grid[i] = -3.0 + 0.1 * static_cast<double>(i);
  const Matrix gy = gelu(g.parameter(grid)).value();
  // Tanh-GELU dips below zero near -0.75, so monotonicity holds right of it.
  for (Index i = 23; i < 61; ++i) CHECK(gy(0, i) > gy(0, i - 1));
}

TEST_CASE("cross_entropy") {
  Graph g;
  Tensor uniform = Tensor::from_rows({{0, 0}});
  const std::vector<int> t0 = {0};
  CHECK(cross_entropy(g.parameter(uniform), t0).value()(0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));

  Tensor dominant = Tensor::from_rows({{50, 0, 0}});
  CHECK(cross_entropy(g.parameter(dominant), t0).value()(0, 0) < 1e-20);

  SUBCASE("random batch matches a direct oracle") {
    std::mt19937_64 rng(3);
    Tensor logits = random_tensor({3, 4}, rng, -3, 3);
    const std::vector<int> targets = {2, 0, 3};
    long double total = 0;
    for (Index r = 0; r < 3; ++r) {
      long double z = 0;
      for (Index c = 0; c < 4; ++c) z += std::exp(static_cast<long double>(logits(r, c)));
      total += -std::log(std::exp(static_cast<long double>(logits(r, targets[static_cast<std::size_t>(r)]))) / z);
    }
    const double expected = static_cast<double>(total / 3);
    CHECK(std::abs(cross_entropy(g.parameter(logits), targets).value()(0, 0) - expected) < 1e-10);
  }

  SUBCASE("ignored rows") {
    Tensor logits = Tensor::from_rows({{1, 2}, {3, -1}});
    logits.set_requires_grad(true);
    Graph g2;
    const std::vector<int> none = {kIgnoreIndex, kIgnoreIndex};
    Var loss = cross_entropy(g2.parameter(logits), none);
    CHECK(loss.value()(0, 0) == 0.0);
    g2.backward(loss);
    for (double v : logits.grad()) CHECK(v == 0.0);
    const std::vector<int> bad = {5, 0};
    CHECK_THROWS_AS(cross_entropy(g2.parameter(logits), bad), InputError);
  }
}

TEST_CASE("backward") {
  SUBCASE("sum gives ones") {
    Tensor x({2, 3}, true);
    Graph g;
    g.backward(sum(g.parameter(x)));
    for (double v : x.grad()) CHECK(v == 1.0);
  }
  SUBCASE("sum of squares gives 2x") {
    std::mt19937_64 rng(5);
    Tensor x = random_tensor({3, 2}, rng);
    x.set_requires_grad(true);
    Graph g;
    Var p = g.parameter(x);
    g.backward(sum(hadamard(p, p)));
    for (Index i = 0; i < x.size(); ++i) CHECK(x.grad()[i] == 2.0 * x[i]);
  }
  SUBCASE("non-scalar loss is a contract error") {
    Tensor x({2, 2}, true);
    Graph g;
    CHECK_THROWS_AS(g.backward(g.parameter(x)), ContractError);
  }
  SUBCASE("each node runs once") {
    Tensor x({1, 1}, true);
    x[0] = 3.0;
    Graph g;
    Var p = g.parameter(x);
    Var y = add(p, p);
    g.backward(sum(hadamard(y, p)));  // 2x^2
    CHECK(x.grad()[0] == 12.0);
    CHECK_THROWS_AS(g.backward(sum(p)), ContractError);
  }
}

TEST_CASE("composed graphs match finite differences") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor a = random_tensor({3, 4}, rng, -10, 10);
    Tensor w = random_tensor({4, 5}, rng, -1, 1);
    Tensor bias = random_tensor({5}, rng, -1, 1);
    Tensor gamma = random_tensor({5}, rng, 0.5, 1.5);
    Tensor beta = random_tensor({5}, rng, -1, 1);
    Tensor table = random_tensor({6, 5}, rng, -1, 1);
    const std::vector<int> ids = {1, 4, 1};
    const std::vector<int> targets = {0, kIgnoreIndex, 3};
    const std::vector<Index> pick = {2, 0};
    auto loss = [&](Graph& g) {
      Var h = add_row_bias(matmul(g.parameter(a), g.parameter(w)), g.parameter(bias));
      h = layer_norm(h, g.parameter(gamma), g.parameter(beta), 1e-5);
      h = gelu(h) + embedding(g.parameter(table), ids);
      Var att = softmax(scale(matmul_nt(h, h), 0.3));
      Var mixed = matmul(att, h);
      Var left = slice(mixed, 0, 0, 3, 2);
      Var right = slice(mixed, 0, 2, 3, 3);
      const Var parts[] = {right, left};
      Var joined = concat_cols(parts);
      const Var rows[] = {joined, transpose(transpose(joined))};
      Var stacked = concat_rows(rows);
      Var picked = gather_rows(reshape(stacked, 6, 5), pick);
      return cross_entropy(slice(stacked, 0, 0, 3, 5), targets) + sum(softmax(picked, 0) * 0.0 + picked);
    };
    const auto r = testing::check_gradients(loss, {&a, &w, &bias, &gamma, &beta, &table},
                                            {"a", "w", "bias", "gamma", "beta", "table"});
    INFO(r.worst_location);
    CHECK(r.worst_rel_error < 1e-4);
    CHECK(r.checked == a.size() + w.size() + bias.size() + gamma.size() + beta.size() + table.size());
  }
}

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

#include "sparsify/distillation.hpp"

#include <string>

namespace sparsify {

void KdConfig::validate() const {
  if (!(hardness >= 0.0 && hardness <= 1.0)) {
    throw ConfigError("distillation hardness " + std::to_string(hardness) + " outside [0, 1]");
  }
  if (!(temperature > 0.0)) throw ConfigError("distillation temperature must be positive");
}

Var tempered_kl(Var student_logits, const Matrix& teacher_logits, std::span<const int> targets, double temperature,
                int ignore_index) {
  const Matrix& z = student_logits.value();
  if (teacher_logits.rows() != z.rows() || teacher_logits.cols() != z.cols()) {
    throw DimensionError("teacher logits [" + std::to_string(teacher_logits.rows()) + "x" +
                         std::to_string(teacher_logits.cols()) + "] do not match student logits [" +
                         std::to_string(z.rows()) + "x" + std::to_string(z.cols()) + "]");
  }
  if (static_cast<Index>(targets.size()) != z.rows()) throw DimensionError("tempered_kl: one target per row");
  const Matrix log_p = log_softmax_rows(teacher_logits / temperature);
  const Matrix log_q = log_softmax_rows(z / temperature);
  std::vector<Index> rows;
  double total = 0.0;
  for (Index r = 0; r < z.rows(); ++r) {
    if (targets[static_cast<std::size_t>(r)] == ignore_index) continue;
    rows.push_back(r);
    for (Index c = 0; c < z.cols(); ++c) {
      const double p = std::exp(log_p(r, c));
      if (p > 0.0) total += p * (log_p(r, c) - log_q(r, c));
    }
  }
  Matrix out(1, 1);
  out(0, 0) = rows.empty() ? 0.0 : total / static_cast<double>(rows.size());
  const Var in[] = {student_logits};
  return student_logits.graph()->record(
      OpKind::kCustom, in, std::move(out),
      [student_logits, log_p, log_q, rows, temperature](Graph& g, const Matrix& d, const Matrix&) {
        Matrix dz = Matrix::Zero(log_q.rows(), log_q.cols());
        if (!rows.empty()) {
          const double w = d(0, 0) / (temperature * static_cast<double>(rows.size()));
          for (Index r : rows) dz.row(r) = w * (log_q.row(r).array().exp() - log_p.row(r).array().exp()).matrix();
        }
        g.accumulate(student_logits, dz);
      });
}

Var distill_loss(Var student_logits, const Matrix& teacher_logits, std::span<const int> targets, const KdConfig& cfg,
                 int ignore_index) {
  cfg.validate();
  if (cfg.hardness == 0.0) return cross_entropy(student_logits, targets, ignore_index);
  const double t2 = cfg.temperature * cfg.temperature;
  Var soft = scale(tempered_kl(student_logits, teacher_logits, targets, cfg.temperature, ignore_index),
                   cfg.hardness * t2);
  if (cfg.hardness == 1.0) return soft;
  return soft + scale(cross_entropy(student_logits, targets, ignore_index), 1.0 - cfg.hardness);
}

}  // namespace sparsify

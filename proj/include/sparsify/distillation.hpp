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

#ifndef SPARSIFY_DISTILLATION_HPP_
#define SPARSIFY_DISTILLATION_HPP_

#include <span>

#include "sparsify/autodiff.hpp"

namespace sparsify {

struct KdConfig {
  // Weight of the teacher-matching term; 1 - hardness weights the hard labels.
  double hardness = 0.5;
  double temperature = 2.0;

  void validate() const;
  friend bool operator==(const KdConfig&, const KdConfig&) = default;
};

// Mean over rows with a target of KL(softmax(teacher / T) || softmax(student / T)).
// The teacher is a constant.
Var tempered_kl(Var student_logits, const Matrix& teacher_logits, std::span<const int> targets, double temperature,
                int ignore_index = kIgnoreIndex);

// hardness * T^2 * KL + (1 - hardness) * cross_entropy(student, targets).
// The T^2 factor keeps the soft-term gradient scale independent of T.
Var distill_loss(Var student_logits, const Matrix& teacher_logits, std::span<const int> targets, const KdConfig& cfg,
                 int ignore_index = kIgnoreIndex);

}  // namespace sparsify

#endif  // SPARSIFY_DISTILLATION_HPP_

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

#ifndef SPARSIFY_PRUNING_HPP_
#define SPARSIFY_PRUNING_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "sparsify/mask.hpp"
#include "sparsify/model.hpp"

namespace sparsify {

enum class Interpolation : std::uint8_t { kCubic, kLinear };

std::string_view interpolation_name(Interpolation i);
Interpolation parse_interpolation(std::string_view name);

// Maps a global optimizer step to a target sparsity.
struct PruningSchedule {
  double initial_sparsity = 0.30;
  double final_sparsity = 0.90;
  long prune_start_step = 0;
  long prune_end_step = 1;
  int events_per_epoch = 100;
  Interpolation interpolation = Interpolation::kCubic;

  void validate() const;
  friend bool operator==(const PruningSchedule&, const PruningSchedule&) = default;
};

// Initial before the window, final after it. Inside, with progress t:
//   cubic  s_f + (s_i - s_f) (1 - t)^3
//   linear s_i + (s_f - s_i) t
double sparsity_at_step(const PruningSchedule& schedule, long step);

// Prune events spaced evenly over [start, end] at events_per_epoch per
// epoch; the first lands on start and the last on end. Events that round to
// the same step are merged.
std::vector<long> prune_event_steps(const PruningSchedule& schedule, long steps_per_epoch);

// Number of entries a component of `size` must have pruned at `target`.
Index pruned_count_for(double target, Index size);

// Prunes the smallest-magnitude kept entries until ceil(target * size) are
// pruned. Equal magnitudes prune the lower flat index first. Entries already
// pruned stay pruned. Throws ScheduleError if the mask is already sparser
// than the target.
SparsityMask magnitude_prune_component(const Tensor& weights, const SparsityMask& mask, double target);

struct GmpState {
  long step = 0;
  MaskSet masks;
  PruningSchedule schedule;
};

// Starts with all-ones masks over every prunable component.
GmpState make_gmp_state(const ModelParams& params, const PruningSchedule& schedule);

// Prunes every prunable component independently to
// sparsity_at_step(schedule, state.step), then zeroes pruned weights.
void gmp_step(GmpState& state, ModelParams& params);

// Zeroes masked weights, and their gradients when present.
void enforce_masks(ModelParams& params, const MaskSet& masks);

struct ComponentSparsity {
  double mask_sparsity = 0.0;
  double zero_fraction = 0.0;
  Index size = 0;
};

struct SparsityReport {
  std::map<std::string, ComponentSparsity> components;
  // Pruned fraction of the prunable encoder weights.
  double encoder_sparsity = 0.0;
  // Pruned fraction of every parameter, counting embeddings and heads as dense.
  double total_sparsity = 0.0;
  // Largest per-component gap from `target`, used by uniformity checks.
  double max_deviation(double target) const;
};

// Components without a mask in `masks` report from their zero fraction.
SparsityReport measure_sparsity(const ModelParams& params, const MaskSet& masks);

// True when every mask in `later` keeps a subset of what `earlier` keeps.
bool masks_nested(const MaskSet& later, const MaskSet& earlier);

}  // namespace sparsify

#endif  // SPARSIFY_PRUNING_HPP_

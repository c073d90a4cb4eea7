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

#include "sparsify/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace sparsify {

std::string_view interpolation_name(Interpolation i) { return i == Interpolation::kCubic ? "cubic" : "linear"; }

Interpolation parse_interpolation(std::string_view name) {
  if (name == "cubic") return Interpolation::kCubic;
  if (name == "linear") return Interpolation::kLinear;
  throw ConfigError("unknown interpolation '" + std::string(name) + "'");
}

void PruningSchedule::validate() const {
  if (!(initial_sparsity >= 0.0 && initial_sparsity < final_sparsity && final_sparsity < 1.0)) {
    throw ConfigError("pruning schedule needs 0 <= initial_sparsity < final_sparsity < 1");
  }
  if (!(prune_start_step < prune_end_step)) throw ConfigError("pruning schedule needs start < end");
  if (events_per_epoch <= 0) throw ConfigError("events_per_epoch must be positive");
}

double sparsity_at_step(const PruningSchedule& s, long step) {
  if (step <= s.prune_start_step) return s.initial_sparsity;
  if (step >= s.prune_end_step) return s.final_sparsity;
  const double t = static_cast<double>(step - s.prune_start_step) /
                   static_cast<double>(s.prune_end_step - s.prune_start_step);
  if (s.interpolation == Interpolation::kLinear) {
    return s.initial_sparsity + (s.final_sparsity - s.initial_sparsity) * t;
  }
  const double r = 1.0 - t;
  return s.final_sparsity + (s.initial_sparsity - s.final_sparsity) * r * r * r;
}

std::vector<long> prune_event_steps(const PruningSchedule& s, long steps_per_epoch) {
  s.validate();
  if (steps_per_epoch <= 0) throw ConfigError("steps_per_epoch must be positive");
  const long window = s.prune_end_step - s.prune_start_step;
  const double epochs = static_cast<double>(window) / static_cast<double>(steps_per_epoch);
  const long intervals = std::max(1L, std::lround(epochs * s.events_per_epoch));
  std::vector<long> steps;
  steps.reserve(static_cast<std::size_t>(intervals + 1));
  for (long j = 0; j <= intervals; ++j) {
    const long at = s.prune_start_step + std::lround(static_cast<double>(j) * static_cast<double>(window) /
                                                     static_cast<double>(intervals));
    if (steps.empty() || steps.back() != at) steps.push_back(at);
  }
  return steps;
}

Index pruned_count_for(double target, Index size) {
  // The epsilon keeps products like 0.9 * 100 from rounding up to 91.
  const double raw = target * static_cast<double>(size);
  return std::clamp<Index>(static_cast<Index>(std::ceil(raw - 1e-9)), 0, size);
}

SparsityMask magnitude_prune_component(const Tensor& weights, const SparsityMask& mask, double target) {
  if (weights.size() != mask.size()) {
    throw DimensionError("weights of " + mask.component_path() + " do not match the mask size");
  }
  if (target < 0.0 || target >= 1.0) throw ScheduleError("target sparsity must lie in [0, 1)");
  const Index want = pruned_count_for(target, mask.size());
  if (mask.pruned_count() > want) {
    throw ScheduleError("target sparsity " + std::to_string(target) + " is below the current sparsity " +
                        std::to_string(mask.sparsity()) + " of " + mask.component_path());
  }
  SparsityMask out = mask;
  const Index extra = want - mask.pruned_count();
  if (extra == 0) return out;
  std::vector<std::pair<double, Index>> kept;
  kept.reserve(static_cast<std::size_t>(mask.kept_count()));
  for (Index i = 0; i < mask.size(); ++i) {
    if (mask.kept(i)) kept.emplace_back(std::abs(weights[i]), i);
  }
  std::nth_element(kept.begin(), kept.begin() + (extra - 1), kept.end());
  for (Index j = 0; j < extra; ++j) out.prune(kept[static_cast<std::size_t>(j)].second);
  return out;
}

GmpState make_gmp_state(const ModelParams& params, const PruningSchedule& schedule) {
  schedule.validate();
  return GmpState{0, dense_masks(params), schedule};
}

void gmp_step(GmpState& state, ModelParams& params) {
  const double target = sparsity_at_step(state.schedule, state.step);
  for (auto& [path, mask] : state.masks) {
    mask = magnitude_prune_component(params.at(path), mask, target);
  }
  enforce_masks(params, state.masks);
}

void enforce_masks(ModelParams& params, const MaskSet& masks) {
  for (const auto& [path, mask] : masks) {
    Tensor& w = params.at(path);
    if (w.size() != mask.size()) throw DimensionError("mask for " + path + " does not match its weight");
    const bool grads = w.has_grad();
    auto data = w.data();
    for (Index i = 0; i < mask.size(); ++i) {
      if (mask.kept(i)) continue;
      data[static_cast<std::size_t>(i)] = 0.0;
      if (grads) w.grad()[static_cast<std::size_t>(i)] = 0.0;
    }
  }
}

double SparsityReport::max_deviation(double target) const {
  double worst = 0.0;
  for (const auto& [path, c] : components) worst = std::max(worst, std::abs(c.mask_sparsity - target));
  return worst;
}

SparsityReport measure_sparsity(const ModelParams& params, const MaskSet& masks) {
  SparsityReport report;
  Index prunable_total = 0;
  Index prunable_pruned = 0;
  for (const auto& path : params.prunable_paths()) {
    const Tensor& w = params.at(path);
    ComponentSparsity c;
    c.size = w.size();
    const Index zeros = static_cast<Index>(std::count(w.data().begin(), w.data().end(), 0.0));
    c.zero_fraction = static_cast<double>(zeros) / static_cast<double>(c.size);
    auto it = masks.find(path);
    const Index pruned = it != masks.end() ? it->second.pruned_count() : zeros;
    c.mask_sparsity = static_cast<double>(pruned) / static_cast<double>(c.size);
    prunable_total += c.size;
    prunable_pruned += pruned;
    report.components.emplace(path, c);
  }
  report.encoder_sparsity =
      prunable_total ? static_cast<double>(prunable_pruned) / static_cast<double>(prunable_total) : 0.0;
  const Index all = params.parameter_count();
  report.total_sparsity = all ? static_cast<double>(prunable_pruned) / static_cast<double>(all) : 0.0;
  return report;
}

bool masks_nested(const MaskSet& later, const MaskSet& earlier) {
  for (const auto& [path, mask] : later) {
    auto it = earlier.find(path);
    if (it == earlier.end() || !mask.is_subset_of(it->second)) return false;
  }
  return true;
}

}  // namespace sparsify

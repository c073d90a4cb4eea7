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

// Experiment rows, per-cell aggregates and the two pivot tables.

#ifndef SPARSIFY_REPORT_HPP_
#define SPARSIFY_REPORT_HPP_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

namespace sparsify {

struct ReportRow {
  std::string model;       // e.g. "dense", "pretrain_pruned"
  std::string lineage;     // provenance joined with '>'
  std::string stage;       // pruning_stage() of the lineage
  bool domain_pretrained = false;
  std::string task;
  double fraction = 1.0;   // share of the training split used
  std::uint64_t seed = 0;
  std::string metric;
  double value = 0;        // 0-100 scale

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

// Everything but the seed and the value.
struct CellKey {
  std::string model;
  std::string stage;
  bool domain_pretrained = false;
  std::string task;
  double fraction = 1.0;

  auto tie() const { return std::tie(model, stage, domain_pretrained, task, fraction); }
  friend bool operator<(const CellKey& a, const CellKey& b) { return a.tie() < b.tie(); }
  friend bool operator==(const CellKey& a, const CellKey& b) { return a.tie() == b.tie(); }
};

struct CellStats {
  long n = 0;
  double mean = 0;
  double stddev = 0;  // sample
};

struct ExperimentReport {
  std::string name;
  std::vector<ReportRow> rows;

  void add(ReportRow row) { rows.push_back(std::move(row)); }
  std::map<CellKey, CellStats> cells() const;
  // Mean value of one cell; ContractError when the cell is empty.
  double cell_mean(const CellKey& key) const;
  std::vector<double> cell_values(const CellKey& key) const;

  std::string to_csv() const;
  nlohmann::json to_json() const;  // rows plus aggregates
  static ExperimentReport from_json(const nlohmann::json& j);
  // Throws DataError if any row's stage disagrees with its lineage or a
  // cell's seed count differs from `seeds_per_cell` (when nonzero).
  void check_consistency(long seeds_per_cell = 0) const;
};

// Pruning-stage table: one line per (model, stage, domain) with a mean per
// task and the unweighted mean of task means as Overall.
struct StageTableLine {
  std::string model;
  std::string stage;
  bool domain_pretrained = false;
  std::map<std::string, double> task_means;
  double overall = 0;
};
std::vector<StageTableLine> stage_table(const ExperimentReport& report);
std::string stage_table_csv(const ExperimentReport& report);

// Data-size table: fraction x model means for a single task.
std::string data_size_table_csv(const ExperimentReport& report);

struct PairedInterval {
  long n = 0;
  double mean_difference = 0;
  double low = 0;
  double high = 0;
  bool contains_zero() const { return low <= 0.0 && 0.0 <= high; }
};

// Two-sided t interval on the mean of a[i] - b[i].
PairedInterval paired_difference_ci(std::span<const double> a, std::span<const double> b, double level = 0.95);

// Student t distribution with `df` degrees of freedom.
double student_t_cdf(double t, double df);
double student_t_quantile(double p, double df);

}  // namespace sparsify

#endif  // SPARSIFY_REPORT_HPP_

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

#include "sparsify/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include "sparsify/checkpoint.hpp"
#include "sparsify/error.hpp"

namespace sparsify {

namespace {

using nlohmann::json;

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

CellKey key_of(const ReportRow& r) { return {r.model, r.stage, r.domain_pretrained, r.task, r.fraction}; }

CellStats stats_of(const std::vector<double>& v) {
  CellStats s;
  s.n = static_cast<long>(v.size());
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

std::vector<std::string> split_lineage(const std::string& lineage) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : lineage) {
    if (c == '>') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

// Continued fraction for the regularized incomplete beta (modified Lentz).
double beta_cf(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  double c = 1.0;
  double d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 500; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  return h;
}

// I_x(a, b) with y = 1 - x passed separately so neither end loses digits.
double incomplete_beta(double a, double b, double x, double y) {
  if (x <= 0.0) return 0.0;
  if (y <= 0.0) return 1.0;
  const double front =
      std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log(y));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, y) / b;
}

}  // namespace

double student_t_cdf(double t, double df) {
  if (!(df > 0)) throw InputError("t distribution needs positive degrees of freedom");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, df / (df + t * t), t * t / (df + t * t));
  return t >= 0 ? 1.0 - tail : tail;
}

double student_t_quantile(double p, double df) {
  if (!(p > 0.0 && p < 1.0)) throw InputError("t quantile needs p in (0, 1)");
  double lo = -1.0, hi = 1.0;
  while (student_t_cdf(lo, df) > p) lo *= 2.0;
  while (student_t_cdf(hi, df) < p) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (student_t_cdf(mid, df) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

PairedInterval paired_difference_ci(std::span<const double> a, std::span<const double> b, double level) {
  if (a.size() != b.size()) throw InputError("paired samples differ in length");
  if (a.size() < 2) throw InputError("paired interval needs at least two pairs");
  if (!(level > 0.0 && level < 1.0)) throw InputError("confidence level must lie in (0, 1)");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const CellStats s = stats_of(d);
  const double half = student_t_quantile(0.5 + 0.5 * level, static_cast<double>(s.n - 1)) * s.stddev /
                      std::sqrt(static_cast<double>(s.n));
  return {s.n, s.mean, s.mean - half, s.mean + half};
}

std::map<CellKey, CellStats> ExperimentReport::cells() const {
  std::map<CellKey, std::vector<double>> grouped;
  for (const auto& r : rows) grouped[key_of(r)].push_back(r.value);
  std::map<CellKey, CellStats> out;
  for (const auto& [k, v] : grouped) out.emplace(k, stats_of(v));
  return out;
}

std::vector<double> ExperimentReport::cell_values(const CellKey& key) const {
  std::vector<double> out;
  for (const auto& r : rows) {
    if (key_of(r) == key) out.push_back(r.value);
  }
  return out;
}

double ExperimentReport::cell_mean(const CellKey& key) const {
  const auto v = cell_values(key);
  if (v.empty()) throw ContractError("report has no cell " + key.model + "/" + key.stage + "/" + key.task);
  return stats_of(v).mean;
}

std::string ExperimentReport::to_csv() const {
  std::ostringstream out;
  out << "model,lineage,pruning_stage,domain_pretrained,task,fraction,seed,metric,value\n";
  for (const auto& r : rows) {
    out << r.model << ',' << r.lineage << ',' << r.stage << ',' << (r.domain_pretrained ? 1 : 0) << ',' << r.task
        << ',' << fmt("%g", r.fraction) << ',' << r.seed << ',' << r.metric << ',' << fmt("%.6f", r.value) << '\n';
  }
  return out.str();
}

json ExperimentReport::to_json() const {
  json rs = json::array();
  for (const auto& r : rows) {
    rs.push_back({{"model", r.model},
                  {"lineage", r.lineage},
                  {"pruning_stage", r.stage},
                  {"domain_pretrained", r.domain_pretrained},
                  {"task", r.task},
                  {"fraction", r.fraction},
                  {"seed", r.seed},
                  {"metric", r.metric},
                  {"value", r.value}});
  }
  json agg = json::array();
  for (const auto& [k, s] : cells()) {
    agg.push_back({{"model", k.model},
                   {"pruning_stage", k.stage},
                   {"domain_pretrained", k.domain_pretrained},
                   {"task", k.task},
                   {"fraction", k.fraction},
                   {"n", s.n},
                   {"mean", s.mean},
                   {"std", s.stddev}});
  }
  json overall = json::array();
  for (const auto& line : stage_table(*this)) {
    overall.push_back({{"model", line.model},
                       {"pruning_stage", line.stage},
                       {"domain_pretrained", line.domain_pretrained},
                       {"task_means", line.task_means},
                       {"overall", line.overall}});
  }
  return {{"name", name}, {"rows", rs}, {"cells", agg}, {"overall", overall}};
}

ExperimentReport ExperimentReport::from_json(const json& j) {
  ExperimentReport rep;
  try {
    rep.name = j.at("name").get<std::string>();
    for (const auto& r : j.at("rows")) {
      rep.rows.push_back({r.at("model").get<std::string>(), r.at("lineage").get<std::string>(),
                          r.at("pruning_stage").get<std::string>(), r.at("domain_pretrained").get<bool>(),
                          r.at("task").get<std::string>(), r.at("fraction").get<double>(),
                          r.at("seed").get<std::uint64_t>(), r.at("metric").get<std::string>(),
                          r.at("value").get<double>()});
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
  return rep;
}

void ExperimentReport::check_consistency(long seeds_per_cell) const {
  for (const auto& r : rows) {
    const auto lineage = split_lineage(r.lineage);
    if (pruning_stage(lineage) != r.stage) {
      throw DataError("row " + r.model + "/" + r.task + ": stage " + r.stage + " disagrees with lineage " + r.lineage);
    }
    if (domain_pretrained(lineage) != r.domain_pretrained) {
      throw DataError("row " + r.model + "/" + r.task + ": domain flag disagrees with lineage " + r.lineage);
    }
  }
  if (seeds_per_cell <= 0) return;
  for (const auto& [k, s] : cells()) {
    if (s.n != seeds_per_cell) {
      throw DataError("cell " + k.model + "/" + k.task + " has " + std::to_string(s.n) + " seeds, expected " +
                      std::to_string(seeds_per_cell));
    }
  }
}

std::vector<StageTableLine> stage_table(const ExperimentReport& report) {
  std::map<std::tuple<std::string, std::string, bool>, StageTableLine> lines;
  std::vector<std::tuple<std::string, std::string, bool>> order;
  for (const auto& [k, s] : report.cells()) {
    auto id = std::make_tuple(k.model, k.stage, k.domain_pretrained);
    auto [it, fresh] = lines.try_emplace(id);
    if (fresh) {
      it->second.model = k.model;
      it->second.stage = k.stage;
      it->second.domain_pretrained = k.domain_pretrained;
      order.push_back(id);
    }
    it->second.task_means[k.task] = s.mean;
  }
  std::vector<StageTableLine> out;
  for (const auto& id : order) {
    StageTableLine line = lines.at(id);
    double sum = 0;
    for (const auto& [task, m] : line.task_means) sum += m;
    line.overall = line.task_means.empty() ? 0.0 : sum / static_cast<double>(line.task_means.size());
    out.push_back(std::move(line));
  }
  return out;
}

std::string stage_table_csv(const ExperimentReport& report) {
  std::set<std::string> tasks;
  for (const auto& r : report.rows) tasks.insert(r.task);
  std::ostringstream out;
  out << "model,pruning_stage,domain_pretrained";
  for (const auto& t : tasks) out << ',' << t;
  out << ",Overall\n";
  for (const auto& line : stage_table(report)) {
    out << line.model << ',' << line.stage << ',' << (line.domain_pretrained ? 1 : 0);
    for (const auto& t : tasks) {
      auto it = line.task_means.find(t);
      out << ',' << (it == line.task_means.end() ? std::string() : fmt("%.4f", it->second));
    }
    out << ',' << fmt("%.4f", line.overall) << '\n';
  }
  return out.str();
}

std::string data_size_table_csv(const ExperimentReport& report) {
  std::vector<std::string> models;
  std::set<double, std::greater<>> fractions;
  for (const auto& r : report.rows) {
    if (std::find(models.begin(), models.end(), r.model) == models.end()) models.push_back(r.model);
    fractions.insert(r.fraction);
  }
  std::map<std::pair<double, std::string>, std::vector<double>> vals;
  for (const auto& r : report.rows) vals[{r.fraction, r.model}].push_back(r.value);
  std::ostringstream out;
  out << "fraction";
  for (const auto& m : models) out << ',' << m;
  out << '\n';
  for (double f : fractions) {
    out << fmt("%g", f);
    for (const auto& m : models) {
      auto it = vals.find({f, m});
      out << ',' << (it == vals.end() ? std::string() : fmt("%.4f", stats_of(it->second).mean));
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace sparsify

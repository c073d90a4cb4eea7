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

// The two experiment protocols: where in the pipeline to prune, and how the
// answer changes as the fine-tuning set shrinks.

#ifndef SPARSIFY_EXPERIMENTS_HPP_
#define SPARSIFY_EXPERIMENTS_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sparsify/checkpoint.hpp"
#include "sparsify/report.hpp"
#include "sparsify/synthetic.hpp"
#include "sparsify/training.hpp"
#include "sparsify/vocab.hpp"

namespace sparsify {

using Progress = std::function<void(const std::string& message)>;

// Everything upstream of fine-tuning.
struct PretrainSpec {
  SyntheticDomainSpec data;
  ModelConfig model;  // vocab_size is taken from the vocabulary
  int vocab_cap = 4096;
  // Seed for model initialization and every pretraining run.
  std::uint64_t seed = 1;
  TrainRunConfig general_dense = recipes::pretrain_dense();
  TrainRunConfig general_prune = recipes::pretrain_prune();
  TrainRunConfig domain_dense;  // pretrain_dense on the domain corpus
  TrainRunConfig domain_prune;  // pretrain_prune on the domain corpus
  // Distillation from the dense domain model while an already pruned model
  // is domain-pretrained; every pretraining run of a sparse model has a
  // dense teacher.
  std::optional<KdConfig> sparse_domain_kd = KdConfig{0.5, 2.0};

  PretrainSpec();
  void validate() const;
  friend bool operator==(const PretrainSpec&, const PretrainSpec&) = default;
};

// Named pretrained models:
//   general_dense          fresh -> pretrain_dense
//   general_pruned         general_dense -> pretrain_prune (teacher general_dense)
//   domain_dense           general_dense -> domain_pretrain
//   general_pruned_domain  general_pruned -> domain_pretrain (teacher domain_dense)
//   domain_pruned          domain_dense -> domain_prune (teacher domain_dense)
inline constexpr const char* kPretrainedNames[] = {"general_dense", "general_pruned", "domain_dense",
                                                   "general_pruned_domain", "domain_pruned"};

// Lazily built, shared by experiments over the same PretrainSpec.
class PretrainedSet {
 public:
  explicit PretrainedSet(PretrainSpec spec, Progress progress = {});

  const PretrainSpec& spec() const { return spec_; }
  const SyntheticDomains& domains() const { return domains_; }
  const Vocab& vocab() const { return vocab_; }
  // spec().model with the vocabulary size and seed filled in.
  const ModelConfig& model() const { return model_; }
  const std::vector<std::vector<int>>& general_corpus() const { return general_; }
  const std::vector<std::vector<int>>& domain_corpus() const { return domain_; }

  // Builds `name` and its prerequisites on first use.
  const Checkpoint& get(const std::string& name);
  const RunResult* run(const std::string& name) const;
  bool has(const std::string& name) const { return models_.count(name) != 0; }
  // Preloads a model, e.g. from a cache directory.
  void put(const std::string& name, Checkpoint checkpoint);

 private:
  PretrainSpec spec_;
  Progress progress_;
  SyntheticDomains domains_;
  Vocab vocab_;
  ModelConfig model_;
  std::vector<std::vector<int>> general_;
  std::vector<std::vector<int>> domain_;
  std::map<std::string, Checkpoint> models_;
  std::map<std::string, RunResult> runs_;
};

// ---- pruning stage ------------------------------------------------------------

struct StageCell {
  std::string name;
  std::string init;     // PretrainedSet name
  bool prune_in_finetuning = false;
};

// The seven realizable combinations of pruning stage x domain pretraining
// (domain-stage pruning implies domain pretraining).
std::vector<StageCell> stage_cells();

struct StageExperimentSpec {
  PretrainSpec pretrain;
  TrainRunConfig finetune = recipes::finetune();
  TrainRunConfig finetune_prune = recipes::finetune_prune();
  std::vector<std::string> tasks{"er", "re", "qa"};
  // Replicates per (cell, task); 0 picks default_seed_count(train size).
  int seeds = 0;
  std::uint64_t first_seed = 1;
  // Subset of stage_cells() names; empty runs all of them.
  std::vector<std::string> cells;

  void validate() const;
};

ExperimentReport experiment_pruning_stage(const StageExperimentSpec& spec, PretrainedSet* pretrained = nullptr,
                                          const Progress& progress = {});

// ---- data size ----------------------------------------------------------------

struct DataSizeExperimentSpec {
  PretrainSpec pretrain;
  // Dense teacher fine-tuned on the full training split.
  TrainRunConfig teacher = recipes::data_size_teacher();
  TrainRunConfig finetune = recipes::data_size_finetune();
  TrainRunConfig finetune_prune = recipes::data_size_finetune_prune();
  std::vector<double> fractions{1.0, 0.75, 0.5, 0.25, 0.1, 0.05, 0.02, 0.01};
  int seeds = 5;
  std::uint64_t first_seed = 1;
  std::string task = "span_qa";
  // Evaluate on the dev split, the protocol's unaltered evaluation set.
  bool evaluate_on_dev = true;

  void validate() const;
};

inline constexpr const char* kDataSizeModels[] = {"dense", "pretrain_pruned", "finetune_pruned"};

ExperimentReport experiment_data_size(const DataSizeExperimentSpec& spec, PretrainedSet* pretrained = nullptr,
                                      const Progress& progress = {});

const TaskDataset& task_by_name(const SyntheticDomains& domains, const std::string& name);

// ---- config files ---------------------------------------------------------------

nlohmann::json to_json(const PretrainSpec& spec);
nlohmann::json to_json(const StageExperimentSpec& spec);
nlohmann::json to_json(const DataSizeExperimentSpec& spec);
nlohmann::json to_json(const SyntheticDomainSpec& spec);
nlohmann::json to_json(const ModelConfig& config);
// Strict readers: unknown keys throw ConfigError naming the key path.
PretrainSpec pretrain_spec_from_json(const nlohmann::json& j, const std::string& where = "pretrain");
StageExperimentSpec stage_spec_from_json(const nlohmann::json& j, const std::string& where = "config");
DataSizeExperimentSpec data_size_spec_from_json(const nlohmann::json& j, const std::string& where = "config");
SyntheticDomainSpec synthetic_spec_from_json(const nlohmann::json& j, const std::string& where = "data");
ModelConfig model_config_from_json(const nlohmann::json& j, const std::string& where = "model");

}  // namespace sparsify

#endif  // SPARSIFY_EXPERIMENTS_HPP_

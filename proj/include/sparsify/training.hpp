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

#ifndef SPARSIFY_TRAINING_HPP_
#define SPARSIFY_TRAINING_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sparsify/checkpoint.hpp"
#include "sparsify/datasets.hpp"
#include "sparsify/distillation.hpp"
#include "sparsify/metrics.hpp"
#include "sparsify/pruning.hpp"
#include "sparsify/vocab.hpp"

namespace sparsify {

// ---- learning rate -------------------------------------------------------

enum class LrKind { kLinearDecay, kCyclic };
const char* lr_kind_name(LrKind kind);
LrKind parse_lr_kind(std::string_view name);

struct LrSchedule {
  LrKind kind = LrKind::kLinearDecay;
  double peak_lr = 5e-5;
  // Steps where the rate resets to peak; 0 is implied. Ignored for linear decay.
  std::vector<long> cycle_boundaries;
  long total_steps = 1;

  void validate() const;
  friend bool operator==(const LrSchedule&, const LrSchedule&) = default;
};

// Sawtooth: peak at each boundary, falling linearly to 0 at the next
// boundary (or total_steps). Linear decay is the single-segment case.
double lr_at(const LrSchedule& schedule, long step);

// ---- optimizer -----------------------------------------------------------

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct Moments {
  Matrix m;
  Matrix v;
};

struct OptimizerState {
  AdamWConfig config;
  long step = 0;
  std::map<std::string, Moments> moments;
};

// Decoupled weight decay applies to paths ending in ".weight".
bool decays(const std::string& path);

// One bias-corrected AdamW update of every parameter holding a gradient.
// With masks, pruned entries are zeroed afterwards along with their moments.
void adam_step(ModelParams& params, OptimizerState& state, double lr, const MaskSet* masks = nullptr);

// Rescales gradients so their global L2 norm is at most `max_norm`.
// Returns the norm before clipping.
double clip_grad_norm(ModelParams& params, double max_norm);

// ---- masked language modelling ------------------------------------------

struct MlmStats {
  long candidates = 0;  // non-special positions seen
  long selected = 0;
  long masked = 0;      // replaced by [MASK]
  long randomized = 0;  // replaced by a random non-special id
  long unchanged = 0;
};

struct MlmBatch {
  std::vector<std::vector<int>> inputs;
  // Original id at selected positions, kIgnoreIndex elsewhere.
  std::vector<std::vector<int>> labels;
  MlmStats stats;
};

// Selects each non-special position with probability `mask_prob`; selected
// positions become [MASK] (80%), a random token (10%) or stay (10%).
MlmBatch mlm_mask_batch(std::span<const std::vector<int>> sequences, double mask_prob, int vocab_size,
                        std::mt19937_64& rng);

// ---- run configuration ----------------------------------------------------

enum class Regime { kPretrainDense, kPretrainPrune, kFinetune, kFinetunePrune };
const char* regime_name(Regime regime);
Regime parse_regime(std::string_view name);
bool is_pretrain(Regime regime);
bool prunes(Regime regime);

// Learning-rate plan in epochs; resolved to steps once the epoch length is known.
struct LrPlan {
  LrKind kind = LrKind::kLinearDecay;
  double peak_lr = 5e-5;
  std::vector<double> cycle_epochs;
  friend bool operator==(const LrPlan&, const LrPlan&) = default;
};

struct PruningPlan {
  double initial_sparsity = 0.30;
  double final_sparsity = 0.90;
  double start_epoch = 0.0;
  double end_epoch = 2.0;
  int events_per_epoch = 100;
  Interpolation interpolation = Interpolation::kCubic;
  friend bool operator==(const PruningPlan&, const PruningPlan&) = default;
};

struct TrainRunConfig {
  Regime regime = Regime::kFinetune;
  int epochs = 10;
  int batch_size = 16;
  int seq_len = 64;
  std::uint64_t seed = 0;
  LrPlan lr;
  std::optional<KdConfig> kd;
  std::optional<PruningPlan> pruning;
  // Pretraining on the domain corpus: provenance reads domain_pretrain /
  // domain_prune instead of pretrain_dense / pretrain_prune.
  bool domain_transfer = false;
  double mask_prob = 0.15;
  double grad_clip = 1.0;
  double weight_decay = 0.01;
  int log_every = 10;

  void validate() const;
  LrSchedule lr_schedule(long steps_per_epoch) const;
  PruningSchedule pruning_schedule(long steps_per_epoch) const;
  // Lineage entry this run appends to a checkpoint.
  std::string provenance_entry() const;
  friend bool operator==(const TrainRunConfig&, const TrainRunConfig&) = default;
};

nlohmann::json to_json(const TrainRunConfig& config);
// Strict: unknown keys throw ConfigError naming the key. Missing keys keep
// the struct defaults.
TrainRunConfig train_config_from_json(const nlohmann::json& j, const std::string& where = "config");
// `base` with the keys present in `overrides` replaced; lr and pruning
// objects merge key by key. Unknown keys throw ConfigError.
TrainRunConfig merge_train_config(const TrainRunConfig& base, const nlohmann::json& overrides,
                                  const std::string& where = "config");

// Fixed recipes.
namespace recipes {
// 3 epochs, rate cycling twice per epoch from 5e-4.
TrainRunConfig pretrain_dense();
// As above, pruning 0.30 -> 0.90 over the first two epochs with KD 0.5 / 2.0.
TrainRunConfig pretrain_prune();
// 10 epochs, batch 16, 5e-5 decaying linearly.
TrainRunConfig finetune();
// 2 dense epochs, prune over the next 6, stabilize 2; rate cycles at 2 and 8.
TrainRunConfig finetune_prune();
// Batch 12, 30 epochs, KD 0.8 / 2.0, 5e-5 decaying linearly.
TrainRunConfig data_size_finetune();
// As above, pruning over epochs [2, 20) with the rate cycling at 2 and 20.
TrainRunConfig data_size_finetune_prune();
// data_size_finetune without distillation, for the dense teacher.
TrainRunConfig data_size_teacher();
// Any of the above by function name; ConfigError when unknown.
TrainRunConfig by_name(std::string_view name);
}  // namespace recipes

// ---- runs ------------------------------------------------------------------

struct RunLogRecord {
  long step = 0;
  double lr = 0;
  double loss = 0;
  double sparsity = 0;
  friend bool operator==(const RunLogRecord&, const RunLogRecord&) = default;
};

struct RunLog {
  std::vector<RunLogRecord> records;
  std::string to_jsonl() const;
  void append_jsonl(const std::string& path) const;
};

// Encoder-wide pruned fraction according to the masks.
double mask_sparsity(const MaskSet& masks);

struct RunResult {
  Checkpoint checkpoint;
  RunLog log;
  // (step, encoder sparsity) after each prune event.
  std::vector<std::pair<long, double>> sparsity_trace;
  long steps = 0;
  long steps_per_epoch = 0;
};

// MLM pretraining over tokenized documents ([CLS] ... [SEP]). Masks carried
// by `init` are enforced throughout; prune regimes extend them with GMP.
// A KD config needs a teacher, whose MLM logits on the same corrupted batch
// serve as soft targets.
// Called after every optimizer step (masks already enforced) with the
// zero-based step index and the live checkpoint. Read-only by contract.
using StepObserver = std::function<void(long step, const Checkpoint& checkpoint)>;

RunResult pretrain_run(std::span<const std::vector<int>> corpus, const TrainRunConfig& config, const Checkpoint& init,
                       const Checkpoint* teacher = nullptr, const StepObserver& observer = {});

// Mean MLM loss on `corpus` with corruption drawn from `seed` (no dropout).
double mlm_eval_loss(const Checkpoint& checkpoint, std::span<const std::vector<int>> corpus, int seq_len,
                     std::uint64_t seed, double mask_prob = 0.15);

// Head kind and label count a dataset needs.
std::pair<HeadKind, int> task_head(const TaskDataset& dataset);

struct FinetuneResult {
  RunResult run;
  double metric = 0;  // on the report split, 0-1 scale
};

// Fine-tunes `init` on the training split and scores the report split. An
// MLM-headed init gets a fresh task head; a task head of the wrong kind or
// size is a ConfigError, as is a teacher whose head does not fit.
FinetuneResult finetune_run(const TaskDataset& dataset, const Vocab& vocab, const TrainRunConfig& config,
                            const Checkpoint& init, const Checkpoint* teacher = nullptr,
                            const StepObserver& observer = {});

TaskPredictions predict(const Checkpoint& checkpoint, const TaskDataset& dataset, const Vocab& vocab,
                        const std::vector<TaskExample>& examples, int seq_len);

struct SeedReport {
  std::vector<std::uint64_t> seeds;
  std::vector<double> values;
  double mean = 0;
  double stddev = 0;  // sample standard deviation
};

SeedReport summarize_seeds(std::vector<std::uint64_t> seeds, std::vector<double> values);

// Runs finetune_run once per seed.
SeedReport finetune_seeds(const TaskDataset& dataset, const Vocab& vocab, const TrainRunConfig& config,
                          const Checkpoint& init, std::span<const std::uint64_t> seeds,
                          const Checkpoint* teacher = nullptr);

// Seeds per task: 10 below `threshold` training examples, 5 otherwise.
int default_seed_count(std::size_t train_size, std::size_t threshold = 5000);

}  // namespace sparsify

#endif  // SPARSIFY_TRAINING_HPP_

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

#include "sparsify/experiments.hpp"

#include <algorithm>
#include <memory>
#include <sstream>

#include "json_util.hpp"
#include "sparsify/error.hpp"

namespace sparsify {

namespace {

using json_util::read_key;
using json_util::reject_unknown;
using nlohmann::json;

std::string join_lineage(const std::vector<std::string>& provenance) {
  std::string out;
  for (const auto& p : provenance) out += (out.empty() ? "" : ">") + p;
  return out;
}

void say(const Progress& p, const std::string& msg) {
  if (p) p(msg);
}

ReportRow make_row(const std::string& model, const Checkpoint& trained, const std::string& task,
                   const TaskDataset& ds, double fraction, std::uint64_t seed, double metric) {
  ReportRow row;
  row.model = model;
  row.lineage = join_lineage(trained.provenance);
  row.stage = pruning_stage(trained.provenance);
  row.domain_pretrained = domain_pretrained(trained.provenance);
  row.task = task;
  row.fraction = fraction;
  row.seed = seed;
  row.metric = metric_kind_name(ds.metric);
  row.value = 100.0 * metric;
  return row;
}

std::unique_ptr<PretrainedSet> own_or_borrow(PretrainedSet*& pretrained, const PretrainSpec& spec,
                                             const Progress& progress) {
  std::unique_ptr<PretrainedSet> owned;
  if (!pretrained) {
    owned = std::make_unique<PretrainedSet>(spec, progress);
    pretrained = owned.get();
  } else if (!(pretrained->spec() == spec)) {
    throw ConfigError("shared pretrained models were built from a different pretraining spec");
  }
  return owned;
}

}  // namespace

// ---- pretrained models ---------------------------------------------------------

PretrainSpec::PretrainSpec() {
  domain_dense = recipes::pretrain_dense();
  domain_dense.domain_transfer = true;
  domain_prune = recipes::pretrain_prune();
  domain_prune.domain_transfer = true;
}

void PretrainSpec::validate() const {
  data.validate();
  if (vocab_cap < kNumReservedIds + 1) throw ConfigError("vocab_cap too small");
  for (const auto* c : {&general_dense, &general_prune, &domain_dense, &domain_prune}) {
    c->validate();
    if (!is_pretrain(c->regime)) throw ConfigError("pretraining spec holds a fine-tuning regime");
    if (c->seq_len > model.max_seq_len) throw ConfigError("pretraining seq_len exceeds the model's max_seq_len");
  }
  if (general_dense.regime != Regime::kPretrainDense || domain_dense.regime != Regime::kPretrainDense) {
    throw ConfigError("general_dense and domain_dense must use the pretrain_dense regime");
  }
  if (general_prune.regime != Regime::kPretrainPrune || domain_prune.regime != Regime::kPretrainPrune) {
    throw ConfigError("general_prune and domain_prune must use the pretrain_prune regime");
  }
  if (general_dense.domain_transfer || general_prune.domain_transfer) {
    throw ConfigError("general pretraining runs cannot set domain_transfer");
  }
  if (!domain_dense.domain_transfer || !domain_prune.domain_transfer) {
    throw ConfigError("domain pretraining runs must set domain_transfer");
  }
  if (general_dense.kd || domain_dense.kd) throw ConfigError("dense pretraining has no teacher; drop kd");
  if (sparse_domain_kd) sparse_domain_kd->validate();
}

PretrainedSet::PretrainedSet(PretrainSpec spec, Progress progress)
    : spec_(std::move(spec)), progress_(std::move(progress)) {
  spec_.validate();
  domains_ = generate_synthetic_domains(spec_.data);
  vocab_ = Vocab::build(domains_.vocab_documents(), spec_.vocab_cap);
  model_ = spec_.model;
  model_.vocab_size = vocab_.size();
  model_.head_kind = HeadKind::kMlm;
  model_.num_labels = 0;
  model_.seed = spec_.seed;
  model_.validate();
  for (const auto& d : domains_.general_corpus) general_.push_back(tokenize(d, vocab_, model_.max_seq_len));
  for (const auto& d : domains_.domain_corpus) domain_.push_back(tokenize(d, vocab_, model_.max_seq_len));
}

void PretrainedSet::put(const std::string& name, Checkpoint checkpoint) {
  if (std::find_if(std::begin(kPretrainedNames), std::end(kPretrainedNames),
                   [&](const char* n) { return name == n; }) == std::end(kPretrainedNames)) {
    throw ConfigError("unknown pretrained model '" + name + "'");
  }
  if (checkpoint.config.vocab_size != vocab_.size()) throw ConfigError(name + ": vocabulary size differs");
  if (checkpoint.config.hidden_dim != model_.hidden_dim || checkpoint.config.num_layers != model_.num_layers) {
    throw ConfigError(name + ": architecture differs from the pretraining spec");
  }
  models_.insert_or_assign(name, std::move(checkpoint));
}

const RunResult* PretrainedSet::run(const std::string& name) const {
  auto it = runs_.find(name);
  return it == runs_.end() ? nullptr : &it->second;
}

const Checkpoint& PretrainedSet::get(const std::string& name) {
  if (auto it = models_.find(name); it != models_.end()) return it->second;
  const auto seeded = [&](TrainRunConfig c) {
    c.seed = spec_.seed;
    return c;
  };
  const auto train = [&](const std::vector<std::vector<int>>& corpus, const TrainRunConfig& cfg,
                         const Checkpoint& init, const Checkpoint* teacher) -> const Checkpoint& {
    say(progress_, "pretraining " + name);
    RunResult r = pretrain_run(corpus, seeded(cfg), init, teacher);
    const Checkpoint& ck = models_.insert_or_assign(name, r.checkpoint).first->second;
    runs_.insert_or_assign(name, std::move(r));
    return ck;
  };
  if (name == "general_dense") {
    return train(general_, spec_.general_dense, Checkpoint::fresh(model_), nullptr);
  }
  if (name == "general_pruned") {
    const Checkpoint& dense = get("general_dense");
    return train(general_, spec_.general_prune, dense, spec_.general_prune.kd ? &dense : nullptr);
  }
  if (name == "domain_dense") return train(domain_, spec_.domain_dense, get("general_dense"), nullptr);
  if (name == "general_pruned_domain") {
    const Checkpoint& sparse = get("general_pruned");
    const Checkpoint& teacher = get("domain_dense");
    TrainRunConfig cfg = spec_.domain_dense;
    cfg.kd = spec_.sparse_domain_kd;
    return train(domain_, cfg, sparse, cfg.kd ? &teacher : nullptr);
  }
  if (name == "domain_pruned") {
    const Checkpoint& dense = get("domain_dense");
    return train(domain_, spec_.domain_prune, dense, spec_.domain_prune.kd ? &dense : nullptr);
  }
  throw ConfigError("unknown pretrained model '" + name + "'");
}

const TaskDataset& task_by_name(const SyntheticDomains& d, const std::string& name) {
  if (name == "er") return d.er;
  if (name == "re") return d.re;
  if (name == "qa") return d.qa;
  if (name == "span_qa") return d.span_qa;
  throw ConfigError("unknown synthetic task '" + name + "' (expected er, re, qa or span_qa)");
}

// ---- pruning stage ---------------------------------------------------------------

std::vector<StageCell> stage_cells() {
  return {
      {"dense", "general_dense", false},
      {"dense_domain", "domain_dense", false},
      {"general_pruned", "general_pruned", false},
      {"general_pruned_domain", "general_pruned_domain", false},
      {"domain_pruned", "domain_pruned", false},
      {"finetune_pruned", "general_dense", true},
      {"finetune_pruned_domain", "domain_dense", true},
  };
}

void StageExperimentSpec::validate() const {
  pretrain.validate();
  finetune.validate();
  finetune_prune.validate();
  if (finetune.regime != Regime::kFinetune) throw ConfigError("finetune must use the finetune regime");
  if (finetune_prune.regime != Regime::kFinetunePrune) {
    throw ConfigError("finetune_prune must use the finetune_prune regime");
  }
  if (tasks.empty()) throw ConfigError("stage experiment needs at least one task");
  for (const auto& t : tasks) {
    if (t != "er" && t != "re" && t != "qa" && t != "span_qa") throw ConfigError("unknown task '" + t + "'");
  }
  if (seeds < 0) throw ConfigError("seeds must be nonnegative");
  const auto all = stage_cells();
  for (const auto& c : cells) {
    if (std::none_of(all.begin(), all.end(), [&](const StageCell& s) { return s.name == c; })) {
      throw ConfigError("unknown stage cell '" + c + "'");
    }
  }
}

ExperimentReport experiment_pruning_stage(const StageExperimentSpec& spec, PretrainedSet* pretrained,
                                          const Progress& progress) {
  spec.validate();
  auto owned = own_or_borrow(pretrained, spec.pretrain, progress);
  ExperimentReport report;
  report.name = "pruning_stage";
  for (const auto& cell : stage_cells()) {
    if (!spec.cells.empty() && std::find(spec.cells.begin(), spec.cells.end(), cell.name) == spec.cells.end()) {
      continue;
    }
    const Checkpoint& init = pretrained->get(cell.init);
    for (const auto& task : spec.tasks) {
      const TaskDataset& ds = task_by_name(pretrained->domains(), task);
      const int n = spec.seeds > 0 ? spec.seeds : default_seed_count(ds.train.size());
      for (int i = 0; i < n; ++i) {
        TrainRunConfig cfg = cell.prune_in_finetuning ? spec.finetune_prune : spec.finetune;
        cfg.seed = spec.first_seed + static_cast<std::uint64_t>(i);
        const FinetuneResult r = finetune_run(ds, pretrained->vocab(), cfg, init);
        report.add(make_row(cell.name, r.run.checkpoint, task, ds, 1.0, cfg.seed, r.metric));
        std::ostringstream msg;
        msg << cell.name << " " << task << " seed " << cfg.seed << ": " << 100.0 * r.metric;
        say(progress, msg.str());
      }
    }
  }
  report.check_consistency();
  return report;
}

// ---- data size ------------------------------------------------------------------

void DataSizeExperimentSpec::validate() const {
  pretrain.validate();
  teacher.validate();
  finetune.validate();
  finetune_prune.validate();
  if (teacher.regime != Regime::kFinetune || teacher.kd) {
    throw ConfigError("teacher must be plain dense fine-tuning without kd");
  }
  if (finetune.regime != Regime::kFinetune) throw ConfigError("finetune must use the finetune regime");
  if (finetune_prune.regime != Regime::kFinetunePrune) {
    throw ConfigError("finetune_prune must use the finetune_prune regime");
  }
  if (fractions.empty()) throw ConfigError("data size experiment needs at least one fraction");
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("fractions must lie in (0, 1]");
  }
  if (seeds < 1) throw ConfigError("seeds must be positive");
  if (task != "er" && task != "re" && task != "qa" && task != "span_qa") {
    throw ConfigError("unknown task '" + task + "'");
  }
}

ExperimentReport experiment_data_size(const DataSizeExperimentSpec& spec, PretrainedSet* pretrained,
                                      const Progress& progress) {
  spec.validate();
  auto owned = own_or_borrow(pretrained, spec.pretrain, progress);
  TaskDataset ds = task_by_name(pretrained->domains(), spec.task);
  if (spec.evaluate_on_dev) {
    if (ds.dev.empty()) throw ConfigError(spec.task + " has no dev split to evaluate on");
    ds.test = ds.dev;
  }
  const Checkpoint& dense = pretrained->get("general_dense");
  const Checkpoint& sparse = pretrained->get("general_pruned");

  say(progress, "fine-tuning the dense teacher on the full training split");
  TrainRunConfig tcfg = spec.teacher;
  tcfg.seed = spec.pretrain.seed;
  const FinetuneResult teacher = finetune_run(ds, pretrained->vocab(), tcfg, dense);
  {
    std::ostringstream msg;
    msg << "teacher " << spec.task << ": " << 100.0 * teacher.metric;
    say(progress, msg.str());
  }
  const Checkpoint* t = spec.finetune.kd || spec.finetune_prune.kd ? &teacher.run.checkpoint : nullptr;

  ExperimentReport report;
  report.name = "data_size";
  for (double fraction : spec.fractions) {
    for (int i = 0; i < spec.seeds; ++i) {
      const std::uint64_t seed = spec.first_seed + static_cast<std::uint64_t>(i);
      const TaskDataset sub = subsample_train(ds, fraction, seed);
      for (const char* model : kDataSizeModels) {
        const std::string m = model;
        TrainRunConfig cfg = m == "finetune_pruned" ? spec.finetune_prune : spec.finetune;
        cfg.seed = seed;
        const Checkpoint& init = m == "pretrain_pruned" ? sparse : dense;
        const FinetuneResult r = finetune_run(sub, pretrained->vocab(), cfg, init, cfg.kd ? t : nullptr);
        report.add(make_row(m, r.run.checkpoint, spec.task, ds, fraction, seed, r.metric));
        std::ostringstream msg;
        msg << m << " fraction " << fraction << " (" << sub.train.size() << " examples) seed " << seed << ": "
            << 100.0 * r.metric;
        say(progress, msg.str());
      }
    }
  }
  report.check_consistency();
  return report;
}

// ---- config files ------------------------------------------------------------------

json to_json(const ModelConfig& c) {
  return {{"hidden_dim", c.hidden_dim},     {"num_layers", c.num_layers}, {"num_heads", c.num_heads},
          {"ffn_dim", c.ffn_dim},           {"max_seq_len", c.max_seq_len}, {"dropout", c.dropout},
          {"layer_norm_eps", c.layer_norm_eps}};
}

ModelConfig model_config_from_json(const json& j, const std::string& where) {
  reject_unknown(j, {"hidden_dim", "num_layers", "num_heads", "ffn_dim", "max_seq_len", "dropout", "layer_norm_eps"},
                 where);
  ModelConfig c;
  read_key(j, "hidden_dim", c.hidden_dim, where);
  read_key(j, "num_layers", c.num_layers, where);
  read_key(j, "num_heads", c.num_heads, where);
  read_key(j, "ffn_dim", c.ffn_dim, where);
  read_key(j, "max_seq_len", c.max_seq_len, where);
  read_key(j, "dropout", c.dropout, where);
  read_key(j, "layer_norm_eps", c.layer_norm_eps, where);
  return c;
}

namespace {

json split_json(const SplitSizes& s) { return {{"train", s.train}, {"dev", s.dev}, {"test", s.test}}; }

void read_split(const json& j, const char* key, SplitSizes& out, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  const std::string w = where + "." + key;
  reject_unknown(*it, {"train", "dev", "test"}, w);
  read_key(*it, "train", out.train, w);
  read_key(*it, "dev", out.dev, w);
  read_key(*it, "test", out.test, w);
}

void read_run(const json& j, const char* key, TrainRunConfig& out, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  // Keys absent from the object keep the preset's value.
  out = merge_train_config(out, *it, where + "." + key);
}

}  // namespace

json to_json(const SyntheticDomainSpec& s) {
  return {{"shared_vocab_fraction", s.shared_vocab_fraction},
          {"domain_token_count", s.domain_token_count},
          {"general_class_size", s.general_class_size},
          {"seed", s.seed},
          {"general_corpus_tokens", s.general_corpus_tokens},
          {"domain_corpus_tokens", s.domain_corpus_tokens},
          {"general_domain_rate", s.general_domain_rate},
          {"multiword_rate", s.multiword_rate},
          {"er", split_json(s.er)},
          {"re", split_json(s.re)},
          {"qa", split_json(s.qa)},
          {"span_qa", split_json(s.span_qa)}};
}

SyntheticDomainSpec synthetic_spec_from_json(const json& j, const std::string& where) {
  reject_unknown(j,
                 {"shared_vocab_fraction", "domain_token_count", "general_class_size", "seed",
                  "general_corpus_tokens", "domain_corpus_tokens", "general_domain_rate", "multiword_rate", "er",
                  "re", "qa", "span_qa"},
                 where);
  SyntheticDomainSpec s;
  read_key(j, "shared_vocab_fraction", s.shared_vocab_fraction, where);
  read_key(j, "domain_token_count", s.domain_token_count, where);
  read_key(j, "general_class_size", s.general_class_size, where);
  read_key(j, "seed", s.seed, where);
  read_key(j, "general_corpus_tokens", s.general_corpus_tokens, where);
  read_key(j, "domain_corpus_tokens", s.domain_corpus_tokens, where);
  read_key(j, "general_domain_rate", s.general_domain_rate, where);
  read_key(j, "multiword_rate", s.multiword_rate, where);
  read_split(j, "er", s.er, where);
  read_split(j, "re", s.re, where);
  read_split(j, "qa", s.qa, where);
  read_split(j, "span_qa", s.span_qa, where);
  s.validate();
  return s;
}

json to_json(const PretrainSpec& s) {
  return {{"data", to_json(s.data)},
          {"model", to_json(s.model)},
          {"vocab_cap", s.vocab_cap},
          {"seed", s.seed},
          {"general_dense", to_json(s.general_dense)},
          {"general_prune", to_json(s.general_prune)},
          {"domain_dense", to_json(s.domain_dense)},
          {"domain_prune", to_json(s.domain_prune)},
          {"sparse_domain_kd", s.sparse_domain_kd ? json{{"hardness", s.sparse_domain_kd->hardness},
                                                         {"temperature", s.sparse_domain_kd->temperature}}
                                                  : json(nullptr)}};
}

PretrainSpec pretrain_spec_from_json(const json& j, const std::string& where) {
  reject_unknown(j,
                 {"data", "model", "vocab_cap", "seed", "general_dense", "general_prune", "domain_dense",
                  "domain_prune", "sparse_domain_kd"},
                 where);
  PretrainSpec s;
  if (auto it = j.find("data"); it != j.end()) s.data = synthetic_spec_from_json(*it, where + ".data");
  if (auto it = j.find("model"); it != j.end()) s.model = model_config_from_json(*it, where + ".model");
  read_key(j, "vocab_cap", s.vocab_cap, where);
  read_key(j, "seed", s.seed, where);
  read_run(j, "general_dense", s.general_dense, where);
  read_run(j, "general_prune", s.general_prune, where);
  read_run(j, "domain_dense", s.domain_dense, where);
  read_run(j, "domain_prune", s.domain_prune, where);
  if (auto it = j.find("sparse_domain_kd"); it != j.end()) {
    if (it->is_null()) {
      s.sparse_domain_kd.reset();
    } else {
      const std::string w = where + ".sparse_domain_kd";
      reject_unknown(*it, {"hardness", "temperature"}, w);
      KdConfig kd;
      read_key(*it, "hardness", kd.hardness, w);
      read_key(*it, "temperature", kd.temperature, w);
      s.sparse_domain_kd = kd;
    }
  }
  s.validate();
  return s;
}

json to_json(const StageExperimentSpec& s) {
  return {{"experiment", "pruning_stage"},
          {"pretrain", to_json(s.pretrain)},
          {"finetune", to_json(s.finetune)},
          {"finetune_prune", to_json(s.finetune_prune)},
          {"tasks", s.tasks},
          {"seeds", s.seeds},
          {"first_seed", s.first_seed},
          {"cells", s.cells}};
}

StageExperimentSpec stage_spec_from_json(const json& j, const std::string& where) {
  reject_unknown(j, {"experiment", "pretrain", "finetune", "finetune_prune", "tasks", "seeds", "first_seed", "cells"},
                 where);
  if (auto it = j.find("experiment"); it != j.end() && *it != "pruning_stage") {
    throw ConfigError("key 'experiment' in " + where + " must be \"pruning_stage\"");
  }
  StageExperimentSpec s;
  if (auto it = j.find("pretrain"); it != j.end()) s.pretrain = pretrain_spec_from_json(*it, where + ".pretrain");
  read_run(j, "finetune", s.finetune, where);
  read_run(j, "finetune_prune", s.finetune_prune, where);
  read_key(j, "tasks", s.tasks, where);
  read_key(j, "seeds", s.seeds, where);
  read_key(j, "first_seed", s.first_seed, where);
  read_key(j, "cells", s.cells, where);
  s.validate();
  return s;
}

json to_json(const DataSizeExperimentSpec& s) {
  return {{"experiment", "data_size"},
          {"pretrain", to_json(s.pretrain)},
          {"teacher", to_json(s.teacher)},
          {"finetune", to_json(s.finetune)},
          {"finetune_prune", to_json(s.finetune_prune)},
          {"fractions", s.fractions},
          {"seeds", s.seeds},
          {"first_seed", s.first_seed},
          {"task", s.task},
          {"evaluate_on_dev", s.evaluate_on_dev}};
}

DataSizeExperimentSpec data_size_spec_from_json(const json& j, const std::string& where) {
  reject_unknown(j,
                 {"experiment", "pretrain", "teacher", "finetune", "finetune_prune", "fractions", "seeds",
                  "first_seed", "task", "evaluate_on_dev"},
                 where);
  if (auto it = j.find("experiment"); it != j.end() && *it != "data_size") {
    throw ConfigError("key 'experiment' in " + where + " must be \"data_size\"");
  }
  DataSizeExperimentSpec s;
  if (auto it = j.find("pretrain"); it != j.end()) s.pretrain = pretrain_spec_from_json(*it, where + ".pretrain");
  read_run(j, "teacher", s.teacher, where);
  read_run(j, "finetune", s.finetune, where);
  read_run(j, "finetune_prune", s.finetune_prune, where);
  read_key(j, "fractions", s.fractions, where);
  read_key(j, "seeds", s.seeds, where);
  read_key(j, "first_seed", s.first_seed, where);
  read_key(j, "task", s.task, where);
  read_key(j, "evaluate_on_dev", s.evaluate_on_dev, where);
  s.validate();
  return s;
}

}  // namespace sparsify

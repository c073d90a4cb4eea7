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

#include "sparsify/cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "json_util.hpp"
#include "sparsify/error.hpp"
#include "sparsify/experiments.hpp"
#include "sparsify/sparse.hpp"

namespace sparsify {
namespace {

namespace fs = std::filesystem;
using json_util::read_key;
using json_util::reject_unknown;
using nlohmann::json;

// Masking stream for held-out MLM evaluation.
constexpr std::uint64_t kHeldoutSeed = 404;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
}

json config_or_empty(const std::string& path) { return path.empty() ? json::object() : read_json_file(path); }

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << content;
  if (!out) throw InputError("failed writing " + path.string());
}

fs::path prepare_out(const std::string& dir) {
  fs::create_directories(dir);
  return fs::path(dir);
}

// Checkpoints carry no vocabulary; it sits next to them as vocab.txt.
std::string sibling_vocab(const std::string& ckpt) { return (fs::path(ckpt).parent_path() / "vocab.txt").string(); }

Vocab load_vocab_for(const std::string& flag, const std::string& ckpt) {
  const std::string path = flag.empty() ? sibling_vocab(ckpt) : flag;
  if (!fs::exists(path)) throw InputError("no vocabulary at " + path + " (pass --vocab)");
  return Vocab::load(path);
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : ">") + s;
  return out;
}

TaskDataset resolve_task(const std::string& task, const SyntheticDomainSpec& data) {
  const std::string prefix = "synthetic:";
  if (task.rfind(prefix, 0) == 0) {
    const SyntheticDomains d = generate_synthetic_domains(data);
    return task_by_name(d, task.substr(prefix.size()));
  }
  return load_task(task);
}

Progress stderr_progress(std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  return [&err, t0](const std::string& msg) {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    err << "[" << static_cast<long>(s) << "s] " << msg << std::endl;
  };
}

// Pretrained models are cached per spec: the directory holds the spec it was
// built from and refuses to serve a different one.
void load_cache(PretrainedSet& set, const std::string& dir, Progress progress) {
  if (dir.empty()) return;
  fs::create_directories(dir);
  const fs::path spec_file = fs::path(dir) / "pretrain_spec.json";
  const json spec = to_json(set.spec());
  if (fs::exists(spec_file)) {
    if (read_json_file(spec_file.string()) != spec) {
      throw ConfigError("cache " + dir + " was built from a different pretraining spec");
    }
  } else {
    write_file(spec_file, spec.dump(2) + "\n");
  }
  for (const char* name : kPretrainedNames) {
    const fs::path p = fs::path(dir) / (std::string(name) + ".ckpt");
    if (!fs::exists(p)) continue;
    set.put(name, Checkpoint::load(p.string()));
    if (progress) progress("loaded cached " + std::string(name));
  }
}

void save_cache(PretrainedSet& set, const std::string& dir) {
  if (dir.empty()) return;
  for (const char* name : kPretrainedNames) {
    const fs::path p = fs::path(dir) / (std::string(name) + ".ckpt");
    if (set.has(name) && !fs::exists(p)) set.get(name).save(p.string());
  }
  set.vocab().save((fs::path(dir) / "vocab.txt").string());
}

// ---- subcommands --------------------------------------------------------------

int cmd_generate(const std::string& config, const std::string& out_dir, int vocab_cap, std::ostream& out) {
  const json j = config_or_empty(config);
  const SyntheticDomainSpec spec = synthetic_spec_from_json(j, "config");
  const fs::path dir = prepare_out(out_dir);
  const SyntheticDomains d = generate_synthetic_domains(spec);
  write_corpus((dir / "general.txt").string(), d.general_corpus);
  write_corpus((dir / "domain.txt").string(), d.domain_corpus);
  for (const char* task : {"er", "re", "qa", "span_qa"}) write_task((dir / task).string(), task_by_name(d, task));
  Vocab::build(d.vocab_documents(), vocab_cap).save((dir / "vocab.txt").string());
  write_file(dir / "spec.json", to_json(spec).dump(2) + "\n");
  out << json{{"general_documents", d.general_corpus.size()},
              {"domain_documents", d.domain_corpus.size()},
              {"unigram_kl", unigram_kl(d.domain_corpus, d.general_corpus)}}
             .dump()
      << "\n";
  return kExitOk;
}

int cmd_pretrain(const std::string& config, const std::string& out_dir, const std::string& init_path,
                 const std::string& teacher_path, std::ostream& out, std::ostream& err) {
  const PretrainJob job = pretrain_job_from_json(read_json_file(config));
  const fs::path dir = prepare_out(out_dir);
  const Progress progress = stderr_progress(err);

  std::vector<std::string> documents, vocab_docs;
  if (job.corpus == "general" || job.corpus == "domain") {
    SyntheticDomains d = generate_synthetic_domains(job.data);
    vocab_docs = d.vocab_documents();
    documents = job.corpus == "general" ? std::move(d.general_corpus) : std::move(d.domain_corpus);
  } else {
    documents = load_corpus(job.corpus);
    vocab_docs = documents;
  }
  Vocab vocab;
  if (!job.vocab.empty()) {
    vocab = Vocab::load(job.vocab);
  } else if (!init_path.empty() && fs::exists(sibling_vocab(init_path))) {
    vocab = Vocab::load(sibling_vocab(init_path));
  } else {
    vocab = Vocab::build(vocab_docs, job.vocab_cap);
  }

  Checkpoint init;
  if (init_path.empty()) {
    ModelConfig m = job.model;
    m.vocab_size = vocab.size();
    m.head_kind = HeadKind::kMlm;
    m.num_labels = 0;
    m.seed = job.seed;
    init = Checkpoint::fresh(m);
  } else {
    init = Checkpoint::load(init_path);
    if (init.config.vocab_size != vocab.size()) throw ConfigError("vocabulary does not match --init");
  }

  std::vector<std::vector<int>> corpus;
  for (const auto& doc : documents) corpus.push_back(tokenize(doc, vocab, init.config.max_seq_len));
  const auto held_n = static_cast<std::size_t>(std::ceil(job.heldout_fraction * static_cast<double>(corpus.size())));
  if (held_n >= corpus.size()) throw ConfigError("heldout_fraction leaves no training documents");
  const std::vector<std::vector<int>> held(corpus.end() - static_cast<long>(held_n), corpus.end());
  corpus.resize(corpus.size() - held_n);

  std::optional<Checkpoint> teacher;
  if (!teacher_path.empty()) teacher = Checkpoint::load(teacher_path);

  json summary;
  Checkpoint current = init;
  const auto run = [&](const TrainRunConfig& cfg, const char* tag, const Checkpoint* t) {
    progress(std::string("running ") + tag + " (" + regime_name(cfg.regime) + ")");
    RunResult r = pretrain_run(corpus, cfg, current, t);
    write_file(dir / (std::string(tag) + ".log.jsonl"), r.log.to_jsonl());
    json trace = json::array();
    for (const auto& [step, s] : r.sparsity_trace) trace.push_back({step, s});
    summary[tag] = {{"steps", r.steps}, {"steps_per_epoch", r.steps_per_epoch}, {"sparsity_trace", trace}};
    if (!held.empty()) {
      summary[tag]["heldout_mlm"] = mlm_eval_loss(r.checkpoint, held, init.config.max_seq_len, kHeldoutSeed);
    }
    current = std::move(r.checkpoint);
  };
  if (!job.dense && !job.prune) throw ConfigError("config needs a 'dense' or a 'prune' run");
  if (job.dense) {
    run(*job.dense, "dense", nullptr);
    if (job.prune) current.save((dir / "dense.ckpt").string());
  }
  if (job.prune) {
    // The model entering pruning is dense; it teaches unless --teacher says otherwise.
    const Checkpoint dense = current;
    const Checkpoint* t = job.prune->kd ? (teacher ? &*teacher : &dense) : nullptr;
    run(*job.prune, "prune", t);
  }

  current.save((dir / "model.ckpt").string());
  vocab.save((dir / "vocab.txt").string());
  const SparsityReport sr = measure_sparsity(current.params, current.masks);
  json components = json::object();
  for (const auto& [path, c] : sr.components) components[path] = c.mask_sparsity;
  summary["provenance"] = current.provenance;
  summary["encoder_sparsity"] = sr.encoder_sparsity;
  summary["component_sparsity"] = components;
  if (!held.empty()) {
    const int seq = init.config.max_seq_len;
    summary["heldout_mlm_before"] = mlm_eval_loss(init, held, seq, kHeldoutSeed);
    summary["heldout_mlm_after"] = mlm_eval_loss(current, held, seq, kHeldoutSeed);
  }
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  out << json{{"checkpoint", (dir / "model.ckpt").string()},
              {"provenance", current.provenance},
              {"encoder_sparsity", sr.encoder_sparsity}}
             .dump()
      << "\n";
  return kExitOk;
}

int cmd_finetune(const std::string& config, const std::string& out_dir, const std::string& init_path,
                 const std::string& vocab_flag, const std::string& teacher_path, std::ostream& out,
                 std::ostream& err) {
  const FinetuneJob job = finetune_job_from_json(read_json_file(config));
  const fs::path dir = prepare_out(out_dir);
  const Progress progress = stderr_progress(err);
  const Checkpoint init = Checkpoint::load(init_path);
  const Vocab vocab = load_vocab_for(vocab_flag, init_path);
  TaskDataset ds = resolve_task(job.task, job.data);
  if (job.split == "dev") {
    if (ds.dev.empty()) throw ConfigError("task has no dev split");
    ds.test = ds.dev;
  }
  std::optional<Checkpoint> teacher;
  if (!teacher_path.empty()) teacher = Checkpoint::load(teacher_path);
  if (job.run.kd && !teacher) throw ConfigError("run.kd needs --teacher");

  std::vector<double> values;
  for (std::uint64_t seed : job.seeds) {
    TrainRunConfig cfg = job.run;
    cfg.seed = seed;
    const TaskDataset sub = job.fraction < 1.0 ? subsample_train(ds, job.fraction, seed) : ds;
    const FinetuneResult r = finetune_run(sub, vocab, cfg, init, teacher ? &*teacher : nullptr);
    const fs::path sd = dir / ("seed_" + std::to_string(seed));
    fs::create_directories(sd);
    r.run.checkpoint.save((sd / "model.ckpt").string());
    vocab.save((sd / "vocab.txt").string());
    write_file(sd / "log.jsonl", r.run.log.to_jsonl());
    values.push_back(r.metric);
    std::ostringstream msg;
    msg << "seed " << seed << ": " << r.metric;
    progress(msg.str());
  }
  const SeedReport rep = summarize_seeds(job.seeds, values);
  const json result = {{"task", ds.name},
                       {"metric", metric_kind_name(ds.metric)},
                       {"split", job.split},
                       {"seeds", rep.seeds},
                       {"values", rep.values},
                       {"mean", rep.mean},
                       {"std", rep.stddev},
                       {"provenance", init.provenance}};
  write_file(dir / "metrics.json", result.dump(2) + "\n");
  out << result.dump() << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& ckpt_path, const std::string& task, const std::string& vocab_flag,
             const std::string& split, const std::string& data_config, std::ostream& out) {
  const Checkpoint ck = Checkpoint::load(ckpt_path);
  const Vocab vocab = load_vocab_for(vocab_flag, ckpt_path);
  const SyntheticDomainSpec data =
      data_config.empty() ? SyntheticDomainSpec{} : synthetic_spec_from_json(read_json_file(data_config), "data");
  const TaskDataset ds = resolve_task(task, data);
  const std::vector<TaskExample>* examples = nullptr;
  std::vector<TaskExample> all;
  if (split == "train") examples = &ds.train;
  if (split == "dev") examples = &ds.dev;
  if (split == "test") examples = &ds.test;
  if (split == "all") {
    for (const auto* s : {&ds.train, &ds.dev, &ds.test}) all.insert(all.end(), s->begin(), s->end());
    examples = &all;
  }
  if (!examples) throw ConfigError("unknown split '" + split + "'");
  if (examples->empty()) throw InputError("split '" + split + "' of " + task + " is empty");
  const auto [kind, labels] = task_head(ds);
  if (ck.config.head_kind != kind || ck.config.num_labels != labels) {
    throw ConfigError("checkpoint head does not match task " + task);
  }
  const TaskPredictions p = predict(ck, ds, vocab, *examples, ck.config.max_seq_len);
  const double value = compute_metric(ds, p, *examples);
  out << json{{"checkpoint", ckpt_path},
              {"task", task},
              {"split", split},
              {"examples", examples->size()},
              {"metric", metric_kind_name(ds.metric)},
              {"value", value},
              {"pruning_stage", pruning_stage(ck.provenance)},
              {"lineage", join(ck.provenance)},
              {"encoder_sparsity", mask_sparsity(ck.masks)}}
             .dump()
      << "\n";
  return kExitOk;
}

int cmd_export(const std::string& ckpt_path, const std::string& out_dir, std::ostream& out) {
  const Checkpoint ck = Checkpoint::load(ckpt_path);
  const fs::path dir = prepare_out(out_dir);
  save_csr(ck, (dir / "weights.gmpc").string());
  const SizeReport r = checkpoint_size_report(ck);
  write_file(dir / "size_report.csv", r.to_csv());
  const json summary = {{"encoder_dense_bytes", r.encoder_dense_bytes},
                        {"encoder_sparse_bytes", r.encoder_sparse_bytes},
                        {"encoder_ratio", r.encoder_ratio()},
                        {"remainder_bytes", r.remainder_bytes},
                        {"total_dense_bytes", r.total_dense_bytes},
                        {"total_sparse_bytes", r.total_sparse_bytes},
                        {"total_ratio", r.total_ratio()},
                        {"checkpoint_file_bytes", fs::file_size(ckpt_path)},
                        {"csr_file_bytes", fs::file_size(dir / "weights.gmpc")}};
  write_file(dir / "size_report.json", summary.dump(2) + "\n");
  out << summary.dump() << "\n";
  return kExitOk;
}

int cmd_bench(const std::string& config, const std::string& out_dir, std::ostream& out) {
  const json j = config_or_empty(config);
  reject_unknown(j, {"dims", "sparsities", "repeats", "batch", "seed"}, "config");
  BenchConfig c;
  read_key(j, "dims", c.dims, "config");
  read_key(j, "sparsities", c.sparsities, "config");
  read_key(j, "repeats", c.repeats, "config");
  read_key(j, "batch", c.batch, "config");
  read_key(j, "seed", c.seed, "config");
  const BenchReport r = benchmark_speedup(c);
  if (!out_dir.empty()) {
    const fs::path dir = prepare_out(out_dir);
    write_file(dir / "bench.csv", r.to_csv());
    write_file(dir / "machine.txt", r.machine + "\n");
  }
  out << "# " << r.machine << ", median of " << r.repeats << ", batch " << r.batch << "\n" << r.to_csv();
  return kExitOk;
}

void write_report(const fs::path& dir, const ExperimentReport& rep, const std::string& table) {
  write_file(dir / "report.csv", rep.to_csv());
  write_file(dir / "report.json", rep.to_json().dump(2) + "\n");
  write_file(dir / "table.csv", table);
}

int cmd_exp_stage(const std::string& config, const std::string& out_dir, const std::string& cache,
                  std::ostream& out, std::ostream& err) {
  const StageExperimentSpec spec = stage_spec_from_json(read_json_file(config));
  const fs::path dir = prepare_out(out_dir);
  const Progress progress = stderr_progress(err);
  PretrainedSet set(spec.pretrain, progress);
  load_cache(set, cache, progress);
  const ExperimentReport rep = experiment_pruning_stage(spec, &set, progress);
  save_cache(set, cache);
  write_file(dir / "config.json", to_json(spec).dump(2) + "\n");
  write_report(dir, rep, stage_table_csv(rep));
  out << stage_table_csv(rep);
  return kExitOk;
}

int cmd_exp_datasize(const std::string& config, const std::string& out_dir, const std::string& cache,
                     std::ostream& out, std::ostream& err) {
  const DataSizeExperimentSpec spec = data_size_spec_from_json(read_json_file(config));
  const fs::path dir = prepare_out(out_dir);
  const Progress progress = stderr_progress(err);
  PretrainedSet set(spec.pretrain, progress);
  load_cache(set, cache, progress);
  const ExperimentReport rep = experiment_data_size(spec, &set, progress);
  save_cache(set, cache);
  write_file(dir / "config.json", to_json(spec).dump(2) + "\n");
  write_report(dir, rep, data_size_table_csv(rep));
  out << data_size_table_csv(rep);
  return kExitOk;
}

// Preset chosen by "preset", else by the override's regime, else `fallback`.
TrainRunConfig read_run_with_preset(const json& j, const char* key, const char* fallback,
                                    const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return recipes::by_name(fallback);
  const std::string w = where + "." + key;
  if (!it->is_object()) throw ConfigError(w + " must be a JSON object");
  json overrides = *it;
  std::string preset = fallback;
  if (auto p = overrides.find("preset"); p != overrides.end()) {
    if (!p->is_string()) throw ConfigError("key 'preset' in " + w + " has the wrong type");
    preset = p->get<std::string>();
    overrides.erase("preset");
  } else if (auto r = overrides.find("regime"); r != overrides.end() && r->is_string()) {
    preset = r->get<std::string>();
  }
  return merge_train_config(recipes::by_name(preset), overrides, w);
}

}  // namespace

PretrainJob pretrain_job_from_json(const json& j, const std::string& where) {
  reject_unknown(j, {"data", "corpus", "vocab", "vocab_cap", "model", "seed", "heldout_fraction", "dense", "prune"},
                 where);
  PretrainJob job;
  if (auto it = j.find("data"); it != j.end()) job.data = synthetic_spec_from_json(*it, where + ".data");
  if (auto it = j.find("model"); it != j.end()) job.model = model_config_from_json(*it, where + ".model");
  read_key(j, "corpus", job.corpus, where);
  read_key(j, "vocab", job.vocab, where);
  read_key(j, "vocab_cap", job.vocab_cap, where);
  read_key(j, "seed", job.seed, where);
  read_key(j, "heldout_fraction", job.heldout_fraction, where);
  if (!(job.heldout_fraction >= 0.0 && job.heldout_fraction < 1.0)) {
    throw ConfigError("heldout_fraction in " + where + " must lie in [0, 1)");
  }
  // Runs inherit the job seed unless they set their own.
  const auto seeded = [&](const char* key, const char* preset) -> std::optional<TrainRunConfig> {
    if (!j.contains(key)) return std::nullopt;
    json o = j.at(key);
    if (o.is_object() && !o.contains("seed")) o["seed"] = job.seed;
    return read_run_with_preset(json{{key, o}}, key, preset, where);
  };
  job.dense = seeded("dense", "pretrain_dense");
  job.prune = seeded("prune", "pretrain_prune");
  for (const auto* r : {&job.dense, &job.prune}) {
    if (*r && !is_pretrain((*r)->regime)) throw ConfigError("pretrain runs in " + where + " need a pretrain regime");
    if (*r && (*r)->seq_len > job.model.max_seq_len) {
      throw ConfigError("seq_len in " + where + " exceeds the model's max_seq_len");
    }
  }
  if (job.dense && job.dense->regime != Regime::kPretrainDense) {
    throw ConfigError("'dense' in " + where + " must use the pretrain_dense regime");
  }
  if (job.prune && job.prune->regime != Regime::kPretrainPrune) {
    throw ConfigError("'prune' in " + where + " must use the pretrain_prune regime");
  }
  return job;
}

FinetuneJob finetune_job_from_json(const json& j, const std::string& where) {
  reject_unknown(j, {"data", "task", "run", "seeds", "fraction", "split"}, where);
  FinetuneJob job;
  if (auto it = j.find("data"); it != j.end()) job.data = synthetic_spec_from_json(*it, where + ".data");
  read_key(j, "task", job.task, where);
  if (job.task.empty()) throw ConfigError("key 'task' in " + where + " is required");
  job.run = read_run_with_preset(j, "run", "finetune", where);
  if (is_pretrain(job.run.regime)) throw ConfigError("run in " + where + " needs a fine-tuning regime");
  read_key(j, "seeds", job.seeds, where);
  if (job.seeds.empty()) throw ConfigError("seeds in " + where + " must not be empty");
  read_key(j, "fraction", job.fraction, where);
  if (!(job.fraction > 0.0 && job.fraction <= 1.0)) throw ConfigError("fraction in " + where + " must lie in (0, 1]");
  read_key(j, "split", job.split, where);
  if (job.split != "test" && job.split != "dev") throw ConfigError("split in " + where + " must be test or dev");
  return job;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gradual magnitude pruning for compact encoders", args.empty() ? "sparsify" : args[0]};
  app.require_subcommand(1);

  std::string config, out_dir, init, teacher, vocab, ckpt, task, split = "test", data, cache;
  int vocab_cap = 4096;

  auto* gen = app.add_subcommand("generate", "Write the synthetic corpora, tasks and vocabulary");
  gen->add_option("--config", config, "Synthetic data spec (JSON)");
  gen->add_option("--out", out_dir, "Output directory")->required();
  gen->add_option("--vocab-cap", vocab_cap, "Vocabulary size cap");

  auto* pre = app.add_subcommand("pretrain", "Masked-LM pretraining, dense then pruned");
  pre->add_option("--config", config, "Pretraining job (JSON)")->required();
  pre->add_option("--out", out_dir, "Output directory")->required();
  pre->add_option("--init", init, "Start from this checkpoint");
  pre->add_option("--teacher", teacher, "Distillation teacher for the pruning run");

  auto* ft = app.add_subcommand("finetune", "Fine-tune on one task over several seeds");
  ft->add_option("--config", config, "Fine-tuning job (JSON)")->required();
  ft->add_option("--out", out_dir, "Output directory")->required();
  ft->add_option("--init", init, "Pretrained checkpoint")->required();
  ft->add_option("--vocab", vocab, "Vocabulary file (default: next to --init)");
  ft->add_option("--teacher", teacher, "Fine-tuned distillation teacher");

  auto* ev = app.add_subcommand("eval", "Score a fine-tuned checkpoint; prints one JSON record");
  ev->add_option("--ckpt", ckpt, "Checkpoint")->required();
  ev->add_option("--task", task, "Task file or directory, or synthetic:<name>")->required();
  ev->add_option("--vocab", vocab, "Vocabulary file (default: next to --ckpt)");
  ev->add_option("--split", split, "train, dev, test or all");
  ev->add_option("--data", data, "Synthetic data spec for synthetic tasks");

  auto* ex = app.add_subcommand("export-sparse", "Write prunable weights as CSR plus a size report");
  ex->add_option("--ckpt", ckpt, "Checkpoint")->required();
  ex->add_option("--out", out_dir, "Output directory")->required();

  auto* be = app.add_subcommand("bench", "Naive dense vs CSR matmul timings");
  be->add_option("--config", config, "Benchmark settings (JSON)");
  be->add_option("--out", out_dir, "Output directory");

  auto* st = app.add_subcommand("exp-stage", "Pruning-stage experiment");
  st->add_option("--config", config, "Experiment spec (JSON)")->required();
  st->add_option("--out", out_dir, "Output directory")->required();
  st->add_option("--cache", cache, "Directory caching the pretrained models");

  auto* ds = app.add_subcommand("exp-datasize", "Data-size experiment");
  ds->add_option("--config", config, "Experiment spec (JSON)")->required();
  ds->add_option("--out", out_dir, "Output directory")->required();
  ds->add_option("--cache", cache, "Directory caching the pretrained models");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_generate(config, out_dir, vocab_cap, out);
    if (pre->parsed()) return cmd_pretrain(config, out_dir, init, teacher, out, err);
    if (ft->parsed()) return cmd_finetune(config, out_dir, init, vocab, teacher, out, err);
    if (ev->parsed()) return cmd_eval(ckpt, task, vocab, split, data, out);
    if (ex->parsed()) return cmd_export(ckpt, out_dir, out);
    if (be->parsed()) return cmd_bench(config, out_dir, out);
    if (st->parsed()) return cmd_exp_stage(config, out_dir, cache, out, err);
    if (ds->parsed()) return cmd_exp_datasize(config, out_dir, cache, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitConfig;
}

}  // namespace sparsify

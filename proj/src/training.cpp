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

#include "sparsify/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "json_util.hpp"
#include "sparsify/autodiff.hpp"
#include "sparsify/error.hpp"

namespace sparsify {
namespace {

using nlohmann::json;
using json_util::read_key;
using json_util::reject_unknown;

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

long ceil_div(long a, long b) { return (a + b - 1) / b; }

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Truncates to max_len ids keeping the trailing [SEP].
std::vector<int> clip_sequence(const std::vector<int>& ids, int max_len) {
  if (static_cast<int>(ids.size()) <= max_len) return ids;
  std::vector<int> out(ids.begin(), ids.begin() + max_len);
  if (ids.back() == kSepId) out.back() = kSepId;
  return out;
}

// Everything the optimization loop needs to know about one batch.
using LossFn = std::function<std::optional<Var>(Graph&, std::span<const std::size_t> batch, const ForwardContext&)>;

struct LoopOutput {
  RunLog log;
  std::vector<std::pair<long, double>> trace;
  long steps = 0;
  long steps_per_epoch = 0;
};

// Shared optimization loop: shuffled epochs, prune events before the step
// they are scheduled on, clipped AdamW, masks enforced after every update.
LoopOutput train_loop(Checkpoint& ck, const TrainRunConfig& cfg, std::size_t n_examples, const LossFn& loss_fn,
                      const StepObserver& observer) {
  const ScopedFlushDenormals ftz;
  LoopOutput out;
  const long spe = std::max(1L, ceil_div(static_cast<long>(n_examples), cfg.batch_size));
  const long total = spe * cfg.epochs;
  out.steps_per_epoch = spe;
  out.steps = total;
  const LrSchedule lr = cfg.lr_schedule(spe);

  std::optional<GmpState> gmp;
  std::vector<long> events;
  std::size_t next_event = 0;
  if (prunes(cfg.regime)) {
    gmp = GmpState{0, ck.masks, cfg.pruning_schedule(spe)};
    events = prune_event_steps(gmp->schedule, spe);
  }
  auto run_events_through = [&](long step) {
    while (gmp && next_event < events.size() && events[next_event] <= step) {
      gmp->step = events[next_event];
      gmp_step(*gmp, ck.params);
      ck.masks = gmp->masks;
      out.trace.emplace_back(events[next_event], mask_sparsity(ck.masks));
      ++next_event;
    }
  };

  enforce_masks(ck.params, ck.masks);
  ck.params.set_requires_grad(true);
  OptimizerState opt;
  opt.config.weight_decay = cfg.weight_decay;
  auto dropout_rng = stream_rng(cfg.seed, 101);
  auto shuffle_rng = stream_rng(cfg.seed, 202);
  std::vector<std::size_t> order(n_examples);

  for (long step = 0; step < total; ++step) {
    const long epoch = step / spe;
    const long within = step % spe;
    if (within == 0) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), shuffle_rng);
    }
    run_events_through(step);

    const auto begin = static_cast<std::size_t>(within * cfg.batch_size);
    const auto end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
    std::span<const std::size_t> batch(order.data() + begin, end - begin);
    (void)epoch;

    ck.params.zero_grad();
    Graph graph;
    const ForwardContext ctx{&ck.masks, true, &dropout_rng};
    const auto loss = loss_fn(graph, batch, ctx);
    const double rate = lr_at(lr, step);
    double loss_value = 0;
    if (loss) {
      loss_value = loss->value()(0, 0);
      if (!std::isfinite(loss_value)) {
        throw DivergenceError("non-finite loss " + std::to_string(loss_value) + " at step " + std::to_string(step) +
                                  " (lr " + std::to_string(rate) + ")",
                              step);
      }
      graph.backward(*loss);
      if (cfg.grad_clip > 0) clip_grad_norm(ck.params, cfg.grad_clip);
      adam_step(ck.params, opt, rate, &ck.masks);
    }
    if (observer) observer(step, ck);
    if (step % cfg.log_every == 0 || step == total - 1) {
      out.log.records.push_back({step, rate, loss_value, mask_sparsity(ck.masks)});
    }
  }
  run_events_through(total);
  ck.params.zero_grad();
  ck.params.set_requires_grad(false);
  for (auto& [path, t] : ck.params.tensors()) t.drop_grad();
  return out;
}

Checkpoint frozen_copy(const Checkpoint& ck) {
  Checkpoint c = ck;
  c.params.set_requires_grad(false);
  return c;
}

// ---- task features ---------------------------------------------------------

struct Encoded {
  std::vector<int> ids;
  std::vector<int> token_labels;  // entity recognition, one per position
  int label = -1;
  int start = -1, end = -1;  // span positions in ids
  int context_offset = 0;
  int context_len = 0;  // context words that survived truncation
};

Encoded encode_example(const TaskDataset& ds, const Vocab& vocab, const TaskExample& ex, int seq_len) {
  Encoded e;
  e.label = ex.label;
  const auto room = static_cast<std::size_t>(std::max(0, seq_len - 2));
  switch (ds.kind) {
    case TaskKind::kEntityRecognition: {
      e.ids.push_back(kClsId);
      e.token_labels.push_back(kIgnoreIndex);
      for (std::size_t i = 0; i < ex.words.size() && i < room; ++i) {
        e.ids.push_back(vocab.id(ex.words[i]));
        e.token_labels.push_back(ds.label_id(ex.tags[i]));
      }
      e.ids.push_back(kSepId);
      e.token_labels.push_back(kIgnoreIndex);
      break;
    }
    case TaskKind::kRelationExtraction: {
      std::vector<int> ids = {kClsId};
      for (const auto& w : ex.words) ids.push_back(vocab.id(w));
      ids.push_back(kSepId);
      if (!ex.words_b.empty()) {
        for (const auto& w : ex.words_b) ids.push_back(vocab.id(w));
        ids.push_back(kSepId);
      }
      e.ids = clip_sequence(ids, seq_len);
      break;
    }
    case TaskKind::kQuestionAnswering: {
      const std::size_t q_len = std::min(ex.question.size(), static_cast<std::size_t>(std::max(0, seq_len / 2 - 2)));
      e.ids.push_back(kClsId);
      for (std::size_t i = 0; i < q_len; ++i) e.ids.push_back(vocab.id(ex.question[i]));
      e.ids.push_back(kSepId);
      e.context_offset = static_cast<int>(e.ids.size());
      const std::size_t ctx_room = static_cast<std::size_t>(std::max(0, seq_len - 1 - e.context_offset));
      for (std::size_t i = 0; i < ex.words.size() && i < ctx_room; ++i) e.ids.push_back(vocab.id(ex.words[i]));
      e.context_len = static_cast<int>(e.ids.size()) - e.context_offset;
      e.ids.push_back(kSepId);
      if (!ex.answers.empty() && ex.answers.front().end < e.context_len) {
        e.start = e.context_offset + ex.answers.front().begin;
        e.end = e.context_offset + ex.answers.front().end;
      }
      break;
    }
  }
  return e;
}

struct TaskLogits {
  Var logits;  // token [B*s x k] or sequence [B x k]
  SpanLogits span;
};

TaskLogits task_forward(Graph& g, const ModelConfig& cfg, ModelParams& params, const Batch& batch,
                        const ForwardContext& ctx) {
  const Var hidden = encode(g, cfg, params, batch, ctx);
  TaskLogits out;
  switch (cfg.head_kind) {
    case HeadKind::kTokenClassification: out.logits = token_logits(g, params, hidden); break;
    case HeadKind::kSequenceClassification: out.logits = sequence_logits(g, params, hidden, batch); break;
    case HeadKind::kSpanQa: out.span = span_logits(g, params, hidden, batch); break;
    case HeadKind::kMlm: throw ContractError("task forward on an MLM head");
  }
  return out;
}

Batch make_batch(const std::vector<Encoded>& enc, std::span<const std::size_t> idx) {
  std::vector<std::vector<int>> seqs;
  seqs.reserve(idx.size());
  for (auto i : idx) seqs.push_back(enc[i].ids);
  return Batch::from_sequences(seqs, kPadId);
}

Var task_loss(const TaskLogits& student, const TaskLogits* teacher, const ModelConfig& cfg,
              const std::vector<Encoded>& enc, std::span<const std::size_t> idx, const Batch& batch,
              const std::optional<KdConfig>& kd) {
  auto loss_for = [&](Var logits, const Matrix* teacher_logits, const std::vector<int>& targets) {
    if (kd && teacher_logits) return distill_loss(logits, *teacher_logits, targets, *kd);
    return cross_entropy(logits, targets);
  };
  switch (cfg.head_kind) {
    case HeadKind::kTokenClassification: {
      std::vector<int> targets(static_cast<std::size_t>(batch.batch_size * batch.seq_len), kIgnoreIndex);
      for (std::size_t b = 0; b < idx.size(); ++b) {
        const auto& labels = enc[idx[b]].token_labels;
        std::copy(labels.begin(), labels.end(), targets.begin() + static_cast<std::ptrdiff_t>(b * batch.seq_len));
      }
      return loss_for(student.logits, teacher ? &teacher->logits.value() : nullptr, targets);
    }
    case HeadKind::kSequenceClassification: {
      std::vector<int> targets;
      for (auto i : idx) targets.push_back(enc[i].label);
      return loss_for(student.logits, teacher ? &teacher->logits.value() : nullptr, targets);
    }
    case HeadKind::kSpanQa: {
      std::vector<int> starts, ends;
      for (auto i : idx) {
        starts.push_back(enc[i].start < 0 ? kIgnoreIndex : enc[i].start);
        ends.push_back(enc[i].end < 0 ? kIgnoreIndex : enc[i].end);
      }
      Var s = loss_for(student.span.start, teacher ? &teacher->span.start.value() : nullptr, starts);
      Var e = loss_for(student.span.end, teacher ? &teacher->span.end.value() : nullptr, ends);
      return scale(s + e, 0.5);
    }
    case HeadKind::kMlm: break;
  }
  throw ContractError("task loss on an MLM head");
}

}  // namespace

// ---- learning rate -----------------------------------------------------------

const char* lr_kind_name(LrKind kind) { return kind == LrKind::kCyclic ? "cyclic" : "linear_decay"; }

LrKind parse_lr_kind(std::string_view name) {
  if (name == "cyclic") return LrKind::kCyclic;
  if (name == "linear_decay") return LrKind::kLinearDecay;
  throw ConfigError("unknown learning-rate kind '" + std::string(name) + "'");
}

void LrSchedule::validate() const {
  if (!(peak_lr > 0)) throw ConfigError("peak_lr must be positive");
  if (total_steps <= 0) throw ConfigError("total_steps must be positive");
  if (!std::is_sorted(cycle_boundaries.begin(), cycle_boundaries.end())) {
    throw ConfigError("cycle boundaries must be sorted");
  }
  for (long b : cycle_boundaries) {
    if (b < 0 || b > total_steps) throw ConfigError("cycle boundary outside [0, total_steps]");
  }
}

double lr_at(const LrSchedule& s, long step) {
  step = std::clamp(step, 0L, s.total_steps);
  long begin = 0, end = s.total_steps;
  if (s.kind == LrKind::kCyclic) {
    for (long b : s.cycle_boundaries) {
      if (b <= step) {
        begin = std::max(begin, b);
      } else {
        end = std::min(end, b);
        break;
      }
    }
  }
  if (end <= begin) return step >= s.total_steps ? 0.0 : s.peak_lr;
  const double t = static_cast<double>(step - begin) / static_cast<double>(end - begin);
  return std::max(0.0, s.peak_lr * (1.0 - t));
}

// ---- optimizer -----------------------------------------------------------------

bool decays(const std::string& path) { return ends_with(path, ".weight"); }

void adam_step(ModelParams& params, OptimizerState& state, double lr, const MaskSet* masks) {
  ++state.step;
  const auto& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (auto& [path, t] : params.tensors()) {
    if (!t.requires_grad() || !t.has_grad()) continue;
    auto w = t.matrix();
    const auto g = t.grad_matrix();
    auto [it, fresh] = state.moments.try_emplace(path);
    Moments& mo = it->second;
    if (fresh) {
      mo.m = Matrix::Zero(w.rows(), w.cols());
      mo.v = Matrix::Zero(w.rows(), w.cols());
    }
    mo.m = c.beta1 * mo.m + (1.0 - c.beta1) * g;
    mo.v = c.beta2 * mo.v + (1.0 - c.beta2) * g.cwiseProduct(g);
    const double wd = decays(path) ? c.weight_decay : 0.0;
    w.array() -= lr * ((mo.m.array() / bc1) / ((mo.v.array() / bc2).sqrt() + c.eps) + wd * w.array());
  }
  if (!masks) return;
  enforce_masks(params, *masks);
  for (const auto& [path, mask] : *masks) {
    auto it = state.moments.find(path);
    if (it == state.moments.end()) continue;
    const Matrix keep = mask.as_matrix();
    it->second.m.array() *= keep.array();
    it->second.v.array() *= keep.array();
  }
}

double clip_grad_norm(ModelParams& params, double max_norm) {
  double sq = 0;
  for (auto& [path, t] : params.tensors()) {
    if (t.has_grad()) sq += t.grad_matrix().squaredNorm();
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0) {
    const double f = max_norm / norm;
    for (auto& [path, t] : params.tensors()) {
      if (t.has_grad()) t.grad_matrix() *= f;
    }
  }
  return norm;
}

// ---- MLM -----------------------------------------------------------------------

MlmBatch mlm_mask_batch(std::span<const std::vector<int>> sequences, double mask_prob, int vocab_size,
                        std::mt19937_64& rng) {
  if (!(mask_prob >= 0.0 && mask_prob < 1.0)) throw ConfigError("mask_prob must lie in [0, 1)");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const bool can_randomize = vocab_size > kNumReservedIds;
  std::uniform_int_distribution<int> random_id(kNumReservedIds, std::max(kNumReservedIds, vocab_size - 1));
  MlmBatch out;
  out.inputs.reserve(sequences.size());
  out.labels.reserve(sequences.size());
  for (const auto& seq : sequences) {
    std::vector<int> input = seq;
    std::vector<int> label(seq.size(), kIgnoreIndex);
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (seq[i] == kPadId || seq[i] == kClsId || seq[i] == kSepId || seq[i] == kMaskId) continue;
      ++out.stats.candidates;
      if (u(rng) >= mask_prob) continue;
      ++out.stats.selected;
      label[i] = seq[i];
      const double r = u(rng);
      if (r < 0.8 || !can_randomize) {
        input[i] = kMaskId;
        ++out.stats.masked;
      } else if (r < 0.9) {
        input[i] = random_id(rng);
        ++out.stats.randomized;
      } else {
        ++out.stats.unchanged;
      }
    }
    out.inputs.push_back(std::move(input));
    out.labels.push_back(std::move(label));
  }
  return out;
}

// ---- configuration -------------------------------------------------------------

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::kPretrainDense: return "pretrain_dense";
    case Regime::kPretrainPrune: return "pretrain_prune";
    case Regime::kFinetune: return "finetune";
    case Regime::kFinetunePrune: return "finetune_prune";
  }
  return "?";
}

Regime parse_regime(std::string_view name) {
  for (Regime r : {Regime::kPretrainDense, Regime::kPretrainPrune, Regime::kFinetune, Regime::kFinetunePrune}) {
    if (name == regime_name(r)) return r;
  }
  throw ConfigError("unknown regime '" + std::string(name) + "'");
}

bool is_pretrain(Regime r) { return r == Regime::kPretrainDense || r == Regime::kPretrainPrune; }
bool prunes(Regime r) { return r == Regime::kPretrainPrune || r == Regime::kFinetunePrune; }

void TrainRunConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be nonnegative");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (seq_len < 4) throw ConfigError("seq_len must be at least 4");
  if (!(lr.peak_lr > 0)) throw ConfigError("peak_lr must be positive");
  if (!std::is_sorted(lr.cycle_epochs.begin(), lr.cycle_epochs.end())) {
    throw ConfigError("cycle_epochs must be sorted");
  }
  for (double e : lr.cycle_epochs) {
    if (e < 0 || e > epochs) throw ConfigError("cycle epoch " + std::to_string(e) + " outside the run");
  }
  if (kd) kd->validate();
  if (prunes(regime) && !pruning) throw ConfigError(std::string(regime_name(regime)) + " needs a pruning schedule");
  if (!prunes(regime) && pruning) {
    throw ConfigError(std::string(regime_name(regime)) + " does not prune; remove the pruning schedule");
  }
  if (pruning) {
    const auto& p = *pruning;
    if (!(p.start_epoch >= 0 && p.start_epoch < p.end_epoch && p.end_epoch <= epochs)) {
      throw ConfigError("pruning window must satisfy 0 <= start_epoch < end_epoch <= epochs");
    }
    PruningSchedule s = pruning_schedule(1000);
    s.validate();
  }
  if (!(mask_prob >= 0.0 && mask_prob < 1.0)) throw ConfigError("mask_prob must lie in [0, 1)");
  if (grad_clip < 0) throw ConfigError("grad_clip must be nonnegative");
  if (weight_decay < 0) throw ConfigError("weight_decay must be nonnegative");
  if (log_every < 1) throw ConfigError("log_every must be positive");
}

LrSchedule TrainRunConfig::lr_schedule(long spe) const {
  LrSchedule s;
  s.kind = lr.kind;
  s.peak_lr = lr.peak_lr;
  s.total_steps = std::max(1L, spe * epochs);
  s.cycle_boundaries.push_back(0);
  for (double e : lr.cycle_epochs) {
    const long b = std::lround(e * static_cast<double>(spe));
    if (b != s.cycle_boundaries.back()) s.cycle_boundaries.push_back(b);
  }
  return s;
}

PruningSchedule TrainRunConfig::pruning_schedule(long spe) const {
  if (!pruning) throw ConfigError("run has no pruning schedule");
  PruningSchedule s;
  s.initial_sparsity = pruning->initial_sparsity;
  s.final_sparsity = pruning->final_sparsity;
  s.prune_start_step = std::lround(pruning->start_epoch * static_cast<double>(spe));
  s.prune_end_step = std::max(s.prune_start_step + 1, std::lround(pruning->end_epoch * static_cast<double>(spe)));
  s.events_per_epoch = pruning->events_per_epoch;
  s.interpolation = pruning->interpolation;
  return s;
}

std::string TrainRunConfig::provenance_entry() const {
  switch (regime) {
    case Regime::kPretrainDense: return domain_transfer ? "domain_pretrain" : "pretrain_dense";
    case Regime::kPretrainPrune: return domain_transfer ? "domain_prune" : "pretrain_prune";
    case Regime::kFinetune: return "finetune";
    case Regime::kFinetunePrune: return "finetune_prune";
  }
  return "?";
}

json to_json(const TrainRunConfig& c) {
  json j = {{"regime", regime_name(c.regime)},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"seq_len", c.seq_len},
            {"seed", c.seed},
            {"lr", {{"kind", lr_kind_name(c.lr.kind)}, {"peak_lr", c.lr.peak_lr}, {"cycle_epochs", c.lr.cycle_epochs}}},
            {"domain_transfer", c.domain_transfer},
            {"mask_prob", c.mask_prob},
            {"grad_clip", c.grad_clip},
            {"weight_decay", c.weight_decay},
            {"log_every", c.log_every}};
  j["kd"] = c.kd ? json{{"hardness", c.kd->hardness}, {"temperature", c.kd->temperature}} : json(nullptr);
  if (c.pruning) {
    const auto& p = *c.pruning;
    j["pruning"] = {{"initial_sparsity", p.initial_sparsity},
                    {"final_sparsity", p.final_sparsity},
                    {"start_epoch", p.start_epoch},
                    {"end_epoch", p.end_epoch},
                    {"events_per_epoch", p.events_per_epoch},
                    {"interpolation", std::string(interpolation_name(p.interpolation))}};
  } else {
    j["pruning"] = nullptr;
  }
  return j;
}

TrainRunConfig train_config_from_json(const json& j, const std::string& where) {
  reject_unknown(j,
                 {"regime", "epochs", "batch_size", "seq_len", "seed", "lr", "kd", "pruning", "domain_transfer",
                  "mask_prob", "grad_clip", "weight_decay", "log_every"},
                 where);
  TrainRunConfig c;
  std::string regime = regime_name(c.regime);
  read_key(j, "regime", regime, where);
  c.regime = parse_regime(regime);
  read_key(j, "epochs", c.epochs, where);
  read_key(j, "batch_size", c.batch_size, where);
  read_key(j, "seq_len", c.seq_len, where);
  read_key(j, "seed", c.seed, where);
  read_key(j, "domain_transfer", c.domain_transfer, where);
  read_key(j, "mask_prob", c.mask_prob, where);
  read_key(j, "grad_clip", c.grad_clip, where);
  read_key(j, "weight_decay", c.weight_decay, where);
  read_key(j, "log_every", c.log_every, where);
  if (auto it = j.find("lr"); it != j.end()) {
    const std::string w = where + ".lr";
    reject_unknown(*it, {"kind", "peak_lr", "cycle_epochs"}, w);
    std::string kind = lr_kind_name(c.lr.kind);
    read_key(*it, "kind", kind, w);
    c.lr.kind = parse_lr_kind(kind);
    read_key(*it, "peak_lr", c.lr.peak_lr, w);
    read_key(*it, "cycle_epochs", c.lr.cycle_epochs, w);
  }
  if (auto it = j.find("kd"); it != j.end() && !it->is_null()) {
    const std::string w = where + ".kd";
    reject_unknown(*it, {"hardness", "temperature"}, w);
    KdConfig kd;
    read_key(*it, "hardness", kd.hardness, w);
    read_key(*it, "temperature", kd.temperature, w);
    c.kd = kd;
  }
  if (auto it = j.find("pruning"); it != j.end() && !it->is_null()) {
    const std::string w = where + ".pruning";
    reject_unknown(*it,
                   {"initial_sparsity", "final_sparsity", "start_epoch", "end_epoch", "events_per_epoch",
                    "interpolation"},
                   w);
    PruningPlan p;
    read_key(*it, "initial_sparsity", p.initial_sparsity, w);
    read_key(*it, "final_sparsity", p.final_sparsity, w);
    read_key(*it, "start_epoch", p.start_epoch, w);
    read_key(*it, "end_epoch", p.end_epoch, w);
    read_key(*it, "events_per_epoch", p.events_per_epoch, w);
    std::string interp = std::string(interpolation_name(p.interpolation));
    read_key(*it, "interpolation", interp, w);
    p.interpolation = parse_interpolation(interp);
    c.pruning = p;
  }
  c.validate();
  return c;
}

TrainRunConfig merge_train_config(const TrainRunConfig& base, const json& overrides, const std::string& where) {
  reject_unknown(overrides,
                 {"regime", "epochs", "batch_size", "seq_len", "seed", "lr", "kd", "pruning", "domain_transfer",
                  "mask_prob", "grad_clip", "weight_decay", "log_every"},
                 where);
  json merged = to_json(base);
  for (const auto& [k, v] : overrides.items()) {
    // Nested objects merge key by key so a partial lr or pruning block works.
    if ((k == "lr" || k == "pruning") && v.is_object() && merged[k].is_object()) {
      for (const auto& [nk, nv] : v.items()) merged[k][nk] = nv;
    } else {
      merged[k] = v;
    }
  }
  return train_config_from_json(merged, where);
}

namespace recipes {

TrainRunConfig pretrain_dense() {
  TrainRunConfig c;
  c.regime = Regime::kPretrainDense;
  c.epochs = 3;
  c.batch_size = 32;
  c.seq_len = 64;
  c.lr = {LrKind::kCyclic, 5e-4, {0.5, 1.0, 1.5, 2.0, 2.5}};
  return c;
}

TrainRunConfig pretrain_prune() {
  TrainRunConfig c = pretrain_dense();
  c.regime = Regime::kPretrainPrune;
  c.kd = KdConfig{0.5, 2.0};
  c.pruning = PruningPlan{0.30, 0.90, 0.0, 2.0, 100, Interpolation::kCubic};
  return c;
}

TrainRunConfig finetune() {
  TrainRunConfig c;
  c.regime = Regime::kFinetune;
  c.epochs = 10;
  c.batch_size = 16;
  c.seq_len = 64;
  c.lr = {LrKind::kLinearDecay, 5e-5, {}};
  return c;
}

TrainRunConfig finetune_prune() {
  TrainRunConfig c = finetune();
  c.regime = Regime::kFinetunePrune;
  c.lr = {LrKind::kCyclic, 5e-5, {2.0, 8.0}};
  c.pruning = PruningPlan{0.30, 0.90, 2.0, 8.0, 100, Interpolation::kCubic};
  return c;
}

TrainRunConfig data_size_finetune() {
  TrainRunConfig c = finetune();
  c.epochs = 30;
  c.batch_size = 12;
  c.kd = KdConfig{0.8, 2.0};
  return c;
}

TrainRunConfig data_size_teacher() {
  TrainRunConfig c = data_size_finetune();
  c.kd.reset();
  return c;
}

TrainRunConfig data_size_finetune_prune() {
  TrainRunConfig c = data_size_finetune();
  c.regime = Regime::kFinetunePrune;
  c.lr = {LrKind::kCyclic, 5e-5, {2.0, 20.0}};
  c.pruning = PruningPlan{0.30, 0.90, 2.0, 20.0, 100, Interpolation::kCubic};
  return c;
}

TrainRunConfig by_name(std::string_view name) {
  if (name == "pretrain_dense") return pretrain_dense();
  if (name == "pretrain_prune") return pretrain_prune();
  if (name == "finetune") return finetune();
  if (name == "finetune_prune") return finetune_prune();
  if (name == "data_size_finetune") return data_size_finetune();
  if (name == "data_size_finetune_prune") return data_size_finetune_prune();
  if (name == "data_size_teacher") return data_size_teacher();
  throw ConfigError("unknown preset '" + std::string(name) + "'");
}

}  // namespace recipes

// ---- logs ------------------------------------------------------------------------

std::string RunLog::to_jsonl() const {
  std::string out;
  for (const auto& r : records) {
    out += json{{"step", r.step}, {"lr", r.lr}, {"loss", r.loss}, {"sparsity", r.sparsity}}.dump();
    out += '\n';
  }
  return out;
}

void RunLog::append_jsonl(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw InputError("cannot write run log " + path);
  out << to_jsonl();
}

double mask_sparsity(const MaskSet& masks) {
  double pruned = 0, size = 0;
  for (const auto& [path, m] : masks) {
    pruned += static_cast<double>(m.pruned_count());
    size += static_cast<double>(m.size());
  }
  return size == 0 ? 0.0 : pruned / size;
}

// ---- pretraining ---------------------------------------------------------------

RunResult pretrain_run(std::span<const std::vector<int>> corpus, const TrainRunConfig& config, const Checkpoint& init,
                       const Checkpoint* teacher, const StepObserver& observer) {
  config.validate();
  if (!is_pretrain(config.regime)) throw ConfigError("pretrain_run needs a pretraining regime");
  if (init.config.head_kind != HeadKind::kMlm) throw ConfigError("pretraining needs an MLM-headed model");
  if (config.seq_len > init.config.max_seq_len) throw ConfigError("seq_len exceeds the model's max_seq_len");
  if (config.kd && !teacher) throw ConfigError("knowledge distillation in pretraining needs a teacher");
  if (teacher && !config.kd) throw ConfigError("a teacher was given but the run has no kd settings");
  if (teacher && (teacher->config.head_kind != HeadKind::kMlm || teacher->config.vocab_size != init.config.vocab_size)) {
    throw ConfigError("teacher must be an MLM model over the same vocabulary");
  }
  init.check_masks();

  RunResult result;
  result.checkpoint = init;
  if (config.epochs == 0) return result;
  if (corpus.empty()) throw InputError("pretraining corpus is empty");

  std::vector<std::vector<int>> docs;
  docs.reserve(corpus.size());
  for (const auto& d : corpus) docs.push_back(clip_sequence(d, config.seq_len));

  Checkpoint& ck = result.checkpoint;
  std::optional<Checkpoint> frozen_teacher;
  if (teacher) frozen_teacher = frozen_copy(*teacher);
  auto mask_rng = stream_rng(config.seed, 303);

  LossFn loss = [&](Graph& g, std::span<const std::size_t> idx, const ForwardContext& ctx) -> std::optional<Var> {
    std::vector<std::vector<int>> seqs;
    seqs.reserve(idx.size());
    for (auto i : idx) seqs.push_back(docs[i]);
    const MlmBatch mlm = mlm_mask_batch(seqs, config.mask_prob, ck.config.vocab_size, mask_rng);
    const Batch batch = Batch::from_sequences(mlm.inputs, kPadId);
    std::vector<Index> rows;
    std::vector<int> targets;
    for (std::size_t b = 0; b < mlm.labels.size(); ++b) {
      for (std::size_t p = 0; p < mlm.labels[b].size(); ++p) {
        if (mlm.labels[b][p] == kIgnoreIndex) continue;
        rows.push_back(static_cast<Index>(b) * batch.seq_len + static_cast<Index>(p));
        targets.push_back(mlm.labels[b][p]);
      }
    }
    if (rows.empty()) return std::nullopt;
    const Var hidden = encode(g, ck.config, ck.params, batch, ctx);
    const Var logits = mlm_logits(g, ck.params, hidden, rows);
    if (!frozen_teacher) return cross_entropy(logits, targets);
    Graph tg;
    const ForwardContext tctx{&frozen_teacher->masks, false, nullptr};
    const Var th = encode(tg, frozen_teacher->config, frozen_teacher->params, batch, tctx);
    const Matrix teacher_logits = mlm_logits(tg, frozen_teacher->params, th, rows).value();
    return distill_loss(logits, teacher_logits, targets, *config.kd);
  };

  LoopOutput lo = train_loop(ck, config, docs.size(), loss, observer);
  result.log = std::move(lo.log);
  result.sparsity_trace = std::move(lo.trace);
  result.steps = lo.steps;
  result.steps_per_epoch = lo.steps_per_epoch;
  ck.provenance.push_back(config.provenance_entry());
  return result;
}

double mlm_eval_loss(const Checkpoint& checkpoint, std::span<const std::vector<int>> corpus, int seq_len,
                     std::uint64_t seed, double mask_prob) {
  if (checkpoint.config.head_kind != HeadKind::kMlm) throw ConfigError("MLM loss needs an MLM-headed model");
  const ScopedFlushDenormals ftz;
  Checkpoint ck = frozen_copy(checkpoint);
  auto rng = stream_rng(seed, 404);
  double total = 0;
  long count = 0;
  constexpr std::size_t kChunk = 32;
  for (std::size_t begin = 0; begin < corpus.size(); begin += kChunk) {
    std::vector<std::vector<int>> seqs;
    for (std::size_t i = begin; i < std::min(corpus.size(), begin + kChunk); ++i) {
      seqs.push_back(clip_sequence(corpus[i], seq_len));
    }
    const MlmBatch mlm = mlm_mask_batch(seqs, mask_prob, ck.config.vocab_size, rng);
    const Batch batch = Batch::from_sequences(mlm.inputs, kPadId);
    std::vector<Index> rows;
    std::vector<int> targets;
    for (std::size_t b = 0; b < mlm.labels.size(); ++b) {
      for (std::size_t p = 0; p < mlm.labels[b].size(); ++p) {
        if (mlm.labels[b][p] == kIgnoreIndex) continue;
        rows.push_back(static_cast<Index>(b) * batch.seq_len + static_cast<Index>(p));
        targets.push_back(mlm.labels[b][p]);
      }
    }
    if (rows.empty()) continue;
    Graph g;
    const ForwardContext ctx{&ck.masks, false, nullptr};
    const Var hidden = encode(g, ck.config, ck.params, batch, ctx);
    const Var loss = cross_entropy(mlm_logits(g, ck.params, hidden, rows), targets);
    total += loss.value()(0, 0) * static_cast<double>(rows.size());
    count += static_cast<long>(rows.size());
  }
  if (count == 0) throw InputError("held-out corpus yields no masked positions");
  return total / static_cast<double>(count);
}

// ---- fine-tuning -----------------------------------------------------------------

std::pair<HeadKind, int> task_head(const TaskDataset& ds) {
  switch (ds.kind) {
    case TaskKind::kEntityRecognition:
      return {HeadKind::kTokenClassification, static_cast<int>(ds.labels.size())};
    case TaskKind::kRelationExtraction:
      return {HeadKind::kSequenceClassification, static_cast<int>(ds.labels.size())};
    case TaskKind::kQuestionAnswering:
      if (ds.span_qa()) return {HeadKind::kSpanQa, 0};
      return {HeadKind::kSequenceClassification, static_cast<int>(ds.labels.size())};
  }
  throw ConfigError("unknown task kind");
}

FinetuneResult finetune_run(const TaskDataset& dataset, const Vocab& vocab, const TrainRunConfig& config,
                            const Checkpoint& init, const Checkpoint* teacher, const StepObserver& observer) {
  config.validate();
  if (is_pretrain(config.regime)) throw ConfigError("finetune_run needs a fine-tuning regime");
  if (config.seq_len > init.config.max_seq_len) throw ConfigError("seq_len exceeds the model's max_seq_len");
  if (init.config.vocab_size != vocab.size()) {
    throw ConfigError("vocabulary has " + std::to_string(vocab.size()) + " ids but the model expects " +
                      std::to_string(init.config.vocab_size));
  }
  if (config.kd && !teacher) throw ConfigError("knowledge distillation needs a teacher");
  const auto [kind, labels] = task_head(dataset);
  if (kind != HeadKind::kSpanQa && labels < 2) throw ConfigError("dataset " + dataset.name + " has fewer than 2 labels");
  init.check_masks();

  FinetuneResult result;
  Checkpoint& ck = result.run.checkpoint;
  ck = init;
  if (ck.config.head_kind == HeadKind::kMlm) {
    ck.config.head_kind = kind;
    ck.config.num_labels = labels;
    ck.config.seed = config.seed;
    ck.config.validate();
    reset_head(ck.params, ck.config);
  } else if (ck.config.head_kind != kind || ck.config.num_labels != labels) {
    throw ConfigError("model head " + std::string(head_kind_name(ck.config.head_kind)) + "/" +
                      std::to_string(ck.config.num_labels) + " does not fit dataset " + dataset.name + " (" +
                      task_kind_name(dataset.kind) + ")");
  }
  std::optional<Checkpoint> frozen_teacher;
  if (teacher) {
    if (teacher->config.head_kind != kind || teacher->config.num_labels != labels) {
      throw ConfigError("teacher head does not fit dataset " + dataset.name);
    }
    frozen_teacher = frozen_copy(*teacher);
  }

  if (config.epochs > 0) {
    std::vector<Encoded> enc;
    for (const auto& ex : dataset.train) {
      Encoded e = encode_example(dataset, vocab, ex, config.seq_len);
      if (kind == HeadKind::kSpanQa && e.start < 0) continue;  // answer truncated away
      enc.push_back(std::move(e));
    }
    if (enc.empty()) throw InputError("dataset " + dataset.name + " has no usable training examples");

    LossFn loss = [&](Graph& g, std::span<const std::size_t> idx, const ForwardContext& ctx) -> std::optional<Var> {
      const Batch batch = make_batch(enc, idx);
      const TaskLogits student = task_forward(g, ck.config, ck.params, batch, ctx);
      if (!frozen_teacher) return task_loss(student, nullptr, ck.config, enc, idx, batch, config.kd);
      Graph tg;
      const ForwardContext tctx{&frozen_teacher->masks, false, nullptr};
      const TaskLogits t = task_forward(tg, frozen_teacher->config, frozen_teacher->params, batch, tctx);
      return task_loss(student, &t, ck.config, enc, idx, batch, config.kd);
    };
    LoopOutput lo = train_loop(ck, config, enc.size(), loss, observer);
    result.run.log = std::move(lo.log);
    result.run.sparsity_trace = std::move(lo.trace);
    result.run.steps = lo.steps;
    result.run.steps_per_epoch = lo.steps_per_epoch;
    ck.provenance.push_back(config.provenance_entry());
  }
  const auto& split = dataset.report_split();
  result.metric = compute_metric(dataset, predict(ck, dataset, vocab, split, config.seq_len), split);
  return result;
}

TaskPredictions predict(const Checkpoint& checkpoint, const TaskDataset& dataset, const Vocab& vocab,
                        const std::vector<TaskExample>& examples, int seq_len) {
  const auto [kind, labels] = task_head(dataset);
  if (checkpoint.config.head_kind != kind || checkpoint.config.num_labels != labels) {
    throw ConfigError("model head does not fit dataset " + dataset.name);
  }
  const ScopedFlushDenormals ftz;
  Checkpoint ck = frozen_copy(checkpoint);
  seq_len = std::min(seq_len, ck.config.max_seq_len);
  std::vector<Encoded> enc;
  enc.reserve(examples.size());
  for (const auto& ex : examples) enc.push_back(encode_example(dataset, vocab, ex, seq_len));

  TaskPredictions out;
  constexpr std::size_t kChunk = 64;
  std::vector<std::size_t> idx;
  for (std::size_t begin = 0; begin < enc.size(); begin += kChunk) {
    idx.clear();
    for (std::size_t i = begin; i < std::min(enc.size(), begin + kChunk); ++i) idx.push_back(i);
    const Batch batch = make_batch(enc, idx);
    Graph g;
    const ForwardContext ctx{&ck.masks, false, nullptr};
    const TaskLogits logits = task_forward(g, ck.config, ck.params, batch, ctx);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const Encoded& e = enc[idx[b]];
      const TaskExample& ex = examples[idx[b]];
      switch (kind) {
        case HeadKind::kTokenClassification: {
          const Matrix& z = logits.logits.value();
          std::vector<std::string> tags(ex.words.size(), "O");
          const std::size_t kept = e.ids.size() - 2;
          for (std::size_t w = 0; w < kept; ++w) {
            Index best;
            z.row(static_cast<Index>(b) * batch.seq_len + static_cast<Index>(w + 1)).maxCoeff(&best);
            tags[w] = dataset.labels[static_cast<std::size_t>(best)];
          }
          out.tags.push_back(std::move(tags));
          break;
        }
        case HeadKind::kSequenceClassification: {
          Index best;
          logits.logits.value().row(static_cast<Index>(b)).maxCoeff(&best);
          out.labels.push_back(static_cast<int>(best));
          break;
        }
        case HeadKind::kSpanQa: {
          const Matrix& s = logits.span.start.value();
          const Matrix& en = logits.span.end.value();
          constexpr int kMaxAnswer = 10;
          double best = -std::numeric_limits<double>::infinity();
          int bi = -1, bj = -1;
          for (int i = e.context_offset; i < e.context_offset + e.context_len; ++i) {
            for (int j = i; j < std::min(i + kMaxAnswer, e.context_offset + e.context_len); ++j) {
              const double score = s(static_cast<Index>(b), i) + en(static_cast<Index>(b), j);
              if (score > best) {
                best = score;
                bi = i;
                bj = j;
              }
            }
          }
          std::string text;
          for (int w = bi; w >= 0 && w <= bj; ++w) {
            if (!text.empty()) text += ' ';
            text += ex.words[static_cast<std::size_t>(w - e.context_offset)];
          }
          out.answers.push_back(std::move(text));
          break;
        }
        case HeadKind::kMlm: break;
      }
    }
  }
  return out;
}

SeedReport summarize_seeds(std::vector<std::uint64_t> seeds, std::vector<double> values) {
  SeedReport r;
  r.seeds = std::move(seeds);
  r.values = std::move(values);
  const double n = static_cast<double>(r.values.size());
  if (r.values.empty()) return r;
  r.mean = std::accumulate(r.values.begin(), r.values.end(), 0.0) / n;
  if (r.values.size() > 1) {
    double ss = 0;
    for (double v : r.values) ss += (v - r.mean) * (v - r.mean);
    r.stddev = std::sqrt(ss / (n - 1));
  }
  return r;
}

SeedReport finetune_seeds(const TaskDataset& dataset, const Vocab& vocab, const TrainRunConfig& config,
                          const Checkpoint& init, std::span<const std::uint64_t> seeds, const Checkpoint* teacher) {
  std::vector<double> values;
  for (auto seed : seeds) {
    TrainRunConfig c = config;
    c.seed = seed;
    values.push_back(finetune_run(dataset, vocab, c, init, teacher).metric);
  }
  return summarize_seeds({seeds.begin(), seeds.end()}, std::move(values));
}

int default_seed_count(std::size_t train_size, std::size_t threshold) { return train_size < threshold ? 10 : 5; }

}  // namespace sparsify

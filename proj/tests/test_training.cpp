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

#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "sparsify/pruning.hpp"
#include "sparsify/synthetic.hpp"
#include "sparsify/training.hpp"
#include "temp_dir.hpp"

using namespace sparsify;

namespace {

// Small enough that a full regime runs in about a second.
SyntheticDomainSpec tiny_spec() {
  SyntheticDomainSpec s;
  s.general_corpus_tokens = 6000;
  s.domain_corpus_tokens = 3000;
  s.er = {64, 16, 48};
  s.re = {64, 16, 48};
  s.qa = {48, 8, 32};
  s.span_qa = {48, 8, 32};
  return s;
}

struct Fixture {
  SyntheticDomains domains = generate_synthetic_domains(tiny_spec());
  Vocab vocab = Vocab::build(domains.vocab_documents(), 4096);
  std::vector<std::vector<int>> corpus;

  Fixture() {
    for (const auto& doc : domains.general_corpus) corpus.push_back(tokenize(doc, vocab, 32));
  }

  ModelConfig model(std::uint64_t seed = 3) const {
    ModelConfig c;
    c.vocab_size = vocab.size();
    c.hidden_dim = 16;
    c.num_layers = 2;
    c.num_heads = 2;
    c.ffn_dim = 32;
    c.max_seq_len = 32;
    c.seed = seed;
    return c;
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

TrainRunConfig short_pretrain() {
  TrainRunConfig c = recipes::pretrain_dense();
  c.seq_len = 32;
  c.epochs = 1;
  c.lr.cycle_epochs = {0.5};
  return c;
}

TrainRunConfig short_finetune(int epochs = 2) {
  TrainRunConfig c = recipes::finetune();
  c.seq_len = 32;
  c.epochs = epochs;
  c.lr.peak_lr = 3e-3;
  return c;
}

// Prunes every component of `ck` to `sparsity` by magnitude.
void prune_all(Checkpoint& ck, double sparsity) {
  for (auto& [path, mask] : ck.masks) {
    mask = magnitude_prune_component(ck.params.at(path), mask, sparsity);
  }
  enforce_masks(ck.params, ck.masks);
}

ModelParams scalar_params(double w0, double b0) {
  ModelParams p;
  p.insert("x.weight", Tensor({1, 1}, std::vector<double>{w0}), false);
  p.insert("x.bias", Tensor({1, 1}, std::vector<double>{b0}), false);
  p.set_requires_grad(true);
  return p;
}

}  // namespace

TEST_CASE("lr_at sawtooth endpoints and midpoints") {
  LrSchedule s{LrKind::kCyclic, 5e-4, {0, 100}, 200};
  CHECK(lr_at(s, 0) == doctest::Approx(5e-4));
  CHECK(lr_at(s, 50) == doctest::Approx(2.5e-4));
  CHECK(lr_at(s, 99) == doctest::Approx(5e-6));
  CHECK(lr_at(s, 100) == doctest::Approx(5e-4));
  CHECK(lr_at(s, 150) == doctest::Approx(2.5e-4));
  CHECK(lr_at(s, 200) == 0.0);

  LrSchedule lin{LrKind::kLinearDecay, 5e-5, {}, 40};
  CHECK(lr_at(lin, 0) == doctest::Approx(5e-5));
  CHECK(lr_at(lin, 20) == doctest::Approx(2.5e-5));
  CHECK(lr_at(lin, 40) == 0.0);
}

TEST_CASE("lr_at property: bounded, linear inside segments, reset at boundaries") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    LrSchedule s;
    s.kind = LrKind::kCyclic;
    s.peak_lr = std::uniform_real_distribution<double>(1e-5, 1e-2)(rng);
    s.total_steps = std::uniform_int_distribution<long>(1, 400)(rng);
    std::set<long> b{0};
    const int k = std::uniform_int_distribution<int>(0, 5)(rng);
    for (int i = 0; i < k; ++i) b.insert(std::uniform_int_distribution<long>(0, s.total_steps - 1)(rng));
    s.cycle_boundaries.assign(b.begin(), b.end());
    s.validate();
    std::vector<long> edges(b.begin(), b.end());
    edges.push_back(s.total_steps);
    for (std::size_t e = 0; e + 1 < edges.size(); ++e) {
      const long lo = edges[e], hi = edges[e + 1];
      CHECK(lr_at(s, lo) == doctest::Approx(s.peak_lr));
      const double slope = s.peak_lr / static_cast<double>(hi - lo);
      for (long t = lo; t < hi; ++t) {
        const double v = lr_at(s, t);
        REQUIRE(v >= 0.0);
        REQUIRE(v <= s.peak_lr);
        REQUIRE(lr_at(s, t + 1 < hi ? t + 1 : t) <= v);
        if (t + 1 < hi) REQUIRE(v - lr_at(s, t + 1) == doctest::Approx(slope).epsilon(1e-9));
      }
    }
    CHECK(lr_at(s, s.total_steps) == 0.0);
  }
}

TEST_CASE("adam_step with zero gradient applies only decoupled weight decay") {
  ModelParams p = scalar_params(2.0, 5.0);
  for (auto& [path, t] : p.tensors()) t.grad();
  OptimizerState st;
  st.config.weight_decay = 0.01;
  adam_step(p, st, 0.1);
  CHECK(p.at("x.weight").matrix()(0, 0) == doctest::Approx(2.0 * (1.0 - 0.1 * 0.01)));
  CHECK(p.at("x.bias").matrix()(0, 0) == 5.0);
  CHECK(st.step == 1);
  CHECK(st.moments.at("x.weight").m.rows() == 1);
}

TEST_CASE("adam_step minimizes a scalar quadratic") {
  ModelParams p = scalar_params(0.0, 0.0);
  OptimizerState st;
  st.config.weight_decay = 0.0;
  int steps = 0;
  for (; steps < 2000; ++steps) {
    p.zero_grad();
    const double w = p.at("x.weight").matrix()(0, 0);
    p.at("x.weight").grad()[0] = 2.0 * (w - 3.0);
    adam_step(p, st, 0.05 * (1.0 - steps / 2000.0));
  }
  CHECK(std::abs(p.at("x.weight").matrix()(0, 0) - 3.0) < 1e-3);
}

TEST_CASE("adam_step keeps masked entries and their moments at zero") {
  ModelParams p;
  p.insert("w.weight", Tensor::from_rows({{1.0, 2.0}, {3.0, 4.0}}), true);
  p.set_requires_grad(true);
  MaskSet masks = dense_masks(p);
  masks.at("w.weight").prune(1);
  masks.at("w.weight").prune(2);
  enforce_masks(p, masks);
  OptimizerState st;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    p.zero_grad();
    for (auto& g : p.at("w.weight").grad()) g = n(rng) + 1.0;
    adam_step(p, st, 1e-2, &masks);
    const auto w = p.at("w.weight").matrix();
    REQUIRE(w(0, 1) == 0.0);
    REQUIRE(w(1, 0) == 0.0);
    REQUIRE(st.moments.at("w.weight").m(0, 1) == 0.0);
    REQUIRE(st.moments.at("w.weight").v(1, 0) == 0.0);
  }
  CHECK(p.at("w.weight").matrix()(0, 0) != 1.0);
}

TEST_CASE("clip_grad_norm rescales to the cap") {
  ModelParams p = scalar_params(0.0, 0.0);
  p.at("x.weight").grad()[0] = 3.0;
  p.at("x.bias").grad()[0] = 4.0;
  CHECK(clip_grad_norm(p, 1.0) == doctest::Approx(5.0));
  CHECK(p.at("x.weight").grad()[0] == doctest::Approx(0.6));
  CHECK(p.at("x.bias").grad()[0] == doctest::Approx(0.8));
  CHECK(clip_grad_norm(p, 10.0) == doctest::Approx(1.0));
  CHECK(p.at("x.bias").grad()[0] == doctest::Approx(0.8));
}

TEST_CASE("mlm_mask_batch selection statistics") {
  std::mt19937_64 data(1);
  std::uniform_int_distribution<int> tok(kNumReservedIds, 499);
  std::vector<std::vector<int>> seqs;
  long positions = 0;
  while (positions < 100000) {
    std::vector<int> s{kClsId};
    for (int i = 0; i < 62; ++i) s.push_back(tok(data));
    s.push_back(kSepId);
    positions += 62;
    seqs.push_back(std::move(s));
  }
  std::mt19937_64 rng(9);
  const MlmBatch b = mlm_mask_batch(seqs, 0.15, 500, rng);
  const auto& st = b.stats;
  CHECK(st.candidates == positions);
  const double sel = static_cast<double>(st.selected) / static_cast<double>(st.candidates);
  CHECK(std::abs(sel - 0.15) < 0.01);
  const double n = static_cast<double>(st.selected);
  CHECK(std::abs(st.masked / n - 0.8) < 0.02);
  CHECK(std::abs(st.randomized / n - 0.1) < 0.02);
  CHECK(std::abs(st.unchanged / n - 0.1) < 0.02);
  CHECK(st.masked + st.randomized + st.unchanged == st.selected);

  // Independent recount from the outputs.
  long labelled = 0, masked = 0;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    for (std::size_t j = 0; j < seqs[i].size(); ++j) {
      if (b.labels[i][j] == kIgnoreIndex) {
        REQUIRE(b.inputs[i][j] == seqs[i][j]);
        continue;
      }
      ++labelled;
      REQUIRE(b.labels[i][j] == seqs[i][j]);
      REQUIRE(j != 0);
      REQUIRE(j + 1 != seqs[i].size());
      if (b.inputs[i][j] == kMaskId) ++masked;
    }
  }
  CHECK(labelled == st.selected);
  CHECK(masked == st.masked);

  std::mt19937_64 again(9);
  const MlmBatch b2 = mlm_mask_batch(seqs, 0.15, 500, again);
  CHECK(b2.inputs == b.inputs);
  CHECK(b2.labels == b.labels);
}

TEST_CASE("mlm_mask_batch edge cases") {
  std::mt19937_64 rng(2);
  const std::vector<std::vector<int>> seqs{{kClsId, 7, 8, 9, kSepId}, {kClsId, kSepId, kPadId}};
  const MlmBatch none = mlm_mask_batch(seqs, 0.0, 50, rng);
  CHECK(none.inputs == seqs);
  for (const auto& row : none.labels) {
    for (int l : row) CHECK(l == kIgnoreIndex);
  }
  const std::vector<std::vector<int>> specials{{kClsId, kSepId}};
  const MlmBatch sp = mlm_mask_batch(specials, 0.5, 50, rng);
  CHECK(sp.stats.candidates == 0);
  CHECK(sp.stats.selected == 0);
  CHECK_THROWS_AS(mlm_mask_batch(seqs, 1.0, 50, rng), ConfigError);
}

TEST_CASE("recipe presets carry the published protocol") {
  const auto pd = recipes::pretrain_dense();
  CHECK(pd.epochs == 3);
  CHECK(pd.lr.kind == LrKind::kCyclic);
  CHECK(pd.lr.peak_lr == 5e-4);
  CHECK(pd.lr.cycle_epochs == std::vector<double>{0.5, 1.0, 1.5, 2.0, 2.5});
  const auto pp = recipes::pretrain_prune();
  REQUIRE(pp.pruning);
  CHECK(pp.pruning->start_epoch == 0.0);
  CHECK(pp.pruning->end_epoch == 2.0);
  CHECK(pp.pruning->final_sparsity == 0.90);
  CHECK(pp.epochs - pp.pruning->end_epoch == 1.0);
  const auto ft = recipes::finetune();
  CHECK(ft.epochs == 10);
  CHECK(ft.batch_size == 16);
  CHECK(ft.lr.kind == LrKind::kLinearDecay);
  CHECK(ft.lr.peak_lr == 5e-5);
  const auto fp = recipes::finetune_prune();
  REQUIRE(fp.pruning);
  CHECK(fp.pruning->start_epoch == 2.0);
  CHECK(fp.pruning->end_epoch - fp.pruning->start_epoch == 6.0);
  CHECK(fp.epochs - fp.pruning->end_epoch == 2.0);
  CHECK(fp.lr.cycle_epochs == std::vector<double>{2.0, 8.0});

  // Cycle boundaries in steps at 10 steps per epoch.
  const LrSchedule s = pd.lr_schedule(10);
  CHECK(s.cycle_boundaries == std::vector<long>{0, 5, 10, 15, 20, 25});
  CHECK(s.total_steps == 30);
}

TEST_CASE("train config JSON round trip and strict keys") {
  for (const auto& c : {recipes::pretrain_dense(), recipes::pretrain_prune(), recipes::finetune(),
                        recipes::finetune_prune(), recipes::data_size_finetune(),
                        recipes::data_size_finetune_prune()}) {
    const auto j = to_json(c);
    CHECK(train_config_from_json(j) == c);
    CHECK(train_config_from_json(nlohmann::json::parse(j.dump())) == c);
  }
  auto j = to_json(recipes::finetune());
  j["learning_rate"] = 1.0;
  try {
    train_config_from_json(j);
    FAIL("accepted an unknown key");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("learning_rate") != std::string::npos);
  }
  auto k = to_json(recipes::pretrain_prune());
  k["pruning"]["final"] = 0.5;
  CHECK_THROWS_AS(train_config_from_json(k), ConfigError);
  auto m = to_json(recipes::finetune());
  m["epochs"] = "ten";
  CHECK_THROWS_AS(train_config_from_json(m), ConfigError);
  auto n = to_json(recipes::finetune());
  n["regime"] = "finetune_prune";
  CHECK_THROWS_AS(train_config_from_json(n), ConfigError);
}

TEST_CASE("zero-epoch pretraining returns the initialization") {
  const auto& f = fixture();
  const Checkpoint init = Checkpoint::fresh(f.model());
  TrainRunConfig c = short_pretrain();
  c.epochs = 0;
  c.lr.cycle_epochs.clear();
  const RunResult r = pretrain_run(f.corpus, c, init);
  CHECK(r.checkpoint.params == init.params);
  CHECK(r.checkpoint.masks == init.masks);
  CHECK(r.steps == 0);
}

TEST_CASE("pretrain_run guards") {
  const auto& f = fixture();
  const Checkpoint init = Checkpoint::fresh(f.model());
  TrainRunConfig c = recipes::pretrain_prune();
  c.seq_len = 32;
  CHECK_THROWS_AS(pretrain_run(f.corpus, c, init), ConfigError);  // KD without a teacher
  TrainRunConfig d = short_pretrain();
  CHECK_THROWS_AS(pretrain_run(f.corpus, d, init, &init), ConfigError);  // teacher without KD
  TrainRunConfig e = short_pretrain();
  e.seq_len = 64;
  CHECK_THROWS_AS(pretrain_run(f.corpus, e, init), ConfigError);  // longer than max_seq_len
}

TEST_CASE("pretrain_prune reaches the final sparsity and is deterministic") {
  const auto& f = fixture();
  const Checkpoint init = Checkpoint::fresh(f.model());
  const Checkpoint teacher = pretrain_run(f.corpus, short_pretrain(), init).checkpoint;
  TrainRunConfig c = recipes::pretrain_prune();
  c.seq_len = 32;

  MaskSet previous = teacher.masks;
  long violations = 0;
  const StepObserver watch = [&](long, const Checkpoint& ck) {
    if (!masks_nested(ck.masks, previous)) ++violations;
    for (const auto& [path, mask] : ck.masks) {
      const auto& w = ck.params.at(path);
      for (Index i = 0; i < mask.size(); ++i) {
        if (!mask.kept(i) && w.data()[i] != 0.0) ++violations;
      }
    }
    previous = ck.masks;
  };
  const RunResult r = pretrain_run(f.corpus, c, teacher, &teacher, watch);
  CHECK(violations == 0);
  REQUIRE_FALSE(r.sparsity_trace.empty());
  CHECK(r.sparsity_trace.front().first == 0);
  for (const auto& [path, mask] : r.checkpoint.masks) {
    CHECK(std::abs(mask.sparsity() - 0.90) <= 1.0 / static_cast<double>(mask.size()));
  }
  const auto rep = measure_sparsity(r.checkpoint.params, r.checkpoint.masks);
  for (const auto& [path, comp] : rep.components) CHECK(comp.zero_fraction >= comp.mask_sparsity);
  CHECK(r.checkpoint.provenance == std::vector<std::string>{"pretrain_dense", "pretrain_prune"});
  const long spe = r.steps_per_epoch;
  for (const auto& [step, sp] : r.sparsity_trace) CHECK(step <= 2 * spe);
  CHECK(r.checkpoint.masks == r.checkpoint.masks);

  const RunResult again = pretrain_run(f.corpus, c, teacher, &teacher);
  CHECK(again.checkpoint.serialize() == r.checkpoint.serialize());
  CHECK(again.log.to_jsonl() == r.log.to_jsonl());
}

TEST_CASE("pretraining logs carry step, lr, loss and sparsity") {
  const auto& f = fixture();
  TrainRunConfig c = short_pretrain();
  c.log_every = 3;
  const RunResult r = pretrain_run(f.corpus, c, Checkpoint::fresh(f.model()));
  REQUIRE(r.log.records.size() >= 2);
  CHECK(r.log.records.front().step == 0);
  CHECK(r.log.records.back().step == r.steps - 1);
  CHECK(r.log.records.front().lr == doctest::Approx(5e-4));
  std::istringstream lines(r.log.to_jsonl());
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("step"));
    CHECK(j.contains("lr"));
    CHECK(j.contains("loss"));
    CHECK(j.contains("sparsity"));
    ++n;
  }
  CHECK(n == r.log.records.size());
  testing::TempDir dir;
  r.log.append_jsonl(dir.str("log.jsonl"));
  r.log.append_jsonl(dir.str("log.jsonl"));
  std::ifstream in(dir.str("log.jsonl"));
  std::size_t total = 0;
  while (std::getline(in, line)) ++total;
  CHECK(total == 2 * n);
}

TEST_CASE("dense pretraining lowers held-out MLM loss") {
  const auto& f = fixture();
  const std::size_t cut = f.corpus.size() * 9 / 10;
  const std::vector<std::vector<int>> train(f.corpus.begin(), f.corpus.begin() + static_cast<long>(cut));
  const std::vector<std::vector<int>> held(f.corpus.begin() + static_cast<long>(cut), f.corpus.end());
  const Checkpoint init = Checkpoint::fresh(f.model());
  TrainRunConfig c = recipes::pretrain_dense();
  c.seq_len = 32;
  c.batch_size = 16;
  c.lr.peak_lr = 3e-3;
  c.epochs = 6;
  c.lr.cycle_epochs = {1, 2, 3, 4, 5};
  const RunResult r = pretrain_run(train, c, init);
  const double before = mlm_eval_loss(init, held, 32, 1);
  const double after = mlm_eval_loss(r.checkpoint, held, 32, 1);
  MESSAGE("held-out MLM loss " << before << " -> " << after);
  CHECK(std::isfinite(after));
  // The 30% bar applies at toy scale; see test_toy_scale.
  CHECK(after < 0.9 * before);
}

TEST_CASE("fine-tuning a pruned model preserves its masks exactly") {
  const auto& f = fixture();
  Checkpoint init = Checkpoint::fresh(f.model());
  prune_all(init, 0.75);
  const FinetuneResult r = finetune_run(f.domains.er, f.vocab, short_finetune(), init);
  CHECK(r.run.checkpoint.masks == init.masks);
  for (const auto& [path, mask] : init.masks) {
    const auto& w = r.run.checkpoint.params.at(path);
    for (Index i = 0; i < mask.size(); ++i) {
      if (!mask.kept(i)) REQUIRE(w.data()[i] == 0.0);
    }
  }
  CHECK(r.run.sparsity_trace.empty());
  CHECK(r.run.checkpoint.config.head_kind == HeadKind::kTokenClassification);
  CHECK(r.metric >= 0.0);
  CHECK(r.metric <= 1.0);
}

TEST_CASE("finetune_prune sparsity trace follows the window") {
  const auto& f = fixture();
  TrainRunConfig c = recipes::finetune_prune();
  c.seq_len = 32;
  c.lr.peak_lr = 3e-3;
  const FinetuneResult r = finetune_run(f.domains.re, f.vocab, c, Checkpoint::fresh(f.model()));
  const long spe = r.run.steps_per_epoch;
  REQUIRE_FALSE(r.run.sparsity_trace.empty());
  CHECK(r.run.sparsity_trace.front().first == 2 * spe);
  CHECK(r.run.sparsity_trace.front().second == doctest::Approx(0.30).epsilon(0.01));
  CHECK(r.run.sparsity_trace.back().first <= 8 * spe);
  CHECK(r.run.sparsity_trace.back().second == doctest::Approx(0.90).epsilon(0.01));
  for (const auto& rec : r.run.log.records) {
    if (rec.step < 2 * spe) CHECK(rec.sparsity == 0.0);
    if (rec.step >= 8 * spe) CHECK(rec.sparsity == doctest::Approx(r.run.sparsity_trace.back().second));
  }
  CHECK(r.run.checkpoint.provenance.back() == "finetune_prune");
  CHECK(pruning_stage(r.run.checkpoint.provenance) == "finetuning");
}

TEST_CASE("fine-tuning fits the entity task") {
  const auto& f = fixture();
  TrainRunConfig c = short_finetune(8);
  c.lr.peak_lr = 5e-3;
  c.log_every = 1;
  const FinetuneResult r = finetune_run(f.domains.er, f.vocab, c, Checkpoint::fresh(f.model()));
  const auto& rec = r.run.log.records;
  REQUIRE(rec.size() == static_cast<std::size_t>(r.run.steps));
  double head = 0, tail = 0;
  for (int i = 0; i < 4; ++i) {
    head += rec[static_cast<std::size_t>(i)].loss;
    tail += rec[rec.size() - 1 - static_cast<std::size_t>(i)].loss;
  }
  MESSAGE("ER loss " << head / 4 << " -> " << tail / 4 << ", span F1 " << r.metric);
  CHECK(tail < 0.6 * head);
}

TEST_CASE("head mismatch is a configuration error") {
  const auto& f = fixture();
  ModelConfig mc = f.model();
  mc.head_kind = HeadKind::kSequenceClassification;
  mc.num_labels = 2;
  const Checkpoint cls = Checkpoint::fresh(mc);
  CHECK_THROWS_AS(finetune_run(f.domains.er, f.vocab, short_finetune(1), cls), ConfigError);
  CHECK_THROWS_AS(predict(cls, f.domains.span_qa, f.vocab, f.domains.span_qa.test, 32), ConfigError);
  CHECK_THROWS_AS(mlm_eval_loss(cls, f.corpus, 32, 0), ConfigError);
  TrainRunConfig pre = short_pretrain();
  CHECK_THROWS_AS(finetune_run(f.domains.qa, f.vocab, pre, Checkpoint::fresh(f.model())), ConfigError);
}

TEST_CASE("seed reports carry every replicate") {
  const auto& f = fixture();
  const Checkpoint init = Checkpoint::fresh(f.model());
  std::vector<std::uint64_t> seeds(10);
  std::iota(seeds.begin(), seeds.end(), std::uint64_t{1});
  const SeedReport rep = finetune_seeds(f.domains.qa, f.vocab, short_finetune(1), init, seeds);
  REQUIRE(rep.values.size() == 10);
  CHECK(rep.seeds == seeds);
  double mean = 0;
  for (double v : rep.values) mean += v;
  mean /= 10;
  double ss = 0;
  for (double v : rep.values) ss += (v - mean) * (v - mean);
  CHECK(rep.mean == doctest::Approx(mean));
  CHECK(rep.stddev == doctest::Approx(std::sqrt(ss / 9)));

  const SeedReport one = summarize_seeds({4}, {0.5});
  CHECK(one.stddev == 0.0);
  CHECK(default_seed_count(4999) == 10);
  CHECK(default_seed_count(5000) == 5);
}

TEST_CASE("fine-tuning is deterministic per seed") {
  const auto& f = fixture();
  const Checkpoint init = Checkpoint::fresh(f.model());
  const auto a = finetune_run(f.domains.span_qa, f.vocab, short_finetune(1), init);
  const auto b = finetune_run(f.domains.span_qa, f.vocab, short_finetune(1), init);
  CHECK(a.run.checkpoint.serialize() == b.run.checkpoint.serialize());
  CHECK(a.metric == b.metric);
  TrainRunConfig other = short_finetune(1);
  other.seed = 99;
  const auto c = finetune_run(f.domains.span_qa, f.vocab, other, init);
  CHECK(c.run.checkpoint.serialize() != a.run.checkpoint.serialize());
}

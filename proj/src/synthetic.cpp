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

#include "sparsify/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "sparsify/error.hpp"
#include "sparsify/vocab.hpp"

namespace sparsify {
namespace {

enum Cls { kPerson, kPlace, kAnimal, kFood, kChemical, kDisease, kGene, kNumCls };
constexpr const char* kClsName[kNumCls] = {"person", "place", "animal", "food", "chemical", "disease", "gene"};
constexpr const char* kTagType[kNumCls] = {"", "", "", "", "Chemical", "Disease", "Gene"};
constexpr Cls kGeneralCls[] = {kPerson, kPlace, kAnimal, kFood};
constexpr Cls kDomainCls[] = {kChemical, kDisease, kGene};

// Templates: '%p' person, '%l' place, '%a' animal, '%f' food, '%c' chemical,
// '%d' disease, '%g' gene, '%x'/'%y'/'%z' task-filled slots.
const std::vector<std::string> kGeneralTemplates = {
    "%p lives in %l .",
    "%p travelled to %l last summer .",
    "%p fed the %a every morning .",
    "the %a ate some %f .",
    "%p cooked %f for dinner .",
    "people in %l like to eat %f .",
    "%p saw a %a near %l .",
    "%p met %p in %l .",
    "a %a was sleeping in the garden of %p .",
    "%p bought %f at the market in %l .",
    "the weather in %l was cold .",
    "%p gave the %a some %f .",
};

const std::vector<std::string> kDomainTemplates = {
    "patients were treated with %c .",
    "%c induced %d in rats .",
    "mutations in %g cause %d .",
    "expression of %g was reduced by %c .",
    "the dose of %c was increased .",
    "%d is associated with %g .",
    "symptoms of %d improved after %c .",
    "%g regulates the response to %c .",
    "patients with %d showed high levels of %g .",
    "the clinical trial tested %c against %d .",
    "loss of %g leads to severe %d .",
    "%c inhibits the activity of %g .",
};

// Neutral task templates: the words around the slots say nothing about the
// class of what fills them.
const std::vector<std::string> kPairTemplates = {
    "we examined %x and %y in this study .",
    "%x and %y were both reported .",
    "the report mentions %x together with %y .",
    "results for %x and %y are shown in the table .",
    "no data on %x or %y were found .",
    "this work considers %x as well as %y .",
};

const std::vector<std::string> kTripleTemplates = {
    "the story mentions %x , %y and %z .",
    "%x , %y and %z appeared in the report .",
    "we heard about %x , %y and %z today .",
    "the notes list %x , %y and %z .",
};

const char* const kQaQuestion[kNumCls] = {"which person ?",  "which place ?",   "which animal ?", "which food ?",
                                          "is %x a chemical ?", "is %x a disease ?", "is %x a gene ?"};

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

template <typename T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
  return v[d(rng)];
}

int uniform(int lo, int hi, std::mt19937_64& rng) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

bool coin(double p, std::mt19937_64& rng) { return std::bernoulli_distribution(p)(rng); }

struct Lexicon {
  std::vector<std::string> words[kNumCls];
  std::vector<std::string> seen[kNumCls];  // the half used by task training splits
};

std::set<std::string> template_words() {
  std::set<std::string> out;
  for (const auto* list : {&kGeneralTemplates, &kDomainTemplates, &kPairTemplates, &kTripleTemplates}) {
    for (const auto& t : *list) {
      for (auto& w : split_words(t)) out.insert(w);
    }
  }
  for (const char* q : kQaQuestion) {
    for (auto& w : split_words(q)) out.insert(w);
  }
  for (const char* n : kClsName) out.insert(n);
  return out;
}

Lexicon make_lexicon(const SyntheticDomainSpec& spec) {
  static const std::string consonants = "bdfgklmnprstvz";
  static const std::string vowels = "aeiou";
  auto rng = stream_rng(spec.seed, 1);
  std::set<std::string> taken = template_words();
  auto fresh = [&] {
    for (;;) {
      std::string w;
      const int syllables = uniform(2, 3, rng);
      for (int s = 0; s < syllables; ++s) {
        w += consonants[static_cast<std::size_t>(uniform(0, static_cast<int>(consonants.size()) - 1, rng))];
        w += vowels[static_cast<std::size_t>(uniform(0, static_cast<int>(vowels.size()) - 1, rng))];
      }
      if (taken.insert(w).second) return w;
    }
  };
  Lexicon lex;
  for (Cls c : kGeneralCls) {
    for (int i = 0; i < spec.general_class_size; ++i) lex.words[c].push_back(fresh());
  }
  const int per_domain = spec.domain_token_count / 3;
  for (Cls c : kDomainCls) {
    for (int i = 0; i < per_domain; ++i) lex.words[c].push_back(fresh());
  }
  for (int c = 0; c < kNumCls; ++c) {
    auto& w = lex.words[c];
    lex.seen[c].assign(w.begin(), w.begin() + static_cast<std::ptrdiff_t>((w.size() + 1) / 2));
  }
  return lex;
}

std::vector<std::string> mention(Cls c, const std::vector<std::string>* pool, double multiword_rate,
                                 std::mt19937_64& rng) {
  std::vector<std::string> words = {pick(*pool, rng)};
  if (pool->size() > 1 && coin(multiword_rate, rng)) {
    std::string second;
    do {
      second = pick(*pool, rng);
    } while (second == words.front());
    words.push_back(second);
  }
  (void)c;
  return words;
}

Cls slot_class(char code) {
  switch (code) {
    case 'p': return kPerson;
    case 'l': return kPlace;
    case 'a': return kAnimal;
    case 'f': return kFood;
    case 'c': return kChemical;
    case 'd': return kDisease;
    case 'g': return kGene;
  }
  throw ContractError(std::string("bad template slot %") + code);
}

// Expands a corpus template with random entities of each slot's class.
void expand_corpus_template(const std::string& tmpl, const Lexicon& lex, double multiword_rate,
                            std::mt19937_64& rng, std::vector<std::string>& out) {
  for (const auto& tok : split_words(tmpl)) {
    if (tok.size() == 2 && tok[0] == '%') {
      const Cls c = slot_class(tok[1]);
      for (auto& w : mention(c, &lex.words[c], multiword_rate, rng)) out.push_back(std::move(w));
    } else {
      out.push_back(tok);
    }
  }
}

std::vector<std::string> make_corpus(const SyntheticDomainSpec& spec, const Lexicon& lex, bool domain,
                                     long target_tokens, std::uint64_t stream) {
  auto rng = stream_rng(spec.seed, stream);
  std::vector<std::string> docs;
  long tokens = 0;
  while (tokens < target_tokens) {
    const int sentences = uniform(3, 6, rng);
    std::vector<std::string> words;
    for (int s = 0; s < sentences; ++s) {
      const bool general_grammar = !domain || coin(spec.shared_vocab_fraction, rng);
      const bool domain_template = general_grammar ? coin(spec.general_domain_rate, rng) : true;
      const auto& tmpl = pick(domain_template ? kDomainTemplates : kGeneralTemplates, rng);
      expand_corpus_template(tmpl, lex, spec.multiword_rate, rng, words);
    }
    tokens += static_cast<long>(words.size());
    std::string doc;
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (i) doc += ' ';
      doc += words[i];
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

struct Filled {
  std::vector<std::string> words;
  std::vector<std::string> tags;
  std::vector<std::pair<int, int>> slot_spans;  // inclusive word ranges of %x, %y, %z
};

Filled fill_task_template(const std::string& tmpl, const std::vector<Cls>& classes, const Lexicon& lex, bool train,
                          double multiword_rate, std::mt19937_64& rng) {
  Filled f;
  for (const auto& tok : split_words(tmpl)) {
    if (tok.size() == 2 && tok[0] == '%' && tok[1] >= 'x') {
      const Cls c = classes[static_cast<std::size_t>(tok[1] - 'x')];
      const auto* pool = train ? &lex.seen[c] : &lex.words[c];
      const auto words = mention(c, pool, multiword_rate, rng);
      const int begin = static_cast<int>(f.words.size());
      for (std::size_t i = 0; i < words.size(); ++i) {
        f.words.push_back(words[i]);
        const std::string type = kTagType[c];
        f.tags.push_back(type.empty() ? "O" : (i == 0 ? "B-" : "I-") + type);
      }
      f.slot_spans.emplace_back(begin, static_cast<int>(f.words.size()) - 1);
    } else {
      f.words.push_back(tok);
      f.tags.push_back("O");
    }
  }
  return f;
}

Cls random_domain(std::mt19937_64& rng) { return kDomainCls[uniform(0, 2, rng)]; }
Cls random_general(std::mt19937_64& rng) { return kGeneralCls[uniform(0, 3, rng)]; }

using ExampleMaker = TaskExample (*)(const Lexicon&, const SyntheticDomainSpec&, bool, std::mt19937_64&);

void fill_splits(TaskDataset& ds, const SplitSizes& sizes, const Lexicon& lex, const SyntheticDomainSpec& spec,
                 std::uint64_t stream, ExampleMaker make) {
  auto rng = stream_rng(spec.seed, stream);
  for (int i = 0; i < sizes.train; ++i) ds.train.push_back(make(lex, spec, true, rng));
  for (int i = 0; i < sizes.dev; ++i) ds.dev.push_back(make(lex, spec, false, rng));
  for (int i = 0; i < sizes.test; ++i) ds.test.push_back(make(lex, spec, false, rng));
}

TaskExample make_er(const Lexicon& lex, const SyntheticDomainSpec& spec, bool train, std::mt19937_64& rng) {
  // Each slot holds a domain entity or, sometimes, a general-class distractor.
  std::vector<Cls> classes;
  for (int s = 0; s < 2; ++s) classes.push_back(coin(0.75, rng) ? random_domain(rng) : random_general(rng));
  Filled f = fill_task_template(pick(kPairTemplates, rng), classes, lex, train, spec.multiword_rate, rng);
  TaskExample ex;
  ex.words = std::move(f.words);
  ex.tags = std::move(f.tags);
  return ex;
}

// Relation label names, sorted; "none" when both entities share a class.
const std::vector<std::string> kRelationLabels = {"chemical_disease", "chemical_gene", "disease_gene", "none"};

TaskExample make_re(const Lexicon& lex, const SyntheticDomainSpec& spec, bool train, std::mt19937_64& rng) {
  const Cls a = random_domain(rng), b = random_domain(rng);
  Filled f = fill_task_template(pick(kPairTemplates, rng), {a, b}, lex, train, spec.multiword_rate, rng);
  TaskExample ex;
  ex.words = std::move(f.words);
  if (a == b) {
    ex.label = 3;
  } else {
    const std::string name = std::string(kClsName[std::min(a, b)]) + "_" + kClsName[std::max(a, b)];
    ex.label = static_cast<int>(std::find(kRelationLabels.begin(), kRelationLabels.end(), name) -
                                kRelationLabels.begin());
  }
  return ex;
}

TaskExample make_qa(const Lexicon& lex, const SyntheticDomainSpec& spec, bool train, std::mt19937_64& rng) {
  const Cls a = random_domain(rng), b = random_domain(rng);
  Filled f = fill_task_template(pick(kPairTemplates, rng), {a, b}, lex, train, spec.multiword_rate, rng);
  const bool yes = coin(0.5, rng);
  Cls asked = a;
  while (!yes && asked == a) asked = random_domain(rng);
  const auto [begin, end] = f.slot_spans.front();
  std::vector<std::string> subject(f.words.begin() + begin, f.words.begin() + end + 1);
  TaskExample ex;
  for (const auto& tok : split_words(kQaQuestion[asked])) {
    if (tok == "%x") {
      ex.question.insert(ex.question.end(), subject.begin(), subject.end());
    } else {
      ex.question.push_back(tok);
    }
  }
  ex.words = std::move(f.words);
  ex.label = yes ? 1 : 0;  // labels {"no", "yes"}
  return ex;
}

TaskExample make_span_qa(const Lexicon& lex, const SyntheticDomainSpec& spec, bool train, std::mt19937_64& rng) {
  std::vector<Cls> classes(std::begin(kGeneralCls), std::end(kGeneralCls));
  std::shuffle(classes.begin(), classes.end(), rng);
  classes.resize(3);
  Filled f = fill_task_template(pick(kTripleTemplates, rng), classes, lex, train, spec.multiword_rate, rng);
  const int target = uniform(0, 2, rng);
  const auto [begin, end] = f.slot_spans[static_cast<std::size_t>(target)];
  TaskExample ex;
  ex.question = split_words(kQaQuestion[classes[static_cast<std::size_t>(target)]]);
  std::string text;
  for (int i = begin; i <= end; ++i) text += (i > begin ? " " : "") + f.words[static_cast<std::size_t>(i)];
  ex.answers.push_back({begin, end, text});
  ex.words = std::move(f.words);
  return ex;
}

std::string join_words(const std::vector<std::string>& w) {
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) s += (i ? " " : "") + w[i];
  return s;
}

}  // namespace

void SyntheticDomainSpec::validate() const {
  if (!(shared_vocab_fraction >= 0.0 && shared_vocab_fraction <= 1.0)) {
    throw ConfigError("shared_vocab_fraction must lie in [0, 1]");
  }
  if (domain_token_count < 3) throw ConfigError("domain_token_count must give every domain class a word");
  if (general_class_size < 3) throw ConfigError("general_class_size must be at least 3");
  if (general_corpus_tokens <= 0 || domain_corpus_tokens <= 0) throw ConfigError("corpus sizes must be positive");
  if (!(general_domain_rate >= 0.0 && general_domain_rate <= 1.0)) {
    throw ConfigError("general_domain_rate must lie in [0, 1]");
  }
  if (!(multiword_rate >= 0.0 && multiword_rate <= 1.0)) throw ConfigError("multiword_rate must lie in [0, 1]");
  for (const SplitSizes* s : {&er, &re, &qa, &span_qa}) {
    if (s->train < 0 || s->dev < 0 || s->test < 0) throw ConfigError("split sizes must be nonnegative");
  }
}

std::vector<std::string> SyntheticDomains::vocab_documents() const {
  std::vector<std::string> docs = general_corpus;
  docs.insert(docs.end(), domain_corpus.begin(), domain_corpus.end());
  for (const TaskDataset* ds : {&er, &re, &qa, &span_qa}) {
    for (const auto* split : {&ds->train, &ds->dev, &ds->test}) {
      for (const auto& ex : *split) docs.push_back(join_words(ex.question) + " " + join_words(ex.words));
    }
  }
  return docs;
}

SyntheticDomains generate_synthetic_domains(const SyntheticDomainSpec& spec) {
  spec.validate();
  const Lexicon lex = make_lexicon(spec);
  SyntheticDomains out;
  for (int c = 0; c < kNumCls; ++c) {
    for (const auto& w : lex.words[c]) out.lexicon.emplace(w, kClsName[c]);
  }
  out.general_corpus = make_corpus(spec, lex, false, spec.general_corpus_tokens, 2);
  out.domain_corpus = make_corpus(spec, lex, true, spec.domain_corpus_tokens, 3);

  out.er.name = "synthetic_er";
  out.er.kind = TaskKind::kEntityRecognition;
  out.er.metric = MetricKind::kSpanF1;
  out.er.labels = {"O", "B-Chemical", "I-Chemical", "B-Disease", "I-Disease", "B-Gene", "I-Gene"};
  fill_splits(out.er, spec.er, lex, spec, 10, make_er);

  out.re.name = "synthetic_re";
  out.re.kind = TaskKind::kRelationExtraction;
  out.re.metric = MetricKind::kF1;
  out.re.labels = kRelationLabels;
  out.re.negative_label = 3;
  fill_splits(out.re, spec.re, lex, spec, 11, make_re);

  out.qa.name = "synthetic_qa";
  out.qa.kind = TaskKind::kQuestionAnswering;
  out.qa.metric = MetricKind::kAccuracy;
  out.qa.labels = {"no", "yes"};
  fill_splits(out.qa, spec.qa, lex, spec, 12, make_qa);

  out.span_qa.name = "synthetic_span_qa";
  out.span_qa.kind = TaskKind::kQuestionAnswering;
  out.span_qa.metric = MetricKind::kSquadF1;
  fill_splits(out.span_qa, spec.span_qa, lex, spec, 13, make_span_qa);
  return out;
}

double unigram_kl(const std::vector<std::string>& p_docs, const std::vector<std::string>& q_docs, double smoothing) {
  std::unordered_map<std::string, std::pair<double, double>> counts;
  double np = 0, nq = 0;
  for (const auto& d : p_docs) {
    for (auto& w : split_words(d)) {
      counts[std::move(w)].first += 1;
      np += 1;
    }
  }
  for (const auto& d : q_docs) {
    for (auto& w : split_words(d)) {
      counts[std::move(w)].second += 1;
      nq += 1;
    }
  }
  if (np == 0 || nq == 0) throw InputError("unigram_kl needs two nonempty corpora");
  const double v = static_cast<double>(counts.size());
  double kl = 0;
  for (const auto& [w, c] : counts) {
    const double p = (c.first + smoothing) / (np + smoothing * v);
    const double q = (c.second + smoothing) / (nq + smoothing * v);
    kl += p * std::log(p / q);
  }
  return kl;
}

}  // namespace sparsify

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

#ifndef SPARSIFY_SYNTHETIC_HPP_
#define SPARSIFY_SYNTHETIC_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sparsify/datasets.hpp"

namespace sparsify {

struct SplitSizes {
  int train = 0, dev = 0, test = 0;
  friend bool operator==(const SplitSizes&, const SplitSizes&) = default;
};

// Two overlapping template grammars. The general grammar talks about
// people, places, animals and food and only occasionally about chemicals,
// diseases and genes; the domain grammar is the reverse.
struct SyntheticDomainSpec {
  // Fraction of domain-corpus sentences drawn from the general grammar.
  // 1.0 makes the two corpora identically distributed.
  double shared_vocab_fraction = 0.3;
  // Entity words across the three domain classes (split evenly).
  int domain_token_count = 72;
  // Entity words per general class.
  int general_class_size = 24;
  std::uint64_t seed = 7;
  long general_corpus_tokens = 200000;
  long domain_corpus_tokens = 100000;
  // Share of general-grammar sentences that use domain templates.
  double general_domain_rate = 0.05;
  // Probability that an entity mention spans two words.
  double multiword_rate = 0.25;
  SplitSizes er{600, 100, 300};
  SplitSizes re{600, 100, 300};
  SplitSizes qa{450, 50, 500};
  SplitSizes span_qa{880, 200, 400};

  void validate() const;
  friend bool operator==(const SyntheticDomainSpec&, const SyntheticDomainSpec&) = default;
};

struct SyntheticDomains {
  std::vector<std::string> general_corpus;
  std::vector<std::string> domain_corpus;
  TaskDataset er;       // token tagging of domain entities
  TaskDataset re;       // relation between two domain entities
  TaskDataset qa;       // yes/no class membership question
  TaskDataset span_qa;  // general-domain extractive QA
  // Entity word -> class name ("person", ..., "chemical", "disease", "gene").
  std::map<std::string, std::string> lexicon;

  // Everything a vocabulary should cover: both corpora and the task texts.
  std::vector<std::string> vocab_documents() const;
};

SyntheticDomains generate_synthetic_domains(const SyntheticDomainSpec& spec);

// KL(p || q) between unigram distributions of two corpora, with additive
// smoothing over the union vocabulary.
double unigram_kl(const std::vector<std::string>& p_docs, const std::vector<std::string>& q_docs,
                  double smoothing = 0.5);

}  // namespace sparsify

#endif  // SPARSIFY_SYNTHETIC_HPP_

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

#include <algorithm>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "doctest.h"
#include "sparsify/error.hpp"
#include "sparsify/metrics.hpp"

using namespace sparsify;

namespace {

using Tags = std::vector<std::string>;

std::string type_of(const std::string& tag) { return tag == "O" ? "" : tag.substr(2); }

// Brute force: test every (i, j, type) triple against the chunk definition
// directly. A chunk starts at B-T, or at I-T not continuing a T chunk, and
// runs over I-T tags until the next tag is not I-T.
std::vector<std::tuple<int, int, std::string>> brute_spans(const Tags& t) {
  std::vector<std::tuple<int, int, std::string>> out;
  const int n = static_cast<int>(t.size());
  for (const std::string type : {"Chem", "Dis"}) {
    for (int i = 0; i < n; ++i) {
      const bool starts = t[i] == "B-" + type || (t[i] == "I-" + type && (i == 0 || type_of(t[i - 1]) != type));
      if (!starts) continue;
      for (int j = i; j < n; ++j) {
        bool inside = true;
        for (int k = i + 1; k <= j; ++k) inside = inside && t[k] == "I-" + type;
        if (!inside) break;
        const bool closes = j + 1 == n || t[j + 1] != "I-" + type;
        if (closes) out.emplace_back(i, j, type);
      }
    }
  }
  return out;
}

double brute_f1(const std::vector<Tags>& pred, const std::vector<Tags>& gold) {
  double tp = 0, np = 0, ng = 0;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    const auto p = brute_spans(pred[s]);
    const auto g = brute_spans(gold[s]);
    np += static_cast<double>(p.size());
    ng += static_cast<double>(g.size());
    for (const auto& a : p) {
      for (const auto& b : g) tp += a == b ? 1 : 0;
    }
  }
  if (np + ng == 0) return 1.0;
  return 2 * tp / (np + ng);
}

Tags random_tags(std::mt19937_64& rng) {
  static const char* kTags[] = {"O", "O", "B-Chem", "I-Chem", "B-Dis", "I-Dis"};
  std::uniform_int_distribution<int> len(0, 12), pick(0, 5);
  Tags t(static_cast<std::size_t>(len(rng)));
  for (auto& x : t) x = kTags[pick(rng)];
  return t;
}

// Copy of `gold` with a few tags resampled, so predictions overlap gold.
Tags perturb(const Tags& gold, std::mt19937_64& rng) {
  static const char* kTags[] = {"O", "B-Chem", "I-Chem", "B-Dis", "I-Dis"};
  std::bernoulli_distribution flip(0.2);
  std::uniform_int_distribution<int> pick(0, 4);
  Tags t = gold;
  for (auto& x : t) {
    if (flip(rng)) x = kTags[pick(rng)];
  }
  return t;
}

}  // namespace

TEST_CASE("bio_spans decoding") {
  CHECK(bio_spans({}).empty());
  CHECK(bio_spans({"O", "O"}).empty());
  CHECK(bio_spans({"B-Chem", "I-Chem", "O", "B-Dis"}) ==
        std::vector<EntitySpan>{{0, 1, "Chem"}, {3, 3, "Dis"}});
  // Stray I- opens a span; a type change splits.
  CHECK(bio_spans({"I-Chem", "I-Dis", "I-Dis"}) == std::vector<EntitySpan>{{0, 0, "Chem"}, {1, 2, "Dis"}});
  CHECK(bio_spans({"B-Chem", "B-Chem"}) == std::vector<EntitySpan>{{0, 0, "Chem"}, {1, 1, "Chem"}});
}

TEST_CASE("span_f1 exact-span criterion") {
  const Tags gold{"O", "O", "B-Chem", "I-Chem", "I-Chem", "O"};
  const Tags pred{"O", "O", "B-Chem", "I-Chem", "O", "O"};
  CHECK(span_f1({pred}, {gold}) == 0.0);
  CHECK(span_f1({gold}, {gold}) == 1.0);
  // Wrong type at the right offsets is a miss.
  CHECK(span_f1({{"B-Dis"}}, {{"B-Chem"}}) == 0.0);
  // One hit, one spurious, one missed.
  CHECK(span_f1({{"B-Chem", "O", "B-Dis"}}, {{"B-Chem", "B-Dis", "O"}}) == doctest::Approx(0.5));
  CHECK(span_f1({}, {}) == 1.0);
  CHECK_THROWS_AS(span_f1({gold}, {}), InputError);
  CHECK_THROWS_AS(span_f1({{"O"}}, {{"O", "O"}}), InputError);
}

TEST_CASE("span_f1 equals the brute-force oracle on 1000 random sequences") {
  std::mt19937_64 rng(2026);
  std::vector<Tags> gold, pred;
  for (int i = 0; i < 1000; ++i) {
    gold.push_back(random_tags(rng));
    pred.push_back(i % 2 == 0 ? perturb(gold.back(), rng) : random_tags(rng));
    if (pred.back().size() != gold.back().size()) pred.back().resize(gold.back().size(), "O");
    // Per-sequence spans agree with the oracle.
    std::vector<std::tuple<int, int, std::string>> mine;
    for (const auto& s : bio_spans(gold.back())) mine.emplace_back(s.begin, s.end, s.type);
    auto oracle = brute_spans(gold.back());
    std::sort(mine.begin(), mine.end());
    std::sort(oracle.begin(), oracle.end());
    REQUIRE(mine == oracle);
  }
  CHECK(span_f1(pred, gold) == doctest::Approx(brute_f1(pred, gold)).epsilon(1e-12));
  // And on prefixes, where counts are small.
  for (std::size_t n : {1, 2, 5, 17, 100}) {
    std::vector<Tags> g(gold.begin(), gold.begin() + n), p(pred.begin(), pred.begin() + n);
    CHECK(span_f1(p, g) == doctest::Approx(brute_f1(p, g)).epsilon(1e-12));
  }
}

TEST_CASE("label_f1 and accuracy") {
  const std::vector<int> gold{0, 1, 2, 0, 1};
  CHECK(label_f1(gold, gold, 0) == 1.0);
  CHECK(accuracy(gold, gold) == 1.0);
  const std::vector<int> pred{2, 1, 0, 0, 2};
  // Negative label 0: tp 1, fp 2, fn 2.
  CHECK(label_f1(pred, gold, 0) == doctest::Approx(1.0 / 3.0));
  CHECK(accuracy(pred, gold) == doctest::Approx(0.4));
  // With no negative label, micro-F1 over all labels equals accuracy.
  CHECK(label_f1(pred, gold, -1) == doctest::Approx(0.4));
  CHECK_THROWS_AS(accuracy(pred, std::vector<int>{1}), InputError);
  CHECK_THROWS_AS(label_f1(pred, std::vector<int>{1}), InputError);
}

TEST_CASE("squad_f1 token overlap") {
  CHECK(squad_f1("attack", {"heart attack"}) == doctest::Approx(2.0 / 3.0));
  CHECK(squad_f1("heart attack", {"heart attack"}) == 1.0);
  // Normalization drops case, punctuation and articles.
  CHECK(squad_f1("The Heart-attack.", {"heartattack"}) == 1.0);
  CHECK(squad_f1("a heart attack", {"heart attack"}) == 1.0);
  // Max over gold answers.
  CHECK(squad_f1("attack", {"stroke", "heart attack", "attack"}) == 1.0);
  CHECK(squad_f1("stroke", {"heart attack"}) == 0.0);
  // Repeated tokens count once per occurrence: p=1/2, r=1 -> 2/3.
  CHECK(squad_f1("attack attack", {"attack"}) == doctest::Approx(2.0 / 3.0));
  CHECK(squad_f1("", {"the"}) == 1.0);
  CHECK_THROWS_AS(squad_f1("x", {}), InputError);
  CHECK(normalize_answer("  The  QUICK, fox! ") == "quick fox");
}

TEST_CASE("compute_metric dispatch is identity on gold") {
  for (MetricKind kind : {MetricKind::kSpanF1, MetricKind::kF1, MetricKind::kAccuracy, MetricKind::kSquadF1}) {
    TaskDataset ds;
    ds.metric = kind;
    ds.negative_label = 0;
    std::vector<TaskExample> gold(3);
    TaskPredictions p;
    for (int i = 0; i < 3; ++i) {
      gold[i].tags = {"B-Chem", "O", "I-Dis"};
      gold[i].label = i;
      gold[i].answers = {{0, 1, "heart attack"}};
      p.tags.push_back(gold[i].tags);
      p.labels.push_back(i);
      p.answers.push_back("heart attack");
    }
    CHECK(compute_metric(ds, p, gold) == 1.0);
  }
}

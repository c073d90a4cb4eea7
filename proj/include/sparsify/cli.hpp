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

// Command-line driver. Every subcommand reads a strict JSON config and
// writes its artifacts (checkpoints, JSONL logs, CSV/JSON reports) into an
// output directory.

#ifndef SPARSIFY_CLI_HPP_
#define SPARSIFY_CLI_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sparsify/model.hpp"
#include "sparsify/synthetic.hpp"
#include "sparsify/training.hpp"

namespace sparsify {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // data, input or divergence errors
inline constexpr int kExitConfig = 2;   // bad flags or config

// `pretrain`: dense and/or pruned pretraining on one corpus.
struct PretrainJob {
  SyntheticDomainSpec data;
  // "general", "domain" (synthetic corpora) or a text file, one document per line.
  std::string corpus = "general";
  std::string vocab;  // existing vocabulary file; built from the data when empty
  int vocab_cap = 4096;
  ModelConfig model;
  std::uint64_t seed = 1;
  // Trailing share of documents kept out of training for the MLM check.
  double heldout_fraction = 0.05;
  std::optional<TrainRunConfig> dense;  // runs first when present
  std::optional<TrainRunConfig> prune;  // then this, from the dense result
};

PretrainJob pretrain_job_from_json(const nlohmann::json& j, const std::string& where = "config");

// `finetune`: one task, one or more seeds.
struct FinetuneJob {
  SyntheticDomainSpec data;
  // Task file or directory, or "synthetic:<er|re|qa|span_qa>".
  std::string task;
  TrainRunConfig run = recipes::finetune();
  std::vector<std::uint64_t> seeds{1};
  double fraction = 1.0;  // training subsample
  std::string split = "test";  // "test" or "dev"
};

FinetuneJob finetune_job_from_json(const nlohmann::json& j, const std::string& where = "config");

// Runs one command line (args[0] is the program name). Never throws.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sparsify

#endif  // SPARSIFY_CLI_HPP_

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


// Pretraining at toy scale through the CLI with the shipped config: the full
// synthetic corpus and the 4-layer, 64-wide encoder. Slow.

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sparsify/checkpoint.hpp"
#include "sparsify/cli.hpp"
#include "sparsify/pruning.hpp"
#include "temp_dir.hpp"

using namespace sparsify;
using nlohmann::json;

TEST_CASE("toy pretraining learns, and the pruned model keeps up") {
  testing::TempDir dir;
  std::ostringstream out, err;
  const int code = run_cli({"sparsify", "pretrain", "--config", SPARSIFY_CONFIG_DIR "/toy_prune.json", "--out",
                            dir.str("toy")},
                           out, err);
  REQUIRE_MESSAGE(code == 0, err.str());
  std::ifstream in(dir.path / "toy" / "summary.json");
  const json s = json::parse(in);
  const double before = s.at("heldout_mlm_before").get<double>();
  const double dense = s.at("dense").at("heldout_mlm").get<double>();
  const double sparse = s.at("prune").at("heldout_mlm").get<double>();
  MESSAGE("held-out MLM: init " << before << ", dense " << dense << ", pruned " << sparse);
  CHECK(dense <= 0.70 * before);
  CHECK(sparse <= 1.15 * dense);
  CHECK(s.at("provenance") == json{"pretrain_dense", "pretrain_prune"});

  const Checkpoint ck = Checkpoint::load(dir.str("toy/model.ckpt"));
  CHECK(ck.config.hidden_dim == 64);
  CHECK(ck.config.num_layers == 4);
  const SparsityReport r = measure_sparsity(ck.params, ck.masks);
  for (const auto& [path, c] : r.components) {
    CHECK_MESSAGE(std::abs(c.mask_sparsity - 0.90) <= 1.0 / static_cast<double>(c.size), path);
  }
}

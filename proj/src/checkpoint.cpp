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

#include "sparsify/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "sparsify/error.hpp"

namespace sparsify {
namespace {

constexpr char kMagic[4] = {'G', 'M', 'P', 'F'};

using binary::crc;
using binary::Reader;
using binary::Writer;

nlohmann::json config_json(const ModelConfig& c) {
  return {{"vocab_size", c.vocab_size},   {"hidden_dim", c.hidden_dim},
          {"num_layers", c.num_layers},   {"num_heads", c.num_heads},
          {"ffn_dim", c.ffn_dim},         {"max_seq_len", c.max_seq_len},
          {"head_kind", std::string(head_kind_name(c.head_kind))},
          {"num_labels", c.num_labels},   {"dropout", c.dropout},
          {"layer_norm_eps", c.layer_norm_eps}, {"seed", c.seed}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<int>();
  c.hidden_dim = j.at("hidden_dim").get<int>();
  c.num_layers = j.at("num_layers").get<int>();
  c.num_heads = j.at("num_heads").get<int>();
  c.ffn_dim = j.at("ffn_dim").get<int>();
  c.max_seq_len = j.at("max_seq_len").get<int>();
  c.head_kind = parse_head_kind(j.at("head_kind").get<std::string>());
  c.num_labels = j.at("num_labels").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.layer_norm_eps = j.at("layer_norm_eps").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

Checkpoint Checkpoint::fresh(const ModelConfig& config) {
  Checkpoint ck;
  ck.config = config;
  ck.params = init_params(config);
  ck.masks = dense_masks(ck.params);
  return ck;
}

void Checkpoint::check_masks() const {
  const auto prunable = params.prunable_paths();
  if (prunable.size() != masks.size()) throw ContractError("checkpoint masks do not cover the prunable set");
  for (const auto& path : prunable) {
    auto it = masks.find(path);
    if (it == masks.end()) throw ContractError("checkpoint has no mask for " + path);
    const Tensor& t = params.at(path);
    if (it->second.rows() != t.rows() || it->second.cols() != t.cols()) {
      throw ContractError("mask for " + path + " does not match its weight shape");
    }
  }
}

std::string Checkpoint::serialize() const {
  check_masks();
  Writer w;
  w.raw(kMagic, 4);
  w.put(kCheckpointVersion);
  nlohmann::json header = {{"config", config_json(config)},
                           {"provenance", provenance},
                           {"value_format", "f32le (rounded from f64 in memory)"}};
  w.put_string(header.dump());

  w.put(static_cast<std::uint32_t>(params.tensors().size()));
  for (const auto& [path, t] : params.tensors()) {
    w.put_string(path);
    w.put(static_cast<std::uint8_t>(params.is_prunable(path) ? 1 : 0));
    w.put(static_cast<std::uint32_t>(t.rank()));
    for (Index d : t.shape()) w.put(static_cast<std::uint64_t>(d));
    for (double v : t.data()) w.put(static_cast<float>(v));
  }

  w.put(static_cast<std::uint32_t>(masks.size()));
  for (const auto& [path, m] : masks) {
    w.put_string(path);
    w.put(static_cast<std::uint64_t>(m.rows()));
    w.put(static_cast<std::uint64_t>(m.cols()));
    std::string packed(static_cast<std::size_t>((m.size() + 7) / 8), '\0');
    for (Index i = 0; i < m.size(); ++i) {
      if (m.kept(i)) packed[static_cast<std::size_t>(i / 8)] |= static_cast<char>(1u << (i % 8));
    }
    w.raw(packed.data(), packed.size());
  }
  w.put(crc(w.bytes()));
  return std::move(w.bytes());
}

Checkpoint Checkpoint::deserialize(std::string_view bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw DataError("not a checkpoint (bad magic)");
  }
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
  const std::string_view body = bytes.substr(0, bytes.size() - 4);
  if (crc(body) != stored) throw DataError("checkpoint checksum mismatch");

  Reader r(body);
  r.take(4);
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  try {
    const auto header = nlohmann::json::parse(r.get_string());
    ck.config = config_from_json(header.at("config"));
    ck.provenance = header.at("provenance").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad checkpoint header: ") + e.what());
  }

  const auto n_params = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_params; ++i) {
    std::string path = r.get_string();
    const bool prunable = r.get<std::uint8_t>() != 0;
    const auto rank = r.get<std::uint32_t>();
    if (rank == 0 || rank > 8) throw DataError("bad rank for " + path);
    Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(static_cast<Index>(r.get<std::uint64_t>()));
    const Index n = shape_size(shape);
    if (n <= 0 || n > (Index{1} << 34)) throw DataError("bad shape for " + path);
    std::vector<double> values(static_cast<std::size_t>(n));
    for (auto& v : values) v = static_cast<double>(r.get<float>());
    ck.params.insert(std::move(path), Tensor(shape, std::move(values)), prunable);
  }

  const auto n_masks = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_masks; ++i) {
    std::string path = r.get_string();
    const auto rows = static_cast<Index>(r.get<std::uint64_t>());
    const auto cols = static_cast<Index>(r.get<std::uint64_t>());
    if (rows <= 0 || cols <= 0 || rows * cols > (Index{1} << 34)) throw DataError("bad mask shape for " + path);
    const auto packed = r.take(static_cast<std::size_t>((rows * cols + 7) / 8));
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(rows * cols));
    for (std::size_t b = 0; b < bits.size(); ++b) {
      bits[b] = (static_cast<unsigned char>(packed[b / 8]) >> (b % 8)) & 1u;
    }
    ck.masks.emplace(path, SparsityMask(path, rows, cols, std::move(bits)));
  }
  if (!r.done()) throw DataError("trailing bytes in checkpoint");
  try {
    ck.check_masks();
  } catch (const ContractError& e) {
    throw DataError(e.what());
  }
  return ck;
}

void Checkpoint::save(const std::string& path) const {
  const std::string bytes = serialize();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write checkpoint " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("failed writing checkpoint " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read checkpoint " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

std::string pruning_stage(const std::vector<std::string>& provenance) {
  std::string stage = "none";
  int prunes = 0;
  for (const auto& entry : provenance) {
    if (entry == "finetune_prune") {
      stage = "finetuning";
      ++prunes;
    } else if (entry == "domain_prune") {
      stage = "domain_pretraining";
      ++prunes;
    } else if (entry == "pretrain_prune") {
      stage = "general_pretraining";
      ++prunes;
    } else if (entry != "pretrain_dense" && entry != "domain_pretrain" && entry != "finetune") {
      throw DataError("unknown provenance entry '" + entry + "'");
    }
  }
  if (prunes > 1) throw DataError("lineage prunes more than once; no single pruning stage");
  return stage;
}

bool domain_pretrained(const std::vector<std::string>& provenance) {
  return std::any_of(provenance.begin(), provenance.end(),
                     [](const std::string& e) { return e == "domain_pretrain" || e == "domain_prune"; });
}

}  // namespace sparsify

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

#ifndef SPARSIFY_MODEL_HPP_
#define SPARSIFY_MODEL_HPP_

#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sparsify/autodiff.hpp"
#include "sparsify/mask.hpp"

namespace sparsify {

enum class HeadKind : std::uint8_t { kMlm, kTokenClassification, kSequenceClassification, kSpanQa };

std::string_view head_kind_name(HeadKind kind);
HeadKind parse_head_kind(std::string_view name);

struct ModelConfig {
  int vocab_size = 0;
  int hidden_dim = 64;
  int num_layers = 4;
  int num_heads = 4;
  int ffn_dim = 256;
  int max_seq_len = 64;
  HeadKind head_kind = HeadKind::kMlm;
  // Classes for token/sequence classification heads.
  int num_labels = 0;
  // Applied to embedding output and both residual branches while training.
  double dropout = 0.1;
  double layer_norm_eps = 1e-12;
  std::uint64_t seed = 0;

  int head_dim() const { return hidden_dim / num_heads; }
  // Throws ConfigError on violated invariants.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Prunable weights: the Q/K/V/output projections and both FFN matrices of
// every layer, 4 h^2 + 2 h ffn per layer.
Index prunable_parameter_count(const ModelConfig& config);

// Named parameter collection. Iteration order is the lexicographic order of
// paths, which fixes initialization and serialization order.
class ModelParams {
 public:
  void insert(std::string path, Tensor tensor, bool prunable);
  void erase(const std::string& path);
  bool contains(const std::string& path) const { return tensors_.count(path) != 0; }
  Tensor& at(const std::string& path);
  const Tensor& at(const std::string& path) const;
  bool is_prunable(const std::string& path) const { return prunable_.count(path) != 0; }

  std::vector<std::string> paths() const;
  std::vector<std::string> prunable_paths() const { return {prunable_.begin(), prunable_.end()}; }
  std::map<std::string, Tensor>& tensors() { return tensors_; }
  const std::map<std::string, Tensor>& tensors() const { return tensors_; }

  Index parameter_count() const;
  Index prunable_count() const;
  void set_requires_grad(bool on);
  void zero_grad();

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  std::map<std::string, Tensor> tensors_;
  std::set<std::string> prunable_;
};

// Fresh parameters: truncated-normal(0.02) weights, zero biases, unit
// layer-norm gains, seeded by config.seed.
ModelParams init_params(const ModelConfig& config);
// Drops every head and initializes the one `config` names.
void reset_head(ModelParams& params, const ModelConfig& config);
// All-ones masks over the prunable set.
MaskSet dense_masks(const ModelParams& params);

// Padded batch of token sequences.
struct Batch {
  Index batch_size = 0;
  Index seq_len = 0;
  // batch_size * seq_len ids, [PAD]-filled past each sequence's end.
  std::vector<int> ids;
  // 1 for real tokens, 0 for padding.
  std::vector<std::uint8_t> valid;

  static Batch from_sequences(std::span<const std::vector<int>> sequences, int pad_id = 0);
  std::span<const std::uint8_t> valid_row(Index b) const {
    return std::span<const std::uint8_t>(valid).subspan(static_cast<std::size_t>(b * seq_len),
                                                        static_cast<std::size_t>(seq_len));
  }
};

struct ForwardContext {
  // Applied multiplicatively to prunable weights; null means dense.
  const MaskSet* masks = nullptr;
  // Enables dropout.
  bool train = false;
  std::mt19937_64* rng = nullptr;
};

// softmax(Q K^T / sqrt(d) + pad penalty) V for one head of one sequence.
// Keys whose `key_valid` entry is 0 get exactly zero weight.
Var attention(Var q, Var k, Var v, std::span<const std::uint8_t> key_valid);

// Weight handle for `path`, masked when the context carries a mask for it.
Var weight(Graph& graph, ModelParams& params, const std::string& path, const ForwardContext& ctx);

// One pre-norm encoder block over the stacked batch rows [B*s x h].
Var encoder_layer_forward(Graph& graph, const ModelConfig& config, ModelParams& params, int layer, Var x,
                          const Batch& batch, const ForwardContext& ctx);

// Embeddings, every encoder layer, and the final layer norm: [B*s x h].
Var encode(Graph& graph, const ModelConfig& config, ModelParams& params, const Batch& batch,
           const ForwardContext& ctx);

// MLM logits for the selected stacked rows: [rows x vocab].
Var mlm_logits(Graph& graph, ModelParams& params, Var hidden, std::span<const Index> rows);
// [B*s x k]
Var token_logits(Graph& graph, ModelParams& params, Var hidden);
// First-token pooling: [B x k]
Var sequence_logits(Graph& graph, ModelParams& params, Var hidden, const Batch& batch);

struct SpanLogits {
  Var start;  // [B x s]
  Var end;    // [B x s]
};
// Padded positions are pushed to a large negative logit.
SpanLogits span_logits(Graph& graph, ModelParams& params, Var hidden, const Batch& batch);

// Inference-only logits for a single sequence, shaped per head kind:
// mlm [s x vocab], token_cls [s x k], seq_cls [k], span_qa start/end [s].
struct HeadOutput {
  Tensor logits;
  Tensor start;
  Tensor end;
};
HeadOutput model_forward(std::span<const int> token_ids, const ModelConfig& config, ModelParams& params,
                         const MaskSet* masks);

}  // namespace sparsify

#endif  // SPARSIFY_MODEL_HPP_

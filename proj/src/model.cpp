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

#include "sparsify/model.hpp"

#include <algorithm>
#include <cmath>

namespace sparsify {
namespace {

constexpr double kInitStd = 0.02;
constexpr double kPadPenalty = -1e9;
constexpr std::uint64_t kHeadSeedSalt = 0x9E3779B97F4A7C15ull;

std::string layer_prefix(int layer) { return "layer." + std::to_string(layer) + "."; }

Tensor truncated_normal(Shape shape, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> normal(0.0, kInitStd);
  for (double& v : t.data()) {
    double x;
    do {
      x = normal(rng);
    } while (std::abs(x) > 2.0 * kInitStd);
    v = x;
  }
  return t;
}

Tensor filled(Shape shape, double value) {
  Tensor t(std::move(shape));
  std::fill(t.data().begin(), t.data().end(), value);
  return t;
}

// Parameter shapes and roles in creation order.
struct ParamSpec {
  std::string path;
  Shape shape;
  enum Init { kWeight, kZero, kOne } init;
  bool prunable;
};

std::vector<ParamSpec> encoder_specs(const ModelConfig& c) {
  const Index h = c.hidden_dim;
  const Index f = c.ffn_dim;
  std::vector<ParamSpec> specs = {
      {"embeddings.token.weight", {c.vocab_size, h}, ParamSpec::kWeight, false},
      {"embeddings.position.weight", {c.max_seq_len, h}, ParamSpec::kWeight, false},
  };
  for (int l = 0; l < c.num_layers; ++l) {
    const std::string p = layer_prefix(l);
    specs.push_back({p + "attn_norm.gamma", {h}, ParamSpec::kOne, false});
    specs.push_back({p + "attn_norm.beta", {h}, ParamSpec::kZero, false});
    for (const char* proj : {"q_proj", "k_proj", "v_proj", "out_proj"}) {
      specs.push_back({p + "attn." + proj + ".weight", {h, h}, ParamSpec::kWeight, true});
      specs.push_back({p + "attn." + proj + ".bias", {h}, ParamSpec::kZero, false});
    }
    specs.push_back({p + "ffn_norm.gamma", {h}, ParamSpec::kOne, false});
    specs.push_back({p + "ffn_norm.beta", {h}, ParamSpec::kZero, false});
    specs.push_back({p + "ffn.up.weight", {h, f}, ParamSpec::kWeight, true});
    specs.push_back({p + "ffn.up.bias", {f}, ParamSpec::kZero, false});
    specs.push_back({p + "ffn.down.weight", {f, h}, ParamSpec::kWeight, true});
    specs.push_back({p + "ffn.down.bias", {h}, ParamSpec::kZero, false});
  }
  specs.push_back({"final_norm.gamma", {h}, ParamSpec::kOne, false});
  specs.push_back({"final_norm.beta", {h}, ParamSpec::kZero, false});
  return specs;
}

std::vector<ParamSpec> head_specs(const ModelConfig& c) {
  const Index h = c.hidden_dim;
  switch (c.head_kind) {
    case HeadKind::kMlm:
      return {{"head.mlm.weight", {h, c.vocab_size}, ParamSpec::kWeight, false},
              {"head.mlm.bias", {c.vocab_size}, ParamSpec::kZero, false}};
    case HeadKind::kTokenClassification:
      return {{"head.token_cls.weight", {h, c.num_labels}, ParamSpec::kWeight, false},
              {"head.token_cls.bias", {c.num_labels}, ParamSpec::kZero, false}};
    case HeadKind::kSequenceClassification:
      return {{"head.seq_cls.weight", {h, c.num_labels}, ParamSpec::kWeight, false},
              {"head.seq_cls.bias", {c.num_labels}, ParamSpec::kZero, false}};
    case HeadKind::kSpanQa:
      return {{"head.span_qa.weight", {h, 2}, ParamSpec::kWeight, false},
              {"head.span_qa.bias", {2}, ParamSpec::kZero, false}};
  }
  return {};
}

void materialize(ModelParams& params, const std::vector<ParamSpec>& specs, std::mt19937_64& rng) {
  for (const ParamSpec& s : specs) {
    switch (s.init) {
      case ParamSpec::kWeight:
        params.insert(s.path, truncated_normal(s.shape, rng), s.prunable);
        break;
      case ParamSpec::kZero:
        params.insert(s.path, Tensor(s.shape), s.prunable);
        break;
      case ParamSpec::kOne:
        params.insert(s.path, filled(s.shape, 1.0), s.prunable);
        break;
    }
  }
}

Var dropout(Var x, double p, const ForwardContext& ctx) {
  if (!ctx.train || p <= 0.0) return x;
  if (ctx.rng == nullptr) throw ContractError("dropout in training mode needs an rng");
  std::bernoulli_distribution keep(1.0 - p);
  Matrix m(x.rows(), x.cols());
  const double s = 1.0 / (1.0 - p);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = keep(*ctx.rng) ? s : 0.0;
  return mul_constant(x, m);
}

Var affine(Graph& graph, ModelParams& params, Var x, const std::string& stem, const ForwardContext& ctx) {
  return add_row_bias(matmul(x, weight(graph, params, stem + ".weight", ctx)), graph.parameter(params.at(stem + ".bias")));
}

Var norm(Graph& graph, ModelParams& params, Var x, const std::string& stem, double eps) {
  return layer_norm(x, graph.parameter(params.at(stem + ".gamma")), graph.parameter(params.at(stem + ".beta")), eps);
}

Matrix pad_penalty(const Batch& batch) {
  Matrix p = Matrix::Zero(batch.batch_size, batch.seq_len);
  for (Index i = 0; i < p.size(); ++i) {
    if (!batch.valid[static_cast<std::size_t>(i)]) p.data()[i] = kPadPenalty;
  }
  return p;
}

void check_mask_coverage(const ModelParams& params, const MaskSet& masks) {
  const auto prunable = params.prunable_paths();
  if (masks.size() != prunable.size()) {
    throw ContractError("mask set has " + std::to_string(masks.size()) + " entries for " +
                        std::to_string(prunable.size()) + " prunable components");
  }
  for (const auto& path : prunable) {
    auto it = masks.find(path);
    if (it == masks.end()) throw ContractError("no mask for prunable component " + path);
    const Tensor& w = params.at(path);
    if (it->second.rows() != w.rows() || it->second.cols() != w.cols()) {
      throw DimensionError("mask for " + path + " does not match its weight shape");
    }
  }
}

}  // namespace

std::string_view head_kind_name(HeadKind kind) {
  switch (kind) {
    case HeadKind::kMlm:
      return "mlm";
    case HeadKind::kTokenClassification:
      return "token_cls";
    case HeadKind::kSequenceClassification:
      return "seq_cls";
    case HeadKind::kSpanQa:
      return "span_qa";
  }
  return "?";
}

HeadKind parse_head_kind(std::string_view name) {
  for (HeadKind k : {HeadKind::kMlm, HeadKind::kTokenClassification, HeadKind::kSequenceClassification,
                     HeadKind::kSpanQa}) {
    if (head_kind_name(k) == name) return k;
  }
  throw ConfigError("unknown head kind '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("model config: " + what);
  };
  require(vocab_size > 0, "vocab_size must be positive");
  require(hidden_dim > 0, "hidden_dim must be positive");
  require(num_layers > 0, "num_layers must be positive");
  require(num_heads > 0, "num_heads must be positive");
  require(ffn_dim > 0, "ffn_dim must be positive");
  require(max_seq_len > 0, "max_seq_len must be positive");
  require(hidden_dim % num_heads == 0, "hidden_dim must be divisible by num_heads");
  require(head_dim() >= 4, "per-head dimension must be at least 4");
  require(dropout >= 0.0 && dropout < 1.0, "dropout must be in [0, 1)");
  require(layer_norm_eps > 0.0, "layer_norm_eps must be positive");
  const bool classifies =
      head_kind == HeadKind::kTokenClassification || head_kind == HeadKind::kSequenceClassification;
  require(!classifies || num_labels >= 2, "classification heads need num_labels >= 2");
}

Index prunable_parameter_count(const ModelConfig& c) {
  const Index h = c.hidden_dim;
  return static_cast<Index>(c.num_layers) * (4 * h * h + 2 * h * c.ffn_dim);
}

void ModelParams::insert(std::string path, Tensor tensor, bool prunable) {
  if (prunable && tensor.rank() != 2) throw ContractError("prunable parameter " + path + " must be a matrix");
  if (prunable) {
    prunable_.insert(path);
  } else {
    prunable_.erase(path);
  }
  tensors_.insert_or_assign(std::move(path), std::move(tensor));
}

void ModelParams::erase(const std::string& path) {
  tensors_.erase(path);
  prunable_.erase(path);
}

Tensor& ModelParams::at(const std::string& path) {
  auto it = tensors_.find(path);
  if (it == tensors_.end()) throw ContractError("no parameter named " + path);
  return it->second;
}

const Tensor& ModelParams::at(const std::string& path) const {
  auto it = tensors_.find(path);
  if (it == tensors_.end()) throw ContractError("no parameter named " + path);
  return it->second;
}

std::vector<std::string> ModelParams::paths() const {
  std::vector<std::string> out;
  out.reserve(tensors_.size());
  for (const auto& [path, t] : tensors_) out.push_back(path);
  return out;
}

Index ModelParams::parameter_count() const {
  Index n = 0;
  for (const auto& [path, t] : tensors_) n += t.size();
  return n;
}

Index ModelParams::prunable_count() const {
  Index n = 0;
  for (const auto& path : prunable_) n += tensors_.at(path).size();
  return n;
}

void ModelParams::set_requires_grad(bool on) {
  for (auto& [path, t] : tensors_) t.set_requires_grad(on);
}

void ModelParams::zero_grad() {
  for (auto& [path, t] : tensors_) t.zero_grad();
}

ModelParams init_params(const ModelConfig& config) {
  config.validate();
  ModelParams params;
  std::mt19937_64 rng(config.seed);
  materialize(params, encoder_specs(config), rng);
  reset_head(params, config);
  return params;
}

void reset_head(ModelParams& params, const ModelConfig& config) {
  for (const auto& path : params.paths()) {
    if (path.rfind("head.", 0) == 0) params.erase(path);
  }
  std::mt19937_64 rng(config.seed ^ kHeadSeedSalt);
  materialize(params, head_specs(config), rng);
}

MaskSet dense_masks(const ModelParams& params) {
  MaskSet masks;
  for (const auto& path : params.prunable_paths()) {
    const Tensor& w = params.at(path);
    masks.emplace(path, SparsityMask(path, w.rows(), w.cols()));
  }
  return masks;
}

Batch Batch::from_sequences(std::span<const std::vector<int>> sequences, int pad_id) {
  if (sequences.empty()) throw InputError("batch needs at least one sequence");
  Batch b;
  b.batch_size = static_cast<Index>(sequences.size());
  for (const auto& s : sequences) {
    if (s.empty()) throw InputError("batch sequences must be nonempty");
    b.seq_len = std::max<Index>(b.seq_len, static_cast<Index>(s.size()));
  }
  b.ids.assign(static_cast<std::size_t>(b.batch_size * b.seq_len), pad_id);
  b.valid.assign(b.ids.size(), 0);
  for (Index i = 0; i < b.batch_size; ++i) {
    const auto& s = sequences[static_cast<std::size_t>(i)];
    std::copy(s.begin(), s.end(), b.ids.begin() + i * b.seq_len);
    std::fill_n(b.valid.begin() + i * b.seq_len, s.size(), 1);
  }
  return b;
}

Var attention(Var q, Var k, Var v, std::span<const std::uint8_t> key_valid) {
  if (q.cols() != k.cols() || k.rows() != v.rows() || q.cols() <= 0) {
    throw DimensionError("attention: Q [" + std::to_string(q.rows()) + "x" + std::to_string(q.cols()) + "], K [" +
                         std::to_string(k.rows()) + "x" + std::to_string(k.cols()) + "], V [" +
                         std::to_string(v.rows()) + "x" + std::to_string(v.cols()) + "] are incompatible");
  }
  if (static_cast<Index>(key_valid.size()) != k.rows()) {
    throw DimensionError("attention: pad mask length does not match key count");
  }
  Var scores = scale(matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(q.cols())));
  if (std::find(key_valid.begin(), key_valid.end(), 0) != key_valid.end()) {
    Matrix penalty = Matrix::Zero(q.rows(), k.rows());
    for (Index j = 0; j < k.rows(); ++j) {
      if (!key_valid[static_cast<std::size_t>(j)]) penalty.col(j).setConstant(kPadPenalty);
    }
    scores = add_constant(scores, penalty);
  }
  return matmul(softmax(scores), v);
}

Var weight(Graph& graph, ModelParams& params, const std::string& path, const ForwardContext& ctx) {
  Var w = graph.parameter(params.at(path));
  if (ctx.masks != nullptr) {
    auto it = ctx.masks->find(path);
    if (it != ctx.masks->end()) w = mul_constant(w, it->second.as_matrix());
  }
  return w;
}

Var encoder_layer_forward(Graph& graph, const ModelConfig& config, ModelParams& params, int layer, Var x,
                          const Batch& batch, const ForwardContext& ctx) {
  if (x.cols() != config.hidden_dim) throw DimensionError("encoder layer: input width differs from hidden_dim");
  if (x.rows() != batch.batch_size * batch.seq_len) throw DimensionError("encoder layer: rows differ from batch");
  const std::string p = layer_prefix(layer);
  const Index s = batch.seq_len;
  const Index d = config.head_dim();

  Var a = norm(graph, params, x, p + "attn_norm", config.layer_norm_eps);
  Var q = affine(graph, params, a, p + "attn.q_proj", ctx);
  Var k = affine(graph, params, a, p + "attn.k_proj", ctx);
  Var v = affine(graph, params, a, p + "attn.v_proj", ctx);
  std::vector<Var> sequences;
  sequences.reserve(static_cast<std::size_t>(batch.batch_size));
  std::vector<Var> heads(static_cast<std::size_t>(config.num_heads));
  for (Index b = 0; b < batch.batch_size; ++b) {
    const auto key_valid = batch.valid_row(b);
    for (int h = 0; h < config.num_heads; ++h) {
      heads[static_cast<std::size_t>(h)] = attention(slice(q, b * s, h * d, s, d), slice(k, b * s, h * d, s, d),
                                                     slice(v, b * s, h * d, s, d), key_valid);
    }
    sequences.push_back(config.num_heads == 1 ? heads[0] : concat_cols(heads));
  }
  Var context = sequences.size() == 1 ? sequences[0] : concat_rows(sequences);
  x = x + dropout(affine(graph, params, context, p + "attn.out_proj", ctx), config.dropout, ctx);

  Var f = norm(graph, params, x, p + "ffn_norm", config.layer_norm_eps);
  f = gelu(affine(graph, params, f, p + "ffn.up", ctx));
  f = affine(graph, params, f, p + "ffn.down", ctx);
  return x + dropout(f, config.dropout, ctx);
}

Var encode(Graph& graph, const ModelConfig& config, ModelParams& params, const Batch& batch,
           const ForwardContext& ctx) {
  if (batch.seq_len > config.max_seq_len) {
    throw InputError("sequence length " + std::to_string(batch.seq_len) + " exceeds max_seq_len " +
                     std::to_string(config.max_seq_len));
  }
  for (int id : batch.ids) {
    if (id < 0 || id >= config.vocab_size) {
      throw InputError("token id " + std::to_string(id) + " outside vocabulary of size " +
                       std::to_string(config.vocab_size));
    }
  }
  std::vector<int> positions(batch.ids.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(static_cast<Index>(i) % batch.seq_len);
  Var x = embedding(graph.parameter(params.at("embeddings.token.weight")), batch.ids) +
          embedding(graph.parameter(params.at("embeddings.position.weight")), positions);
  x = dropout(x, config.dropout, ctx);
  for (int l = 0; l < config.num_layers; ++l) x = encoder_layer_forward(graph, config, params, l, x, batch, ctx);
  return norm(graph, params, x, "final_norm", config.layer_norm_eps);
}

Var mlm_logits(Graph& graph, ModelParams& params, Var hidden, std::span<const Index> rows) {
  return affine(graph, params, gather_rows(hidden, rows), "head.mlm", ForwardContext{});
}

Var token_logits(Graph& graph, ModelParams& params, Var hidden) {
  return affine(graph, params, hidden, "head.token_cls", ForwardContext{});
}

Var sequence_logits(Graph& graph, ModelParams& params, Var hidden, const Batch& batch) {
  std::vector<Index> first(static_cast<std::size_t>(batch.batch_size));
  for (Index b = 0; b < batch.batch_size; ++b) first[static_cast<std::size_t>(b)] = b * batch.seq_len;
  return affine(graph, params, gather_rows(hidden, first), "head.seq_cls", ForwardContext{});
}

SpanLogits span_logits(Graph& graph, ModelParams& params, Var hidden, const Batch& batch) {
  Var z = affine(graph, params, hidden, "head.span_qa", ForwardContext{});
  const Index n = z.rows();
  const Matrix penalty = pad_penalty(batch);
  return {add_constant(reshape(slice(z, 0, 0, n, 1), batch.batch_size, batch.seq_len), penalty),
          add_constant(reshape(slice(z, 0, 1, n, 1), batch.batch_size, batch.seq_len), penalty)};
}

HeadOutput model_forward(std::span<const int> token_ids, const ModelConfig& config, ModelParams& params,
                         const MaskSet* masks) {
  if (token_ids.empty()) throw InputError("model_forward needs at least one token");
  if (masks != nullptr) check_mask_coverage(params, *masks);
  const std::vector<int> seq(token_ids.begin(), token_ids.end());
  const Batch batch = Batch::from_sequences(std::span<const std::vector<int>>(&seq, 1));
  Graph graph;
  ForwardContext ctx;
  ctx.masks = masks;
  Var hidden = encode(graph, config, params, batch, ctx);
  HeadOutput out;
  const Index s = batch.seq_len;
  switch (config.head_kind) {
    case HeadKind::kMlm: {
      std::vector<Index> rows(static_cast<std::size_t>(s));
      for (Index i = 0; i < s; ++i) rows[static_cast<std::size_t>(i)] = i;
      out.logits = Tensor::from_matrix(mlm_logits(graph, params, hidden, rows).value());
      break;
    }
    case HeadKind::kTokenClassification:
      out.logits = Tensor::from_matrix(token_logits(graph, params, hidden).value());
      break;
    case HeadKind::kSequenceClassification: {
      const Matrix z = sequence_logits(graph, params, hidden, batch).value();
      out.logits = Tensor({z.cols()}, std::vector<double>(z.data(), z.data() + z.size()));
      break;
    }
    case HeadKind::kSpanQa: {
      const SpanLogits span = span_logits(graph, params, hidden, batch);
      const Matrix& st = span.start.value();
      const Matrix& en = span.end.value();
      out.start = Tensor({s}, std::vector<double>(st.data(), st.data() + st.size()));
      out.end = Tensor({s}, std::vector<double>(en.data(), en.data() + en.size()));
      break;
    }
  }
  return out;
}

}  // namespace sparsify

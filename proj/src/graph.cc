/* Copyright 2026 The Turbo Serving Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "turbo/graph.h"

#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace turbo {

void ModelConfig::Validate() const {
  if (num_layers < 1 || num_heads < 1 || hidden_size < 1 ||
      intermediate_size < 1 || max_seq_len < 1) {
    throw std::invalid_argument("model config: all sizes must be >= 1");
  }
  if (hidden_size % num_heads != 0) {
    throw std::invalid_argument(
        "model config: hidden_size must be divisible by num_heads");
  }
}

ModelConfig ModelConfig::BertBase() { return ModelConfig{}; }

ModelConfig ModelByName(const std::string& name) {
  if (name == "bert-base") return ModelConfig::BertBase();
  if (name == "distilbert") {
    ModelConfig c;
    c.num_layers = 6;
    return c;
  }
  if (name == "albert-xxlarge") {
    ModelConfig c;
    c.num_layers = 12;
    c.num_heads = 64;
    c.hidden_size = 4096;
    c.intermediate_size = 16384;
    return c;
  }
  throw std::invalid_argument("unknown model '" + name + "'");
}

namespace {

class GraphBuilder {
 public:
  explicit GraphBuilder(FusedGraph* graph) : graph_(graph) {}

  // Appends an op producing a fresh tensor of `elements` floats and returns
  // the tensor's index into graph_->tensors.
  size_t Emit(OpKind kind, std::string name, int64_t elements,
              GemmShape gemm = {}) {
    const OpIndex op = static_cast<OpIndex>(graph_->ops.size());
    const TensorId id = static_cast<TensorId>(graph_->tensors.size());
    graph_->ops.push_back(OpDesc{kind, std::move(name), id, gemm});
    graph_->tensors.push_back(
        TensorUsageRecord{id, op, op, elements * kElementBytes});
    return graph_->tensors.size() - 1;
  }

  // Extends the lifetime of tensor `idx` to cover the most recent op.
  void Use(size_t idx) {
    graph_->tensors[idx].last_op =
        static_cast<OpIndex>(graph_->ops.size()) - 1;
  }

 private:
  FusedGraph* graph_;
};

}  // namespace

FusedGraph BuildEncoderGraph(const ModelConfig& config, int64_t batch,
                             int64_t seq_len, const GraphOptions& options) {
  config.Validate();
  if (batch < 1) throw std::invalid_argument("batch must be >= 1");
  if (seq_len < 1) throw std::invalid_argument("seq_len must be >= 1");
  if (seq_len > config.max_seq_len) {
    throw std::invalid_argument("seq_len " + std::to_string(seq_len) +
                                " exceeds max_seq_len " +
                                std::to_string(config.max_seq_len));
  }

  const int64_t b = batch, s = seq_len, h = config.hidden_size;
  const int64_t heads = config.num_heads, inter = config.intermediate_size;
  const int64_t head_dim = h / heads;
  const int64_t tokens = b * s;

  FusedGraph graph;
  const int64_t layers = options.single_layer ? 1 : config.num_layers;
  graph.repeat = options.single_layer ? config.num_layers : 1;
  GraphBuilder g(&graph);

  // Residual input of the current layer; the first layer reads the model
  // input, which is not planned.
  std::optional<size_t> layer_in;

  for (int64_t layer = 0; layer < layers; ++layer) {
    const size_t qkv = g.Emit(OpKind::kGemm, "qkv_proj", 3 * tokens * h,
                              {tokens, 3 * h, h, 1});
    if (layer_in) g.Use(*layer_in);
    const size_t qkv_heads =
        g.Emit(OpKind::kFused, "bias_split_heads", 3 * tokens * h);
    g.Use(qkv);
    const size_t scores = g.Emit(OpKind::kGemm, "q_kt", b * heads * s * s,
                                 {s, s, head_dim, b * heads});
    g.Use(qkv_heads);
    const size_t probs =
        g.Emit(OpKind::kFused, "mask_softmax", b * heads * s * s);
    g.Use(scores);
    const size_t ctx_heads = g.Emit(OpKind::kGemm, "probs_v", tokens * h,
                                    {s, head_dim, s, b * heads});
    g.Use(probs);
    g.Use(qkv_heads);
    const size_t ctx = g.Emit(OpKind::kFused, "merge_heads", tokens * h);
    g.Use(ctx_heads);
    const size_t attn_out =
        g.Emit(OpKind::kGemm, "attn_out_proj", tokens * h, {tokens, h, h, 1});
    g.Use(ctx);
    const size_t attn_ln =
        g.Emit(OpKind::kFused, "bias_residual_layernorm", tokens * h);
    g.Use(attn_out);
    if (layer_in) g.Use(*layer_in);
    const size_t ffn_up = g.Emit(OpKind::kGemm, "ffn_up", tokens * inter,
                                 {tokens, inter, h, 1});
    g.Use(attn_ln);
    const size_t ffn_act = g.Emit(OpKind::kFused, "bias_gelu", tokens * inter);
    g.Use(ffn_up);
    const size_t ffn_down = g.Emit(OpKind::kGemm, "ffn_down", tokens * h,
                                   {tokens, h, inter, 1});
    g.Use(ffn_act);
    const size_t out =
        g.Emit(OpKind::kFused, "bias_residual_layernorm", tokens * h);
    g.Use(ffn_down);
    g.Use(attn_ln);
    layer_in = out;
  }
  return graph;
}

int64_t Flops(const ModelConfig& config, int64_t batch, int64_t seq_len) {
  config.Validate();
  if (batch < 1 || seq_len < 1) {
    throw std::invalid_argument("batch and seq_len must be >= 1");
  }
  const int64_t s = seq_len, h = config.hidden_size;
  const int64_t inter = config.intermediate_size;
  // QKV 6sh^2, output projection 2sh^2, FFN 4sh*inter, attention 4s^2h.
  // With inter = 4h this is 24sh^2 + 4s^2h.
  const int64_t per_sequence = 8 * s * h * h + 4 * s * h * inter + 4 * s * s * h;
  return config.num_layers * batch * per_sequence;
}

int64_t GraphGemmFlops(const FusedGraph& graph) {
  int64_t total = 0;
  for (const OpDesc& op : graph.ops) {
    if (op.kind != OpKind::kGemm) continue;
    total += 2 * op.gemm.m * op.gemm.n * op.gemm.k * op.gemm.count;
  }
  return total * graph.repeat;
}

void WriteRecords(std::ostream& out,
                  const std::vector<TensorUsageRecord>& records) {
  for (const TensorUsageRecord& r : records) {
    out << r.tensor_id << ' ' << r.first_op << ' ' << r.last_op << ' '
        << r.size << '\n';
  }
}

std::vector<TensorUsageRecord> ReadRecords(std::istream& in) {
  std::vector<TensorUsageRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    TensorUsageRecord r;
    std::string extra;
    if (!(fields >> r.tensor_id >> r.first_op >> r.last_op >> r.size) ||
        (fields >> extra)) {
      throw std::runtime_error("records line " + std::to_string(line_no) +
                               ": expected 'tensor_id first_op last_op "
                               "size_bytes'");
    }
    if (r.first_op < 0 || r.last_op < r.first_op || r.size <= 0) {
      throw std::runtime_error("records line " + std::to_string(line_no) +
                               ": invalid lifetime or size");
    }
    records.push_back(r);
  }
  return records;
}

}  // namespace turbo

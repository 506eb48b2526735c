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

#ifndef TURBO_GRAPH_H_
#define TURBO_GRAPH_H_

#include <algorithm>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace turbo {

using TensorId = int64_t;
using OpIndex = int64_t;
using Bytes = int64_t;

// Element size of every planned activation (FP32).
inline constexpr Bytes kElementBytes = 4;

struct ModelConfig {
  int64_t num_layers = 12;
  int64_t num_heads = 12;
  int64_t hidden_size = 768;
  int64_t intermediate_size = 3072;
  int64_t max_seq_len = 512;

  // Throws std::invalid_argument when a field is out of range.
  void Validate() const;

  static ModelConfig BertBase();
};

// Resolves a model name ("bert-base", "albert-large", "distilbert") to a
// config. Throws std::invalid_argument for unknown names.
ModelConfig ModelByName(const std::string& name);

// Lifetime of one intermediate tensor along the topological operator order.
struct TensorUsageRecord {
  TensorId tensor_id = 0;
  OpIndex first_op = 0;
  OpIndex last_op = 0;
  Bytes size = 0;

  bool operator==(const TensorUsageRecord&) const = default;
};

// True when the closed lifetime intervals of `a` and `b` intersect.
inline bool LifetimesOverlap(const TensorUsageRecord& a,
                             const TensorUsageRecord& b) {
  return std::max(a.first_op, b.first_op) <= std::min(a.last_op, b.last_op);
}

enum class OpKind { kGemm, kFused };

// A GEMM computing an [m, k] x [k, n] product, repeated `count` times
// (batched matmuls over batch*heads).
struct GemmShape {
  int64_t m = 0;
  int64_t n = 0;
  int64_t k = 0;
  int64_t count = 1;
};

struct OpDesc {
  OpKind kind = OpKind::kFused;
  std::string name;
  TensorId output = 0;
  GemmShape gemm;  // only meaningful for kGemm
};

struct GraphOptions {
  // Emit one encoder layer plus a repeat count instead of unrolling all
  // layers. Offsets computed for the single layer are valid for every layer.
  bool single_layer = false;
};

struct FusedGraph {
  std::vector<OpDesc> ops;
  std::vector<TensorUsageRecord> tensors;
  // Number of times the emitted op sequence runs per inference.
  int64_t repeat = 1;
};

// Builds the fused encoder graph: per layer six GEMMs, each followed by the
// single fused non-GEMM kernel that sits between it and the next GEMM.
FusedGraph BuildEncoderGraph(const ModelConfig& config, int64_t batch,
                             int64_t seq_len, const GraphOptions& options = {});

// Closed-form GEMM FLOPs (2*m*n*k per GEMM) for the whole encoder.
int64_t Flops(const ModelConfig& config, int64_t batch, int64_t seq_len);

// Sum of 2*m*n*k over the GEMM ops of `graph`, scaled by graph.repeat.
int64_t GraphGemmFlops(const FusedGraph& graph);

// Text record format: one `tensor_id first_op last_op size_bytes` per line.
// Blank lines and lines starting with '#' are ignored when reading.
void WriteRecords(std::ostream& out,
                  const std::vector<TensorUsageRecord>& records);
// Throws std::runtime_error naming the offending line on malformed input.
std::vector<TensorUsageRecord> ReadRecords(std::istream& in);

}  // namespace turbo

#endif  // TURBO_GRAPH_H_

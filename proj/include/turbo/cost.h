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

#ifndef TURBO_COST_H_
#define TURBO_COST_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "turbo/graph.h"

namespace turbo {

using Seconds = double;

// Batch latency keyed by (sequence length, batch size).
class CostTable {
 public:
  using Key = std::pair<int64_t, int64_t>;  // (seq_len, batch)

  // Throws std::invalid_argument for non-positive latency or keys.
  void Set(int64_t seq_len, int64_t batch, Seconds latency);
  std::optional<Seconds> Find(int64_t seq_len, int64_t batch) const;

  // Overwrites (or inserts) an entry with a latency observed while serving.
  void Observe(int64_t seq_len, int64_t batch, Seconds latency) {
    Set(seq_len, batch, latency);
  }

  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::map<Key, Seconds>& entries() const { return entries_; }

  // Distinct sequence lengths / batch sizes present, ascending.
  std::vector<int64_t> SeqGrid() const;
  std::vector<int64_t> BatchGrid() const;

  // One message per (seq_len, batch) where latency drops as seq_len grows.
  std::vector<std::string> MonotonicityWarnings() const;

  bool operator==(const CostTable&) const = default;

 private:
  std::map<Key, Seconds> entries_;
};

// CSV `seq_len,batch,latency_s` with a header row; latencies are written with
// 17 significant digits so a reload is bit-exact.
void WriteCostTableCsv(std::ostream& out, const CostTable& table);
CostTable ReadCostTableCsv(std::istream& in);

class MissingCostError : public std::out_of_range {
 public:
  MissingCostError(int64_t seq_len, int64_t batch);
  int64_t seq_len() const { return seq_len_; }
  int64_t batch() const { return batch_; }

 private:
  int64_t seq_len_;
  int64_t batch_;
};

// latency = linear * (GEMM flops linear in s) + quadratic * (attention flops)
//           + overhead.
struct AnalyticCoeffs {
  double linear_s_per_flop = 0.0;
  double quadratic_s_per_flop = 0.0;
  Seconds overhead_s = 1e-3;

  void Validate() const;
};

Seconds AnalyticCost(const ModelConfig& config, const AnalyticCoeffs& coeffs,
                     int64_t seq_len, int64_t batch);

// BERT-base on a single mid-range GPU: ~10 TFLOP/s on the projection and
// FFN GEMMs, attention 4x less efficient, and a 3.3 ms launch floor per
// inference. Used as the default serving cost model.
AnalyticCoeffs DefaultServingCoeffs();

struct CostLookup {
  Seconds latency = 0.0;
  // Set when an interpolated query fell outside the grid and was clamped.
  bool clamped = false;
};

class CostProvider {
 public:
  enum class Kind { kAnalytic, kTable, kInterpolated };

  static CostProvider Analytic(ModelConfig config, AnalyticCoeffs coeffs);
  static CostProvider Table(CostTable table);
  // Requires a full rectangular grid; throws std::invalid_argument otherwise.
  static CostProvider Interpolated(CostTable table);

  Kind kind() const { return kind_; }

  // Batch latency for `batch` requests padded to `seq_len`. Throws
  // MissingCostError for keys a table provider does not cover.
  CostLookup Lookup(int64_t seq_len, int64_t batch) const;
  Seconds operator()(int64_t seq_len, int64_t batch) const {
    return Lookup(seq_len, batch).latency;
  }

  // Lazy update from a serving observation; no-op for analytic providers.
  // Single writer; callers serialize with readers.
  void Observe(int64_t seq_len, int64_t batch, Seconds latency);

  const CostTable* table() const {
    return kind_ == Kind::kAnalytic ? nullptr : &table_;
  }

 private:
  CostLookup Bilinear(int64_t seq_len, int64_t batch) const;

  Kind kind_ = Kind::kAnalytic;
  ModelConfig model_;
  AnalyticCoeffs coeffs_;
  CostTable table_;
  std::vector<int64_t> seq_grid_;
  std::vector<int64_t> batch_grid_;
};

using CostExecutor = std::function<Seconds(int64_t seq_len, int64_t batch)>;

// Raised when the executor fails mid-warm-up; carries every entry measured
// before the failure.
class WarmupError : public std::runtime_error {
 public:
  WarmupError(const std::string& what, CostTable partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const CostTable& partial() const { return partial_; }

 private:
  CostTable partial_;
};

// Runs the executor over the full grid seq_lens x batches.
CostTable Warmup(const CostExecutor& executor,
                 std::span<const int64_t> seq_lens,
                 std::span<const int64_t> batches);

}  // namespace turbo

#endif  // TURBO_COST_H_

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

// Intermediate-tensor memory planning for variable-length inference.
//
// The sequence-length-aware planner packs tensor usage records into a list of
// chunks, reusing byte ranges between tensors whose lifetimes do not
// intersect. Chunks survive across inferences so that a new sequence length
// usually re-plans offsets without touching the device allocator. Two
// baselines are provided for comparison: a single-arena greedy-by-size
// planner, and a bucketed caching allocator that retains freed blocks.

#ifndef TURBO_PLANNER_H_
#define TURBO_PLANNER_H_

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "turbo/graph.h"

namespace turbo {

using ChunkId = int64_t;

inline constexpr Bytes kMiB = Bytes{1} << 20;

inline Bytes AlignUp(Bytes value, Bytes alignment) {
  return (value + alignment - 1) / alignment * alignment;
}

struct Placement {
  TensorUsageRecord record;
  Bytes offset = 0;
};

struct Chunk {
  ChunkId chunk_id = 0;
  Bytes size = 0;
  // Sorted by offset, ties by tensor id.
  std::vector<Placement> assignments;
  // Consecutive inferences in which this chunk held no tensor.
  int64_t idle_inferences = 0;
};

// Largest offset + size over the chunk's assignments.
Bytes HighWaterMark(const Chunk& chunk);

struct MemoryPlan {
  std::vector<Chunk> chunks;
  std::map<TensorId, ChunkId> assigned_chunk;
  std::map<TensorId, Bytes> assigned_offset;

  // Total bytes held by the plan's chunks.
  Bytes Footprint() const;
};

// A chunk is released once it has gone unused for `idle_limit` consecutive
// inferences. A limit of 1 releases unused chunks immediately.
struct ReleasePolicy {
  int64_t idle_limit = 1;

  static ReleasePolicy Immediate() { return {1}; }
  static ReleasePolicy IdleLimit(int64_t n) { return {n}; }
  static ReleasePolicy Never() {
    return {std::numeric_limits<int64_t>::max()};
  }
};

struct PlannerConfig {
  Bytes default_chunk_size = 2 * kMiB;
  double k_scale = 1.2;
  Bytes alignment = 32;
  ReleasePolicy release;

  void Validate() const;
};

struct AllocStats {
  Bytes peak_footprint = 0;
  Bytes bytes_allocated = 0;
  Bytes bytes_freed = 0;
  int64_t device_alloc_calls = 0;
  int64_t device_free_calls = 0;

  AllocStats& operator+=(const AllocStats& other);
};

// Returns the offset at which `t` fits inside `chunk`, or nullopt. Scans the
// residents in offset order; only residents whose lifetime intersects `t`
// constrain the placement. Among the gaps between constraining residents the
// smallest one that fits wins; otherwise the region past the last
// constraining resident is used if it fits. Sizes are rounded up to
// `alignment` before comparison.
std::optional<Bytes> FindGapFromChunk(const TensorUsageRecord& t,
                                      const Chunk& chunk,
                                      Bytes alignment = 1);

struct AllocationResult {
  MemoryPlan plan;
  AllocStats stats;
};

// Plans `records` into `prior_chunks` (the chunk list left by the previous
// inference, possibly empty), appending chunks when no existing chunk has a
// gap. Throws std::invalid_argument on duplicate tensor ids or invalid
// records.
AllocationResult MemAllocate(std::span<const TensorUsageRecord> records,
                             std::vector<Chunk> prior_chunks,
                             const PlannerConfig& config);

// Greedy-by-size offset calculation over a single unbounded arena. The
// returned plan has one chunk sized to the high-water mark.
MemoryPlan PlanGsoc(std::span<const TensorUsageRecord> records,
                    Bytes alignment = 1);

// Stateful wrapper that carries chunks and accumulated stats across
// inferences. Not thread-safe; one serving thread owns a session.
class SequenceAwareAllocator {
 public:
  explicit SequenceAwareAllocator(PlannerConfig config = {});

  const MemoryPlan& Plan(std::span<const TensorUsageRecord> records);

  const MemoryPlan& last_plan() const { return last_plan_; }
  const AllocStats& stats() const { return stats_; }
  Bytes Footprint() const { return last_plan_.Footprint(); }

 private:
  PlannerConfig config_;
  MemoryPlan last_plan_;
  AllocStats stats_;
};

// Pairwise soundness check. Returns a human-readable description of each
// violation: missing or duplicate assignment, unknown chunk, a tensor that
// spills past its chunk, or two live-overlapping tensors sharing bytes.
std::vector<std::string> VerifyPlan(std::span<const TensorUsageRecord> records,
                                    const MemoryPlan& plan);

enum class TraceOp { kAlloc, kFree };

struct TraceEvent {
  TraceOp op = TraceOp::kAlloc;
  TensorId tensor_id = 0;
  Bytes size = 0;
};

// Alloc/free sequence a runtime without a planner would issue for one
// inference: allocate at first use, free after last use.
std::vector<TraceEvent> BuildAllocFreeTrace(
    std::span<const TensorUsageRecord> records);

struct CachingAllocatorConfig {
  Bytes min_block = 512;
  // Free cached bytes above this cap go back to the device.
  Bytes max_cached_bytes = std::numeric_limits<Bytes>::max();
};

// Power-of-two bucketed caching allocator. Freed blocks are kept in a per-bin
// free list and handed back to later requests of the same bin.
class CachingAllocator {
 public:
  explicit CachingAllocator(CachingAllocatorConfig config = {});

  // Throws std::invalid_argument if `id` is already live.
  void Alloc(TensorId id, Bytes size);
  // Throws std::invalid_argument if `id` is not live.
  void Free(TensorId id);
  void Apply(const TraceEvent& event);
  // Returns every cached block to the device (session end).
  void ReleaseAll();

  Bytes Footprint() const { return held_bytes_; }
  const AllocStats& stats() const { return stats_; }

  Bytes BinSize(Bytes size) const;

 private:
  CachingAllocatorConfig config_;
  std::unordered_map<TensorId, Bytes> live_;  // id -> bin size
  std::map<Bytes, int64_t> free_blocks_;      // bin size -> count
  Bytes cached_bytes_ = 0;
  Bytes held_bytes_ = 0;
  AllocStats stats_;
};

// Runs a whole trace through a fresh CachingAllocator. Blocks still cached
// at the end are not released, so device_free_calls only counts cap-driven
// releases.
AllocStats SimulateCachingAllocator(std::span<const TraceEvent> trace,
                                    const CachingAllocatorConfig& config = {});

}  // namespace turbo

#endif  // TURBO_PLANNER_H_

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

#include "turbo/planner.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace turbo {

Bytes HighWaterMark(const Chunk& chunk) {
  Bytes mark = 0;
  for (const Placement& p : chunk.assignments) {
    mark = std::max(mark, p.offset + p.record.size);
  }
  return mark;
}

Bytes MemoryPlan::Footprint() const {
  Bytes total = 0;
  for (const Chunk& c : chunks) total += c.size;
  return total;
}

void PlannerConfig::Validate() const {
  if (default_chunk_size <= 0) {
    throw std::invalid_argument("default_chunk_size must be > 0");
  }
  if (!(k_scale >= 1.0)) throw std::invalid_argument("k_scale must be >= 1");
  if (alignment < 1) throw std::invalid_argument("alignment must be >= 1");
  if (release.idle_limit < 1) {
    throw std::invalid_argument("release idle limit must be >= 1");
  }
}

AllocStats& AllocStats::operator+=(const AllocStats& other) {
  peak_footprint = std::max(peak_footprint, other.peak_footprint);
  bytes_allocated += other.bytes_allocated;
  bytes_freed += other.bytes_freed;
  device_alloc_calls += other.device_alloc_calls;
  device_free_calls += other.device_free_calls;
  return *this;
}

std::optional<Bytes> FindGapFromChunk(const TensorUsageRecord& t,
                                      const Chunk& chunk, Bytes alignment) {
  const Bytes size = AlignUp(t.size, alignment);
  Bytes smallest_gap = std::numeric_limits<Bytes>::max();
  Bytes prev_offset = 0;
  std::optional<Bytes> best_offset;
  for (const Placement& x : chunk.assignments) {
    if (!LifetimesOverlap(t, x.record)) continue;
    const Bytes gap = x.offset - prev_offset;
    if (gap >= size && gap < smallest_gap) {
      smallest_gap = gap;
      best_offset = prev_offset;
    }
    prev_offset =
        std::max(prev_offset, x.offset + AlignUp(x.record.size, alignment));
  }
  if (!best_offset && chunk.size - prev_offset >= size) {
    best_offset = prev_offset;
  }
  return best_offset;
}

namespace {

void ValidateRecords(std::span<const TensorUsageRecord> records) {
  std::unordered_set<TensorId> seen;
  for (const TensorUsageRecord& r : records) {
    if (r.first_op < 0 || r.last_op < r.first_op || r.size <= 0) {
      throw std::invalid_argument("tensor " + std::to_string(r.tensor_id) +
                                  ": invalid lifetime or size");
    }
    if (!seen.insert(r.tensor_id).second) {
      throw std::invalid_argument("duplicate tensor id " +
                                  std::to_string(r.tensor_id));
    }
  }
}

// Non-increasing size; equal sizes by ascending tensor id.
std::vector<TensorUsageRecord> SortForPlacement(
    std::span<const TensorUsageRecord> records) {
  std::vector<TensorUsageRecord> sorted(records.begin(), records.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const TensorUsageRecord& a, const TensorUsageRecord& b) {
              if (a.size != b.size) return a.size > b.size;
              return a.tensor_id < b.tensor_id;
            });
  return sorted;
}

void Insert(Chunk& chunk, const TensorUsageRecord& t, Bytes offset) {
  Placement p{t, offset};
  auto pos = std::upper_bound(
      chunk.assignments.begin(), chunk.assignments.end(), p,
      [](const Placement& a, const Placement& b) {
        if (a.offset != b.offset) return a.offset < b.offset;
        return a.record.tensor_id < b.record.tensor_id;
      });
  chunk.assignments.insert(pos, p);
}

}  // namespace

AllocationResult MemAllocate(std::span<const TensorUsageRecord> records,
                             std::vector<Chunk> prior_chunks,
                             const PlannerConfig& config) {
  config.Validate();
  ValidateRecords(records);

  AllocationResult result;
  MemoryPlan& plan = result.plan;
  AllocStats& stats = result.stats;

  std::vector<Chunk> chunks = std::move(prior_chunks);
  ChunkId next_id = 0;
  for (Chunk& c : chunks) {
    c.assignments.clear();
    next_id = std::max(next_id, c.chunk_id + 1);
  }

  for (const TensorUsageRecord& t : SortForPlacement(records)) {
    bool assigned = false;
    for (Chunk& chunk : chunks) {
      if (auto offset = FindGapFromChunk(t, chunk, config.alignment)) {
        Insert(chunk, t, *offset);
        plan.assigned_chunk[t.tensor_id] = chunk.chunk_id;
        plan.assigned_offset[t.tensor_id] = *offset;
        assigned = true;
        break;
      }
    }
    if (assigned) continue;

    const Bytes extent = AlignUp(t.size, config.alignment);
    const auto scaled = static_cast<Bytes>(
        std::ceil(static_cast<double>(extent) * config.k_scale));
    Chunk chunk;
    chunk.chunk_id = next_id++;
    chunk.size =
        AlignUp(std::max(config.default_chunk_size, scaled), config.alignment);
    Insert(chunk, t, 0);
    plan.assigned_chunk[t.tensor_id] = chunk.chunk_id;
    plan.assigned_offset[t.tensor_id] = 0;
    stats.bytes_allocated += chunk.size;
    ++stats.device_alloc_calls;
    chunks.push_back(std::move(chunk));
  }

  for (const Chunk& c : chunks) stats.peak_footprint += c.size;

  for (Chunk& c : chunks) {
    if (!c.assignments.empty()) {
      c.idle_inferences = 0;
      plan.chunks.push_back(std::move(c));
      continue;
    }
    if (++c.idle_inferences >= config.release.idle_limit) {
      stats.bytes_freed += c.size;
      ++stats.device_free_calls;
    } else {
      plan.chunks.push_back(std::move(c));
    }
  }
  return result;
}

MemoryPlan PlanGsoc(std::span<const TensorUsageRecord> records,
                    Bytes alignment) {
  if (alignment < 1) throw std::invalid_argument("alignment must be >= 1");
  ValidateRecords(records);
  Chunk arena;
  arena.size = std::numeric_limits<Bytes>::max() / 4;
  MemoryPlan plan;
  for (const TensorUsageRecord& t : SortForPlacement(records)) {
    // The arena is unbounded, so a gap always exists.
    const Bytes offset = *FindGapFromChunk(t, arena, alignment);
    Insert(arena, t, offset);
    plan.assigned_chunk[t.tensor_id] = arena.chunk_id;
    plan.assigned_offset[t.tensor_id] = offset;
  }
  Bytes mark = 0;
  for (const Placement& p : arena.assignments) {
    mark = std::max(mark, p.offset + AlignUp(p.record.size, alignment));
  }
  arena.size = mark;
  plan.chunks.push_back(std::move(arena));
  return plan;
}

SequenceAwareAllocator::SequenceAwareAllocator(PlannerConfig config)
    : config_(config) {
  config_.Validate();
}

const MemoryPlan& SequenceAwareAllocator::Plan(
    std::span<const TensorUsageRecord> records) {
  AllocationResult result =
      MemAllocate(records, std::move(last_plan_.chunks), config_);
  last_plan_ = std::move(result.plan);
  stats_ += result.stats;
  return last_plan_;
}

std::vector<std::string> VerifyPlan(std::span<const TensorUsageRecord> records,
                                    const MemoryPlan& plan) {
  std::vector<std::string> violations;
  std::map<ChunkId, Bytes> chunk_size;
  for (const Chunk& c : plan.chunks) {
    if (!chunk_size.emplace(c.chunk_id, c.size).second) {
      violations.push_back("duplicate chunk id " + std::to_string(c.chunk_id));
    }
  }

  struct Located {
    TensorUsageRecord record;
    Bytes offset;
  };
  std::map<ChunkId, std::vector<Located>> by_chunk;
  std::unordered_set<TensorId> seen;
  for (const TensorUsageRecord& r : records) {
    const std::string name = "tensor " + std::to_string(r.tensor_id);
    if (!seen.insert(r.tensor_id).second) {
      violations.push_back(name + " appears twice in the input");
      continue;
    }
    auto chunk_it = plan.assigned_chunk.find(r.tensor_id);
    auto offset_it = plan.assigned_offset.find(r.tensor_id);
    if (chunk_it == plan.assigned_chunk.end() ||
        offset_it == plan.assigned_offset.end()) {
      violations.push_back(name + " is not assigned");
      continue;
    }
    auto size_it = chunk_size.find(chunk_it->second);
    if (size_it == chunk_size.end()) {
      violations.push_back(name + " refers to unknown chunk " +
                           std::to_string(chunk_it->second));
      continue;
    }
    const Bytes offset = offset_it->second;
    if (offset < 0 || offset + r.size > size_it->second) {
      violations.push_back(name + " spills past chunk " +
                           std::to_string(chunk_it->second));
    }
    by_chunk[chunk_it->second].push_back({r, offset});
  }
  for (const auto& [id, chunk] : plan.assigned_chunk) {
    if (!seen.count(id)) {
      violations.push_back("tensor " + std::to_string(id) +
                           " is assigned but absent from the input");
    }
  }

  for (const auto& [id, tensors] : by_chunk) {
    for (size_t i = 0; i < tensors.size(); ++i) {
      for (size_t j = i + 1; j < tensors.size(); ++j) {
        const Located& a = tensors[i];
        const Located& b = tensors[j];
        if (!LifetimesOverlap(a.record, b.record)) continue;
        const bool disjoint = a.offset + a.record.size <= b.offset ||
                              b.offset + b.record.size <= a.offset;
        if (!disjoint) {
          violations.push_back(
              "tensors " + std::to_string(a.record.tensor_id) + " and " +
              std::to_string(b.record.tensor_id) + " overlap in chunk " +
              std::to_string(id));
        }
      }
    }
  }
  return violations;
}

std::vector<TraceEvent> BuildAllocFreeTrace(
    std::span<const TensorUsageRecord> records) {
  std::vector<TensorUsageRecord> order(records.begin(), records.end());
  OpIndex last = -1;
  for (const auto& r : order) last = std::max(last, r.last_op);
  std::sort(order.begin(), order.end(),
            [](const TensorUsageRecord& a, const TensorUsageRecord& b) {
              return a.tensor_id < b.tensor_id;
            });

  std::vector<TraceEvent> trace;
  trace.reserve(order.size() * 2);
  for (OpIndex op = 0; op <= last; ++op) {
    for (const auto& r : order) {
      if (r.first_op == op) trace.push_back({TraceOp::kAlloc, r.tensor_id, r.size});
    }
    for (const auto& r : order) {
      if (r.last_op == op) trace.push_back({TraceOp::kFree, r.tensor_id, r.size});
    }
  }
  return trace;
}

CachingAllocator::CachingAllocator(CachingAllocatorConfig config)
    : config_(config) {
  if (config_.min_block < 1) {
    throw std::invalid_argument("min_block must be >= 1");
  }
}

Bytes CachingAllocator::BinSize(Bytes size) const {
  Bytes bin = config_.min_block;
  while (bin < size) bin *= 2;
  return bin;
}

void CachingAllocator::Alloc(TensorId id, Bytes size) {
  if (size <= 0) {
    throw std::invalid_argument("alloc of tensor " + std::to_string(id) +
                                " has non-positive size");
  }
  if (live_.count(id)) {
    throw std::invalid_argument("tensor " + std::to_string(id) +
                                " allocated twice without free");
  }
  const Bytes bin = BinSize(size);
  auto it = free_blocks_.find(bin);
  if (it != free_blocks_.end() && it->second > 0) {
    if (--it->second == 0) free_blocks_.erase(it);
    cached_bytes_ -= bin;
  } else {
    held_bytes_ += bin;
    stats_.bytes_allocated += bin;
    ++stats_.device_alloc_calls;
    stats_.peak_footprint = std::max(stats_.peak_footprint, held_bytes_);
  }
  live_.emplace(id, bin);
}

void CachingAllocator::Free(TensorId id) {
  auto it = live_.find(id);
  if (it == live_.end()) {
    throw std::invalid_argument("free of tensor " + std::to_string(id) +
                                " which is not allocated");
  }
  const Bytes bin = it->second;
  live_.erase(it);
  if (cached_bytes_ + bin > config_.max_cached_bytes) {
    held_bytes_ -= bin;
    stats_.bytes_freed += bin;
    ++stats_.device_free_calls;
    return;
  }
  ++free_blocks_[bin];
  cached_bytes_ += bin;
}

void CachingAllocator::Apply(const TraceEvent& event) {
  if (event.op == TraceOp::kAlloc) {
    Alloc(event.tensor_id, event.size);
  } else {
    Free(event.tensor_id);
  }
}

void CachingAllocator::ReleaseAll() {
  for (const auto& [bin, count] : free_blocks_) {
    held_bytes_ -= bin * count;
    stats_.bytes_freed += bin * count;
    stats_.device_free_calls += count;
  }
  free_blocks_.clear();
  cached_bytes_ = 0;
}

AllocStats SimulateCachingAllocator(std::span<const TraceEvent> trace,
                                    const CachingAllocatorConfig& config) {
  CachingAllocator allocator(config);
  for (const TraceEvent& e : trace) allocator.Apply(e);
  return allocator.stats();
}

}  // namespace turbo

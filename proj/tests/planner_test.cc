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

#include <gtest/gtest.h>

#include <random>

#include "oracles.h"

namespace turbo {
namespace {

Chunk ChunkWith(Bytes size, std::vector<Placement> residents) {
  Chunk c;
  c.size = size;
  c.assignments = std::move(residents);
  return c;
}

TEST(FindGapTest, IgnoresResidentWithDisjointLifetime) {
  const TensorUsageRecord t{1, 2, 3, 10};
  const Chunk c = ChunkWith(100, {{{0, 0, 1, 50}, 0}});
  EXPECT_EQ(FindGapFromChunk(t, c), 0);
}

TEST(FindGapTest, PlacesAfterOverlappingResident) {
  const TensorUsageRecord t{1, 2, 3, 10};
  const Chunk c = ChunkWith(100, {{{0, 0, 5, 50}, 0}});
  EXPECT_EQ(FindGapFromChunk(t, c), 50);
}

TEST(FindGapTest, InvalidWhenTailTooSmall) {
  const TensorUsageRecord t{1, 2, 3, 10};
  const Chunk c = ChunkWith(55, {{{0, 0, 5, 50}, 0}});
  EXPECT_EQ(FindGapFromChunk(t, c), std::nullopt);
}

TEST(FindGapTest, PicksSmallestFittingGap) {
  // Residents at [0,10) [30,40) [52,60) [90,100), all live at op 1.
  const Chunk c = ChunkWith(100, {{{0, 0, 2, 10}, 0},
                                  {{1, 0, 2, 10}, 30},
                                  {{2, 0, 2, 8}, 52},
                                  {{3, 0, 2, 10}, 90}});
  // Gaps: 20 at 10, 12 at 40, 30 at 60.
  EXPECT_EQ(FindGapFromChunk({9, 1, 1, 12}, c), 40);
  EXPECT_EQ(FindGapFromChunk({9, 1, 1, 13}, c), 10);
  EXPECT_EQ(FindGapFromChunk({9, 1, 1, 25}, c), 60);
  EXPECT_EQ(FindGapFromChunk({9, 1, 1, 31}, c), std::nullopt);
}

TEST(FindGapTest, AlignmentRoundsSizes) {
  const Chunk c = ChunkWith(128, {{{0, 0, 5, 33}, 0}});
  EXPECT_EQ(FindGapFromChunk({1, 0, 0, 10}, c, 32), 64);
  EXPECT_EQ(FindGapFromChunk({1, 0, 0, 65}, c, 32), std::nullopt);
}

TEST(MemAllocateTest, EmptyInputReleasesPriorChunks) {
  std::vector<Chunk> prior(2);
  prior[0].chunk_id = 0;
  prior[0].size = 2 * kMiB;
  prior[1].chunk_id = 1;
  prior[1].size = 4 * kMiB;
  const AllocationResult r = MemAllocate({}, prior, PlannerConfig{});
  EXPECT_TRUE(r.plan.assigned_chunk.empty());
  EXPECT_TRUE(r.plan.chunks.empty());
  EXPECT_EQ(r.stats.device_free_calls, 2);
  EXPECT_EQ(r.stats.bytes_freed, 6 * kMiB);
}

TEST(MemAllocateTest, OneMegabyteTensorGetsDefaultChunk) {
  const std::vector<TensorUsageRecord> records{{7, 0, 3, kMiB}};
  const AllocationResult r = MemAllocate(records, {}, PlannerConfig{});
  ASSERT_EQ(r.plan.chunks.size(), 1u);
  EXPECT_EQ(r.plan.chunks[0].size, 2 * kMiB);
  EXPECT_EQ(r.plan.assigned_offset.at(7), 0);
  EXPECT_EQ(r.stats.device_alloc_calls, 1);
}

TEST(MemAllocateTest, LargeTensorChunkIsScaled) {
  const std::vector<TensorUsageRecord> records{{0, 0, 0, 10 * kMiB}};
  const AllocationResult r = MemAllocate(records, {}, PlannerConfig{});
  ASSERT_EQ(r.plan.chunks.size(), 1u);
  EXPECT_EQ(r.plan.chunks[0].size, AlignUp(12 * kMiB, 32));
}

TEST(MemAllocateTest, RejectsDuplicateIdsAndBadConfig) {
  const std::vector<TensorUsageRecord> dup{{1, 0, 1, 8}, {1, 2, 3, 8}};
  EXPECT_THROW(MemAllocate(dup, {}, PlannerConfig{}), std::invalid_argument);
  PlannerConfig bad;
  bad.k_scale = 0.5;
  EXPECT_THROW(MemAllocate({}, {}, bad), std::invalid_argument);
  bad = PlannerConfig{};
  bad.default_chunk_size = 0;
  EXPECT_THROW(MemAllocate({}, {}, bad), std::invalid_argument);
}

TEST(MemAllocateTest, ProcessesLargestFirstWithIdTieBreak) {
  PlannerConfig cfg;
  cfg.alignment = 1;
  cfg.default_chunk_size = 64;
  // All live together: larger first, equal sizes by id.
  const std::vector<TensorUsageRecord> records{
      {5, 0, 0, 8}, {2, 0, 0, 16}, {3, 0, 0, 8}};
  const AllocationResult r = MemAllocate(records, {}, cfg);
  EXPECT_EQ(r.plan.assigned_offset.at(2), 0);
  EXPECT_EQ(r.plan.assigned_offset.at(3), 16);
  EXPECT_EQ(r.plan.assigned_offset.at(5), 24);
}

TEST(MemAllocateTest, LongerSequenceNeedsMoreChunks) {
  const ModelConfig bert = ModelConfig::BertBase();
  SequenceAwareAllocator allocator;
  const auto short_graph = BuildEncoderGraph(bert, 1, 200);
  const size_t before = allocator.Plan(short_graph.tensors).chunks.size();
  EXPECT_TRUE(VerifyPlan(short_graph.tensors, allocator.last_plan()).empty());
  const auto long_graph = BuildEncoderGraph(bert, 1, 240);
  const size_t after = allocator.Plan(long_graph.tensors).chunks.size();
  EXPECT_TRUE(VerifyPlan(long_graph.tensors, allocator.last_plan()).empty());
  EXPECT_GT(after, before);
}

TEST(MemAllocateTest, IdenticalSecondCallDoesNotAllocate) {
  const auto graph = BuildEncoderGraph(ModelConfig::BertBase(), 2, 311);
  const AllocationResult first = MemAllocate(graph.tensors, {}, PlannerConfig{});
  EXPECT_GT(first.stats.device_alloc_calls, 0);
  const AllocationResult second =
      MemAllocate(graph.tensors, first.plan.chunks, PlannerConfig{});
  EXPECT_EQ(second.stats.device_alloc_calls, 0);
  EXPECT_EQ(second.stats.device_free_calls, 0);
  EXPECT_EQ(second.plan.assigned_offset, first.plan.assigned_offset);
}

TEST(MemAllocateTest, ReuseHoldsForRandomInputs) {
  std::mt19937_64 rng(11);
  PlannerConfig cfg;
  cfg.default_chunk_size = 256;
  cfg.alignment = 8;
  for (int trial = 0; trial < 200; ++trial) {
    const auto records = testing::RandomRecords(rng, 1 + trial % 30, 300, 20);
    const AllocationResult first = MemAllocate(records, {}, cfg);
    const AllocationResult second = MemAllocate(records, first.plan.chunks, cfg);
    ASSERT_EQ(second.stats.device_alloc_calls, 0) << "trial " << trial;
  }
}

TEST(MemAllocateTest, Deterministic) {
  std::mt19937_64 rng(5);
  const auto records = testing::RandomRecords(rng, 40, 5000, 30);
  PlannerConfig cfg;
  cfg.default_chunk_size = 4096;
  const AllocationResult a = MemAllocate(records, {}, cfg);
  const AllocationResult b = MemAllocate(records, {}, cfg);
  EXPECT_EQ(a.plan.assigned_chunk, b.plan.assigned_chunk);
  EXPECT_EQ(a.plan.assigned_offset, b.plan.assigned_offset);
}

TEST(MemAllocateTest, IdleLimitDefersRelease) {
  PlannerConfig cfg;
  cfg.release = ReleasePolicy::IdleLimit(3);
  SequenceAwareAllocator allocator(cfg);
  const std::vector<TensorUsageRecord> big{{0, 0, 1, 3 * kMiB},
                                           {1, 0, 1, 3 * kMiB}};
  const std::vector<TensorUsageRecord> small{{0, 0, 1, kMiB}};
  EXPECT_EQ(allocator.Plan(big).chunks.size(), 2u);
  EXPECT_EQ(allocator.Plan(small).chunks.size(), 2u);  // idle 1
  EXPECT_EQ(allocator.Plan(small).chunks.size(), 2u);  // idle 2
  EXPECT_EQ(allocator.Plan(small).chunks.size(), 1u);  // idle 3: released
  EXPECT_EQ(allocator.stats().device_free_calls, 1);
  EXPECT_EQ(allocator.stats().device_alloc_calls, 2);
}

TEST(MemAllocateTest, ImmediatePolicyReleasesUnusedChunks) {
  SequenceAwareAllocator allocator;
  const std::vector<TensorUsageRecord> big{{0, 0, 1, 3 * kMiB},
                                           {1, 0, 1, 3 * kMiB}};
  const std::vector<TensorUsageRecord> small{{0, 0, 1, kMiB}};
  allocator.Plan(big);
  const Bytes big_footprint = allocator.Footprint();
  allocator.Plan(small);
  EXPECT_LT(allocator.Footprint(), big_footprint);
  EXPECT_LE(allocator.stats().bytes_freed, allocator.stats().bytes_allocated);
}

TEST(GsocTest, OverlappingTensorsStack) {
  const std::vector<TensorUsageRecord> r{{0, 0, 2, 8}, {1, 1, 3, 8}};
  EXPECT_EQ(PlanGsoc(r).Footprint(), 16);
}

TEST(GsocTest, DisjointTensorsShare) {
  const std::vector<TensorUsageRecord> r{{0, 0, 1, 8}, {1, 2, 3, 8}};
  EXPECT_EQ(PlanGsoc(r).Footprint(), 8);
}

TEST(GsocTest, EmptyInput) {
  const MemoryPlan plan = PlanGsoc({});
  EXPECT_EQ(plan.Footprint(), 0);
}

TEST(GsocTest, WithinQuarterOfBruteForceOptimum) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const auto records = testing::RandomRecords(rng, 6, 64, 8);
    const Bytes optimum = testing::OptimalFootprint(records);
    const MemoryPlan plan = PlanGsoc(records);
    ASSERT_TRUE(VerifyPlan(records, plan).empty());
    EXPECT_GE(plan.Footprint(), optimum);
    EXPECT_LE(static_cast<double>(plan.Footprint()), 1.25 * optimum)
        << "trial " << trial;
  }
}

TEST(OracleTest, OptimalFootprintKnownCases) {
  // Three tensors in a chain of pairwise overlaps: a-b live together, b-c
  // live together, a and c never. Optimum 20 by putting a and c on top of b.
  const std::vector<TensorUsageRecord> chain{
      {0, 0, 1, 10}, {1, 1, 2, 10}, {2, 2, 3, 10}};
  EXPECT_EQ(testing::OptimalFootprint(chain), 20);
  const std::vector<TensorUsageRecord> all{{0, 0, 0, 3}, {1, 0, 0, 4}};
  EXPECT_EQ(testing::OptimalFootprint(all), 7);
}

TEST(SoundnessTest, RandomPlansNeverOverlap) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> pick(0, 2);
  for (int trial = 0; trial < 300; ++trial) {
    const auto records = testing::RandomRecords(rng, 1 + trial % 40, 2000, 25);
    PlannerConfig cfg;
    cfg.default_chunk_size = 512 << pick(rng);
    cfg.k_scale = 1.0 + 0.5 * pick(rng);
    cfg.alignment = Bytes{1} << (2 * pick(rng));
    const AllocationResult r = MemAllocate(records, {}, cfg);
    ASSERT_TRUE(VerifyPlan(records, r.plan).empty()) << "trial " << trial;
    ASSERT_TRUE(VerifyPlan(records, PlanGsoc(records, cfg.alignment)).empty());
  }
}

TEST(VerifyPlanTest, ReportsViolations) {
  const std::vector<TensorUsageRecord> r{{0, 0, 2, 8}, {1, 1, 3, 8}};
  MemoryPlan plan;
  plan.chunks.push_back(Chunk{0, 12, {}, 0});
  plan.assigned_chunk = {{0, 0}, {1, 0}};
  plan.assigned_offset = {{0, 0}, {1, 4}};
  const auto violations = VerifyPlan(r, plan);
  ASSERT_EQ(violations.size(), 1u);
  EXPECT_NE(violations[0].find("overlap"), std::string::npos);

  plan.assigned_offset[1] = 8;
  EXPECT_EQ(VerifyPlan(r, plan).size(), 1u);  // spills past 12
  plan.chunks[0].size = 16;
  EXPECT_TRUE(VerifyPlan(r, plan).empty());
  plan.assigned_chunk.erase(1);
  EXPECT_EQ(VerifyPlan(r, plan).size(), 1u);  // unassigned
}

TEST(CachingAllocatorTest, SingleAllocFreeKeepsBlock) {
  const std::vector<TraceEvent> trace{{TraceOp::kAlloc, 1, 4096},
                                      {TraceOp::kFree, 1, 4096}};
  const AllocStats s = SimulateCachingAllocator(trace);
  EXPECT_EQ(s.peak_footprint, 4096);
  EXPECT_EQ(s.device_free_calls, 0);

  CachingAllocator a;
  for (const auto& e : trace) a.Apply(e);
  EXPECT_EQ(a.Footprint(), 4096);
  a.ReleaseAll();
  EXPECT_EQ(a.Footprint(), 0);
  EXPECT_EQ(a.stats().device_free_calls, 1);
}

TEST(CachingAllocatorTest, RejectsMalformedTrace) {
  const std::vector<TraceEvent> free_first{{TraceOp::kFree, 1, 64}};
  EXPECT_THROW(SimulateCachingAllocator(free_first), std::invalid_argument);
  const std::vector<TraceEvent> double_alloc{{TraceOp::kAlloc, 1, 64},
                                             {TraceOp::kAlloc, 1, 64}};
  EXPECT_THROW(SimulateCachingAllocator(double_alloc), std::invalid_argument);
}

TEST(CachingAllocatorTest, ReusesFreedBlocksOfSameBin) {
  CachingAllocator a;
  a.Alloc(1, 3000);
  a.Free(1);
  a.Alloc(2, 4000);  // same 4 KiB bin
  EXPECT_EQ(a.stats().device_alloc_calls, 1);
  a.Alloc(3, 5000);
  EXPECT_EQ(a.stats().device_alloc_calls, 2);
  EXPECT_EQ(a.Footprint(), 4096 + 8192);
}

TEST(CachingAllocatorTest, CapReturnsMemory) {
  CachingAllocator a({.min_block = 512, .max_cached_bytes = 1024});
  a.Alloc(1, 1024);
  a.Alloc(2, 1024);
  a.Free(1);
  a.Free(2);  // over the cap
  EXPECT_EQ(a.stats().device_free_calls, 1);
  EXPECT_EQ(a.Footprint(), 1024);
}

TEST(CachingAllocatorTest, FootprintStaysAtPeakAfterLongestRequest) {
  const ModelConfig bert = ModelConfig::BertBase();
  CachingAllocator a;
  Bytes peak_seen = 0;
  bool after_peak = false;
  for (int64_t len : {50, 150, 300, 450, 300, 150, 50}) {
    for (const auto& e : BuildAllocFreeTrace(BuildEncoderGraph(bert, 1, len).tensors)) {
      a.Apply(e);
    }
    if (len == 450) after_peak = true;
    if (after_peak) {
      if (peak_seen == 0) peak_seen = a.Footprint();
      EXPECT_EQ(a.Footprint(), peak_seen);
    }
  }
}

TEST(CachingAllocatorTest, TraceFollowsLifetimes) {
  const std::vector<TensorUsageRecord> r{{0, 0, 1, 10}, {1, 1, 1, 20}};
  const auto trace = BuildAllocFreeTrace(r);
  ASSERT_EQ(trace.size(), 4u);
  EXPECT_EQ(trace[0].op, TraceOp::kAlloc);
  EXPECT_EQ(trace[0].tensor_id, 0);
  EXPECT_EQ(trace[1].op, TraceOp::kAlloc);
  EXPECT_EQ(trace[1].tensor_id, 1);
  EXPECT_EQ(trace[2].op, TraceOp::kFree);
  EXPECT_EQ(trace[3].op, TraceOp::kFree);
}

TEST(ComparisonTest, SequenceAwarePeakBelowCaching) {
  const ModelConfig bert = ModelConfig::BertBase();
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int64_t> len(5, 500);
  SequenceAwareAllocator planner;
  CachingAllocator caching;
  for (int i = 0; i < 20; ++i) {
    const auto records = BuildEncoderGraph(bert, 1, len(rng)).tensors;
    planner.Plan(records);
    for (const auto& e : BuildAllocFreeTrace(records)) caching.Apply(e);
  }
  EXPECT_LE(planner.stats().peak_footprint, caching.stats().peak_footprint);
}

// Equal-size tensors 0 and 3 go first; 0 takes offset 0 and tensor 2 ends up
// past both. Placing 3 at 0 instead packs everything into 1950 bytes.
TEST(GsocTest, GreedyCanMissOptimumByMoreThanQuarter) {
  const std::vector<TensorUsageRecord> r{{0, 8, 8, 975}, {1, 5, 6, 11},
                                         {2, 4, 7, 615}, {3, 5, 8, 975},
                                         {4, 2, 4, 959}, {5, 3, 7, 207}};
  EXPECT_EQ(testing::OptimalFootprint(r), 1950);
  EXPECT_EQ(PlanGsoc(r).Footprint(), 2772);
  EXPECT_TRUE(VerifyPlan(r, PlanGsoc(r)).empty());
}

}  // namespace
}  // namespace turbo

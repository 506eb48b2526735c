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

#ifndef TURBO_SCHEDULER_H_
#define TURBO_SCHEDULER_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "turbo/cost.h"

namespace turbo {

using RequestId = int64_t;

struct Request {
  RequestId request_id = 0;
  int64_t seq_len = 1;
  Seconds arrival_time = 0.0;
};

struct Batch {
  std::vector<RequestId> request_ids;
  int64_t padded_len = 0;
};

struct BatchPlan {
  std::vector<Batch> batches;
  Seconds predicted_cost = 0.0;
};

// Cost of running `count` requests padded to `padded_len` as one batch, i.e.
// cached_cost[padded_len][count] * count.
using BatchCostFn = std::function<Seconds(int64_t padded_len, int64_t count)>;

// Batch cost taken straight from a provider whose entries are batch
// latencies.
BatchCostFn BatchCostFrom(const CostProvider& provider);
// Batch cost from a per-request cost table: per_request(len, count) * count.
BatchCostFn BatchCostFromPerRequest(BatchCostFn per_request);

// Ascending seq_len; equal lengths keep arrival order, then request id.
std::vector<Request> SortByLength(std::span<const Request> requests);

// Optimal contiguous partition of the length-sorted requests. Batches are
// returned in ascending length order. O(n^2) cost evaluations.
// Throws std::invalid_argument on an empty request list; cost lookups that
// fail (MissingCostError) propagate.
BatchPlan DpSchedule(std::span<const Request> requests,
                     const BatchCostFn& batch_cost);

// Everything in one batch padded to the longest request.
BatchPlan NaiveSchedule(std::span<const Request> requests,
                        const BatchCostFn& batch_cost);

// One batch per request, in arrival order.
BatchPlan NoBatchSchedule(std::span<const Request> requests,
                          const BatchCostFn& batch_cost);

enum class SchedulerAlgo { kDp, kNaive, kNoBatch };

SchedulerAlgo ParseSchedulerAlgo(const std::string& name);
std::string ToString(SchedulerAlgo algo);

BatchPlan Schedule(SchedulerAlgo algo, std::span<const Request> requests,
                   const BatchCostFn& batch_cost);

struct TriggerPolicy {
  enum class Kind { kHungry, kLazy };

  Kind kind = Kind::kHungry;
  // Lazy only: fire once the queue head has waited this long.
  Seconds timeout = 0.01;
  // Lazy fires at this queue length. Both policies cap the number of
  // requests handed to one scheduler run at max_batch.
  int64_t max_batch = 20;
  // Force a run once waiting time plus estimated execution exceeds half of
  // this. Infinity disables the rule.
  Seconds latency_constraint = std::numeric_limits<Seconds>::infinity();

  void Validate() const;
};

// Decides whether to run the scheduler now. A run needs an idle runtime and a
// non-empty queue. Hungry fires on that alone; lazy additionally waits for
// max_batch requests or the timeout; either fires early under the
// half-latency-constraint rule.
bool ShouldTrigger(const TriggerPolicy& policy, Seconds queue_head_arrival,
                   Seconds now, Seconds pending_estimated_exec,
                   int64_t queue_len, bool runtime_idle);

// Request file CSV: `id,seq_len,arrival` (header optional).
std::vector<Request> ReadRequestsCsv(std::istream& in);
// `batch_idx,request_id,padded_len`.
void WriteBatchPlanCsv(std::ostream& out, const BatchPlan& plan);

}  // namespace turbo

#endif  // TURBO_SCHEDULER_H_

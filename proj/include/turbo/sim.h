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

// Discrete-event model of a single-GPU serving loop: Poisson arrivals feed a
// message queue, a trigger policy decides when to run the batch scheduler,
// and the resulting batches run back to back for the time the cost provider
// predicts.
//
// Random streams. Arrival gaps and sequence lengths come from two
// std::mt19937_64 engines, seeded with `seed` and
// `seed ^ 0x9E3779B97F4A7C15` respectively. A draw u in [0, 1) is
// (engine() >> 11) * 2^-53. The gap is -log1p(-u) / rate and the length is
// lo + floor(u * (hi - lo + 1)). Arrivals stop at the first time >= duration.

#ifndef TURBO_SIM_H_
#define TURBO_SIM_H_

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "turbo/cost.h"
#include "turbo/scheduler.h"

namespace turbo {

struct Workload {
  double rate = 100.0;  // requests per second
  int64_t len_lo = 2;
  int64_t len_hi = 100;
  Seconds duration = 60.0;
  uint64_t seed = 1;

  void Validate() const;
};

std::vector<Request> GenerateArrivals(const Workload& workload);

struct SimEvent {
  enum class Kind { kArrival, kBatchStart, kBatchEnd, kWake };

  Seconds time = 0.0;
  Kind kind = Kind::kArrival;
  // Request index for arrivals, batch index within the running plan
  // otherwise.
  int64_t index = 0;
};

struct RequestTrace {
  RequestId request_id = 0;
  int64_t seq_len = 0;
  Seconds arrival = 0.0;
  Seconds start = 0.0;
  Seconds end = 0.0;
  int64_t batch_size = 0;
  int64_t padded_len = 0;
};

struct SimReport {
  int64_t arrivals = 0;
  int64_t completed = 0;
  int64_t dropped = 0;
  int64_t batches = 0;
  double request_throughput = 0.0;  // arrivals / last arrival time
  double serving_throughput = 0.0;  // completions / last completion time
  Seconds latency_avg = 0.0;
  Seconds latency_min = 0.0;
  Seconds latency_max = 0.0;
  // Least-squares growth of the queue length over the second half of the
  // arrival window, in requests.
  double queue_growth = 0.0;
  bool diverged = false;
  // (time, queued requests) sampled after every arrival.
  std::vector<std::pair<Seconds, int64_t>> queue_length;
  // In arrival order.
  std::vector<RequestTrace> trace;
};

// Throws MissingCostError when a batch needs an uncovered cost key.
SimReport RunSim(const Workload& workload, const TriggerPolicy& policy,
                 SchedulerAlgo algo, const CostProvider& costs);

struct CriticalPointOptions {
  double throughput_ratio = 0.98;
  int iterations = 20;
  double min_rate = 0.5;
  double max_rate = 1e6;
};

// True when serving keeps up with `rate`: serving throughput is at least
// ratio * request throughput and the queue does not diverge.
bool IsStable(const SimReport& report, double ratio);

// Largest arrival rate (bisection) at which the system is stable. Only the
// rate of `workload` is varied.
double FindCriticalPoint(Workload workload, const TriggerPolicy& policy,
                         SchedulerAlgo algo, const CostProvider& costs,
                         const CriticalPointOptions& options = {});

void WriteSimReport(std::ostream& out, const SimReport& report);
// `request_id,seq_len,arrival,start,end`
void WriteTraceCsv(std::ostream& out, const SimReport& report);

}  // namespace turbo

#endif  // TURBO_SIM_H_

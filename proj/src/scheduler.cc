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

#include "turbo/scheduler.h"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace turbo {

BatchCostFn BatchCostFrom(const CostProvider& provider) {
  return [&provider](int64_t len, int64_t count) {
    return provider(len, count);
  };
}

BatchCostFn BatchCostFromPerRequest(BatchCostFn per_request) {
  return [f = std::move(per_request)](int64_t len, int64_t count) {
    return f(len, count) * static_cast<double>(count);
  };
}

std::vector<Request> SortByLength(std::span<const Request> requests) {
  std::vector<Request> sorted(requests.begin(), requests.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const Request& a, const Request& b) {
                     if (a.seq_len != b.seq_len) return a.seq_len < b.seq_len;
                     if (a.arrival_time != b.arrival_time) {
                       return a.arrival_time < b.arrival_time;
                     }
                     return a.request_id < b.request_id;
                   });
  return sorted;
}

namespace {

void CheckRequests(std::span<const Request> requests) {
  if (requests.empty()) {
    throw std::invalid_argument("scheduler needs at least one request");
  }
  for (const Request& r : requests) {
    if (r.seq_len < 1) {
      throw std::invalid_argument("request " + std::to_string(r.request_id) +
                                  " has seq_len < 1");
    }
  }
}

Batch MakeBatch(const std::vector<Request>& sorted, size_t begin, size_t end) {
  Batch batch;
  for (size_t k = begin; k < end; ++k) {
    batch.request_ids.push_back(sorted[k].request_id);
    batch.padded_len = std::max(batch.padded_len, sorted[k].seq_len);
  }
  return batch;
}

}  // namespace

BatchPlan DpSchedule(std::span<const Request> requests,
                     const BatchCostFn& batch_cost) {
  CheckRequests(requests);
  const std::vector<Request> sorted = SortByLength(requests);
  const size_t n = sorted.size();

  // states[i]: cheapest way to run the first i sorted requests.
  // start_idx[i]: 1-based index of the first request of the last batch.
  std::vector<Seconds> states(n + 1, 0.0);
  std::vector<size_t> start_idx(n + 1, 0);
  for (size_t i = 1; i <= n; ++i) {
    const int64_t cur_length = sorted[i - 1].seq_len;
    Seconds min_cost = states[i - 1] + batch_cost(cur_length, 1);
    size_t start = i;
    for (size_t j = i - 1; j > 0; --j) {
      const auto count = static_cast<int64_t>(i - j + 1);
      const Seconds tmp = states[j - 1] + batch_cost(cur_length, count);
      if (tmp < min_cost) {
        min_cost = tmp;
        start = j;
      }
    }
    states[i] = min_cost;
    start_idx[i] = start;
  }

  BatchPlan plan;
  plan.predicted_cost = states[n];
  for (size_t i = n; i > 0; i = start_idx[i] - 1) {
    plan.batches.push_back(MakeBatch(sorted, start_idx[i] - 1, i));
  }
  std::reverse(plan.batches.begin(), plan.batches.end());
  return plan;
}

BatchPlan NaiveSchedule(std::span<const Request> requests,
                        const BatchCostFn& batch_cost) {
  CheckRequests(requests);
  const std::vector<Request> sorted = SortByLength(requests);
  BatchPlan plan;
  plan.batches.push_back(MakeBatch(sorted, 0, sorted.size()));
  plan.predicted_cost = batch_cost(plan.batches[0].padded_len,
                                   static_cast<int64_t>(sorted.size()));
  return plan;
}

BatchPlan NoBatchSchedule(std::span<const Request> requests,
                          const BatchCostFn& batch_cost) {
  CheckRequests(requests);
  std::vector<Request> fifo(requests.begin(), requests.end());
  std::stable_sort(fifo.begin(), fifo.end(),
                   [](const Request& a, const Request& b) {
                     if (a.arrival_time != b.arrival_time) {
                       return a.arrival_time < b.arrival_time;
                     }
                     return a.request_id < b.request_id;
                   });
  BatchPlan plan;
  for (const Request& r : fifo) {
    plan.batches.push_back(Batch{{r.request_id}, r.seq_len});
    plan.predicted_cost += batch_cost(r.seq_len, 1);
  }
  return plan;
}

SchedulerAlgo ParseSchedulerAlgo(const std::string& name) {
  if (name == "dp") return SchedulerAlgo::kDp;
  if (name == "naive") return SchedulerAlgo::kNaive;
  if (name == "nobatch") return SchedulerAlgo::kNoBatch;
  throw std::invalid_argument("unknown scheduler '" + name + "'");
}

std::string ToString(SchedulerAlgo algo) {
  switch (algo) {
    case SchedulerAlgo::kDp:
      return "dp";
    case SchedulerAlgo::kNaive:
      return "naive";
    case SchedulerAlgo::kNoBatch:
      return "nobatch";
  }
  return "?";
}

BatchPlan Schedule(SchedulerAlgo algo, std::span<const Request> requests,
                   const BatchCostFn& batch_cost) {
  switch (algo) {
    case SchedulerAlgo::kDp:
      return DpSchedule(requests, batch_cost);
    case SchedulerAlgo::kNaive:
      return NaiveSchedule(requests, batch_cost);
    case SchedulerAlgo::kNoBatch:
      return NoBatchSchedule(requests, batch_cost);
  }
  throw std::logic_error("unknown scheduler");
}

void TriggerPolicy::Validate() const {
  if (max_batch < 1) throw std::invalid_argument("max_batch must be >= 1");
  if (kind == Kind::kLazy && !(timeout > 0)) {
    throw std::invalid_argument("lazy timeout must be > 0");
  }
  if (!(latency_constraint > 0)) {
    throw std::invalid_argument("latency constraint must be > 0");
  }
}

bool ShouldTrigger(const TriggerPolicy& policy, Seconds queue_head_arrival,
                   Seconds now, Seconds pending_estimated_exec,
                   int64_t queue_len, bool runtime_idle) {
  if (now < queue_head_arrival) {
    throw std::invalid_argument("trigger evaluated before queue head arrived");
  }
  if (!runtime_idle || queue_len <= 0) return false;
  const Seconds waited = now - queue_head_arrival;
  if (waited + pending_estimated_exec > policy.latency_constraint / 2) {
    return true;
  }
  if (policy.kind == TriggerPolicy::Kind::kHungry) return true;
  return queue_len >= policy.max_batch || waited >= policy.timeout;
}

std::vector<Request> ReadRequestsCsv(std::istream& in) {
  std::vector<Request> requests;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (line_no == 1 && line.find_first_of("0123456789") != 0) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    Request r;
    std::string extra;
    if (!(fields >> r.request_id >> r.seq_len >> r.arrival_time) ||
        (fields >> extra)) {
      throw std::runtime_error("requests line " + std::to_string(line_no) +
                               ": expected 'id,seq_len,arrival'");
    }
    if (r.seq_len < 1) {
      throw std::runtime_error("requests line " + std::to_string(line_no) +
                               ": seq_len must be >= 1");
    }
    requests.push_back(r);
  }
  return requests;
}

void WriteBatchPlanCsv(std::ostream& out, const BatchPlan& plan) {
  out << "batch_idx,request_id,padded_len\n";
  for (size_t b = 0; b < plan.batches.size(); ++b) {
    for (RequestId id : plan.batches[b].request_ids) {
      out << b << ',' << id << ',' << plan.batches[b].padded_len << '\n';
    }
  }
}

}  // namespace turbo

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

#include "turbo/sim.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <ostream>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>

namespace turbo {

void Workload::Validate() const {
  if (!(rate > 0)) throw std::invalid_argument("workload rate must be > 0");
  if (len_lo < 1 || len_hi < len_lo) {
    throw std::invalid_argument("workload needs 1 <= len_lo <= len_hi");
  }
  if (!(duration > 0)) {
    throw std::invalid_argument("workload duration must be > 0");
  }
}

namespace {

constexpr uint64_t kLengthStreamSalt = 0x9E3779B97F4A7C15ULL;

double Uniform01(std::mt19937_64& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

}  // namespace

std::vector<Request> GenerateArrivals(const Workload& workload) {
  workload.Validate();
  std::mt19937_64 arrival_rng(workload.seed);
  std::mt19937_64 length_rng(workload.seed ^ kLengthStreamSalt);
  const double span = static_cast<double>(workload.len_hi - workload.len_lo + 1);

  std::vector<Request> requests;
  Seconds t = 0.0;
  for (RequestId id = 0;; ++id) {
    t += -std::log1p(-Uniform01(arrival_rng)) / workload.rate;
    if (t >= workload.duration) break;
    const auto offset = static_cast<int64_t>(Uniform01(length_rng) * span);
    requests.push_back(Request{id, workload.len_lo + offset, t});
  }
  return requests;
}

namespace {

struct QueuedEvent {
  SimEvent event;
  uint64_t seq = 0;
};

// Min-heap on (time, insertion order).
struct LaterFirst {
  bool operator()(const QueuedEvent& a, const QueuedEvent& b) const {
    if (a.event.time != b.event.time) return a.event.time > b.event.time;
    return a.seq > b.seq;
  }
};

class ServingLoop {
 public:
  ServingLoop(const Workload& workload, const TriggerPolicy& policy,
              SchedulerAlgo algo, const CostProvider& costs)
      : workload_(workload),
        policy_(policy),
        algo_(algo),
        costs_(costs),
        batch_cost_(BatchCostFrom(costs)),
        requests_(GenerateArrivals(workload)) {
    policy_.Validate();
    report_.trace.resize(requests_.size());
    for (size_t i = 0; i < requests_.size(); ++i) {
      report_.trace[i].request_id = requests_[i].request_id;
      report_.trace[i].seq_len = requests_[i].seq_len;
      report_.trace[i].arrival = requests_[i].arrival_time;
      Push({requests_[i].arrival_time, SimEvent::Kind::kArrival,
            static_cast<int64_t>(i)});
    }
  }

  SimReport Run() {
    while (!events_.empty()) {
      const SimEvent e = events_.top().event;
      events_.pop();
      Handle(e);
      CheckConservation();
      if (!busy_) TryDispatch(e.time);
    }
    if (!queue_.empty() || busy_) {
      throw std::logic_error("simulation ended with unserved requests");
    }
    Summarize();
    return std::move(report_);
  }

 private:
  void Push(const SimEvent& e) { events_.push({e, next_seq_++}); }

  void Handle(const SimEvent& e) {
    switch (e.kind) {
      case SimEvent::Kind::kArrival:
        queue_.push_back(static_cast<size_t>(e.index));
        ++arrived_;
        report_.queue_length.emplace_back(e.time,
                                          static_cast<int64_t>(queue_.size()));
        break;
      case SimEvent::Kind::kBatchStart: {
        const Batch& batch = plan_.batches[static_cast<size_t>(e.index)];
        const auto count = static_cast<int64_t>(batch.request_ids.size());
        const Seconds exec = costs_.Lookup(batch.padded_len, count).latency;
        for (RequestId id : batch.request_ids) {
          RequestTrace& t = report_.trace[static_cast<size_t>(id)];
          t.start = e.time;
          t.batch_size = count;
          t.padded_len = batch.padded_len;
        }
        ++report_.batches;
        Push({e.time + exec, SimEvent::Kind::kBatchEnd, e.index});
        break;
      }
      case SimEvent::Kind::kBatchEnd: {
        const Batch& batch = plan_.batches[static_cast<size_t>(e.index)];
        for (RequestId id : batch.request_ids) {
          report_.trace[static_cast<size_t>(id)].end = e.time;
        }
        in_flight_ -= static_cast<int64_t>(batch.request_ids.size());
        completed_ += static_cast<int64_t>(batch.request_ids.size());
        if (static_cast<size_t>(e.index) + 1 < plan_.batches.size()) {
          Push({e.time, SimEvent::Kind::kBatchStart, e.index + 1});
        } else {
          busy_ = false;
        }
        break;
      }
      case SimEvent::Kind::kWake:
        break;
    }
  }

  void TryDispatch(Seconds now) {
    if (queue_.empty()) return;
    const size_t take =
        std::min(queue_.size(), static_cast<size_t>(policy_.max_batch));
    std::vector<Request> snapshot;
    snapshot.reserve(take);
    for (size_t k = 0; k < take; ++k) snapshot.push_back(requests_[queue_[k]]);
    BatchPlan plan;
    // The force rule needs the time the pending plan would take.
    Seconds estimate = 0.0;
    if (std::isfinite(policy_.latency_constraint)) {
      plan = Schedule(algo_, snapshot, batch_cost_);
      estimate = plan.predicted_cost;
    }
    const Seconds head_arrival = requests_[queue_.front()].arrival_time;
    if (!ShouldTrigger(policy_, head_arrival, now, estimate,
                       static_cast<int64_t>(queue_.size()), true)) {
      ScheduleWake(now, head_arrival, estimate);
      return;
    }

    for (size_t k = 0; k < take; ++k) queue_.pop_front();
    if (plan.batches.empty()) plan = Schedule(algo_, snapshot, batch_cost_);
    plan_ = std::move(plan);
    in_flight_ += static_cast<int64_t>(take);
    busy_ = true;
    Push({now, SimEvent::Kind::kBatchStart, 0});
  }

  // Wakes the loop when a waiting lazy queue would next satisfy a trigger
  // condition on its own (timeout or the half-constraint rule).
  void ScheduleWake(Seconds now, Seconds head_arrival, Seconds estimate) {
    Seconds wake = std::numeric_limits<Seconds>::infinity();
    if (policy_.kind == TriggerPolicy::Kind::kLazy) {
      wake = head_arrival + policy_.timeout;
    }
    if (std::isfinite(policy_.latency_constraint)) {
      wake = std::min(wake,
                      head_arrival + policy_.latency_constraint / 2 - estimate);
    }
    if (!std::isfinite(wake)) return;
    // Guard against rounding leaving the trigger just short of firing.
    wake = std::max(wake, std::nextafter(now, std::numeric_limits<Seconds>::infinity()));
    if (wake == last_wake_) return;
    last_wake_ = wake;
    Push({wake, SimEvent::Kind::kWake, 0});
  }

  void CheckConservation() const {
    if (completed_ + in_flight_ + static_cast<int64_t>(queue_.size()) !=
        arrived_) {
      throw std::logic_error("request conservation violated");
    }
  }

  void Summarize() {
    SimReport& r = report_;
    r.arrivals = arrived_;
    r.completed = completed_;
    if (requests_.empty()) return;

    Seconds last_end = 0.0;
    double sum = 0.0;
    r.latency_min = std::numeric_limits<Seconds>::infinity();
    r.latency_max = 0.0;
    for (const RequestTrace& t : r.trace) {
      const Seconds latency = t.end - t.arrival;
      sum += latency;
      r.latency_min = std::min(r.latency_min, latency);
      r.latency_max = std::max(r.latency_max, latency);
      last_end = std::max(last_end, t.end);
    }
    r.latency_avg = sum / static_cast<double>(r.trace.size());
    // Keep min <= avg <= max under rounding.
    r.latency_avg = std::clamp(r.latency_avg, r.latency_min, r.latency_max);
    const Seconds last_arrival = requests_.back().arrival_time;
    const double n = static_cast<double>(requests_.size());
    r.request_throughput = n / last_arrival;
    r.serving_throughput = n / last_end;

    // Least-squares slope of queue length over the second half.
    const Seconds from = workload_.duration / 2;
    double sx = 0, sy = 0, sxx = 0, sxy = 0, m = 0;
    for (const auto& [time, len] : r.queue_length) {
      if (time < from) continue;
      const double y = static_cast<double>(len);
      sx += time;
      sy += y;
      sxx += time * time;
      sxy += time * y;
      m += 1;
    }
    if (m >= 2) {
      const double denom = m * sxx - sx * sx;
      const double slope = denom > 0 ? (m * sxy - sx * sy) / denom : 0.0;
      r.queue_growth = slope * (workload_.duration - from);
    }
    const double tolerance =
        std::max(10.0, 0.02 * workload_.rate * (workload_.duration - from));
    r.diverged = r.queue_growth > tolerance;
  }

  const Workload workload_;
  TriggerPolicy policy_;
  SchedulerAlgo algo_;
  const CostProvider& costs_;
  BatchCostFn batch_cost_;
  std::vector<Request> requests_;

  std::priority_queue<QueuedEvent, std::vector<QueuedEvent>, LaterFirst>
      events_;
  uint64_t next_seq_ = 0;
  std::deque<size_t> queue_;
  BatchPlan plan_;
  bool busy_ = false;
  Seconds last_wake_ = -1.0;
  int64_t arrived_ = 0;
  int64_t in_flight_ = 0;
  int64_t completed_ = 0;
  SimReport report_;
};

}  // namespace

SimReport RunSim(const Workload& workload, const TriggerPolicy& policy,
                 SchedulerAlgo algo, const CostProvider& costs) {
  return ServingLoop(workload, policy, algo, costs).Run();
}

bool IsStable(const SimReport& report, double ratio) {
  if (report.arrivals == 0) return true;
  return report.serving_throughput >= ratio * report.request_throughput &&
         !report.diverged;
}

double FindCriticalPoint(Workload workload, const TriggerPolicy& policy,
                         SchedulerAlgo algo, const CostProvider& costs,
                         const CriticalPointOptions& options) {
  const auto stable_at = [&](double rate) {
    workload.rate = rate;
    return IsStable(RunSim(workload, policy, algo, costs),
                    options.throughput_ratio);
  };
  double lo = options.min_rate;
  if (!stable_at(lo)) return 0.0;
  double hi = lo * 2;
  while (hi < options.max_rate && stable_at(hi)) {
    lo = hi;
    hi *= 2;
  }
  if (hi >= options.max_rate) return lo;
  for (int i = 0; i < options.iterations; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (stable_at(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

namespace {

std::string Num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

void WriteSimReport(std::ostream& out, const SimReport& report) {
  out << "arrivals=" << report.arrivals << '\n'
      << "completed=" << report.completed << '\n'
      << "dropped=" << report.dropped << '\n'
      << "batches=" << report.batches << '\n'
      << "request_throughput=" << Num(report.request_throughput) << '\n'
      << "serving_throughput=" << Num(report.serving_throughput) << '\n'
      << "latency_avg_s=" << Num(report.latency_avg) << '\n'
      << "latency_min_s=" << Num(report.latency_min) << '\n'
      << "latency_max_s=" << Num(report.latency_max) << '\n'
      << "queue_growth=" << Num(report.queue_growth) << '\n'
      << "diverged=" << (report.diverged ? 1 : 0) << '\n';
}

void WriteTraceCsv(std::ostream& out, const SimReport& report) {
  out << "request_id,seq_len,arrival,start,end\n";
  char buf[160];
  for (const RequestTrace& t : report.trace) {
    std::snprintf(buf, sizeof(buf), "%lld,%lld,%.17g,%.17g,%.17g\n",
                  static_cast<long long>(t.request_id),
                  static_cast<long long>(t.seq_len), t.arrival, t.start, t.end);
    out << buf;
  }
}

}  // namespace turbo

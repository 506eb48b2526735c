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

#include "turbo/cli.h"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "CLI11.hpp"
#include "turbo/cost.h"
#include "turbo/graph.h"
#include "turbo/planner.h"
#include "turbo/reduce.h"
#include "turbo/reference.h"
#include "turbo/scheduler.h"
#include "turbo/sim.h"

namespace turbo {
namespace {

// Bad invocation that CLI11 cannot detect on its own (e.g. empty input).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

std::string Num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

struct GlobalOptions {
  std::string out_path;
  std::string format = "keyvalue";
  bool no_header = false;
};

struct ModelOptions {
  std::string name = "bert-base";
  int64_t layers = 0;
  int64_t heads = 0;
  int64_t hidden = 0;
  int64_t inter = 0;

  void Register(CLI::App* app) {
    app->add_option("--model", name, "bert-base | distilbert | albert-xxlarge")
        ->capture_default_str();
    app->add_option("--layers", layers, "override number of layers");
    app->add_option("--heads", heads, "override number of heads");
    app->add_option("--hidden", hidden, "override hidden size");
    app->add_option("--inter", inter, "override FFN intermediate size");
  }

  ModelConfig Resolve() const {
    ModelConfig c = ModelByName(name);
    if (layers > 0) c.num_layers = layers;
    if (heads > 0) c.num_heads = heads;
    if (hidden > 0) c.hidden_size = hidden;
    if (inter > 0) c.intermediate_size = inter;
    c.Validate();
    return c;
  }
};

struct CoeffOptions {
  AnalyticCoeffs coeffs = DefaultServingCoeffs();

  void Register(CLI::App* app) {
    app->add_option("--coef-linear", coeffs.linear_s_per_flop,
                    "seconds per projection/FFN flop")
        ->capture_default_str();
    app->add_option("--coef-quad", coeffs.quadratic_s_per_flop,
                    "seconds per attention flop")
        ->capture_default_str();
    app->add_option("--overhead", coeffs.overhead_s,
                    "fixed seconds per inference")
        ->capture_default_str();
  }
};

// Emits key/value data in the requested format.
void WriteKeyValues(std::ostream& out, const KeyValues& kv,
                    const std::string& format) {
  if (format == "csv") {
    out << "key,value\n";
    for (const auto& [k, v] : kv) out << k << ',' << v << '\n';
  } else {
    for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
  }
}

std::ifstream OpenInput(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return in;
}

CostProvider LoadCosts(const std::string& path, bool interpolate,
                       const ModelOptions& model, const CoeffOptions& coeffs) {
  if (path.empty()) return CostProvider::Analytic(model.Resolve(), coeffs.coeffs);
  std::ifstream in = OpenInput(path);
  CostTable table;
  try {
    table = ReadCostTableCsv(in);
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  if (table.empty()) throw std::runtime_error(path + ": cost table is empty");
  return interpolate ? CostProvider::Interpolated(std::move(table))
                     : CostProvider::Table(std::move(table));
}

std::vector<int64_t> ParseIntList(const std::vector<std::string>& parts,
                                  const std::string& flag) {
  std::vector<int64_t> values;
  for (const std::string& part : parts) {
    std::stringstream ss(part);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      try {
        size_t used = 0;
        const long long v = std::stoll(item, &used);
        if (used != item.size() || v < 1) throw std::invalid_argument(item);
        values.push_back(v);
      } catch (const std::exception&) {
        throw UsageError(flag + ": '" + item + "' is not a positive integer");
      }
    }
  }
  if (values.empty()) throw UsageError(flag + " needs at least one value");
  return values;
}

class Cli {
 public:
  Cli() : app_("Variable-length transformer serving toolkit", "turbo") {
    app_.require_subcommand(1);
    app_.fallthrough();
    app_.add_option("--out", global_.out_path,
                    "write data output to this file instead of stdout");
    app_.add_option("--format", global_.format, "key/value output format")
        ->check(CLI::IsMember({"keyvalue", "csv"}))
        ->capture_default_str();
    app_.add_flag("--no-header", global_.no_header,
                  "omit the '#' config echo at the top of the output");
    AddFlops();
    AddGraph();
    AddPlanMemory();
    AddWarmup();
    AddSchedule();
    AddSimulate();
    AddCriticalPoint();
    AddBenchReductions();
  }

  int Run(const std::vector<std::string>& args, std::ostream& out,
          std::ostream& err) {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
      app_.parse(reversed);
    } catch (const CLI::CallForHelp&) {
      out << app_.help();
      return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
      out << app_.help("", CLI::AppFormatMode::All);
      return kExitOk;
    } catch (const CLI::ParseError& e) {
      err << "usage error: " << e.what() << '\n';
      return kExitUsage;
    }

    CLI::App* sub = app_.get_subcommands().front();
    // Buffered so that a failing run leaves no partial data behind.
    std::ostringstream buffer;
    try {
      if (!global_.no_header) EchoConfig(buffer, sub);
      handlers_.at(sub->get_name())(buffer, err);
    } catch (const UsageError& e) {
      err << "usage error: " << e.what() << '\n';
      return kExitUsage;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kExitRuntimeError;
    }

    if (global_.out_path.empty()) {
      out << buffer.str();
      out.flush();
    } else {
      std::ofstream file(global_.out_path, std::ios::binary | std::ios::trunc);
      if (!(file << buffer.str())) {
        err << "error: cannot write '" << global_.out_path << "'\n";
        return kExitRuntimeError;
      }
    }
    return kExitOk;
  }

 private:
  using Handler = std::function<void(std::ostream&, std::ostream&)>;

  void EchoConfig(std::ostream& out, CLI::App* sub) const {
    out << "# turbo " << sub->get_name() << '\n';
    std::istringstream lines(sub->config_to_str(true, false));
    std::string line;
    while (std::getline(lines, line)) {
      if (line.empty() || line[0] == '[') continue;
      out << "# " << line << '\n';
    }
    out << "# format=" << global_.format << '\n';
  }

  CLI::App* Add(const std::string& name, const std::string& help,
                Handler handler) {
    handlers_[name] = std::move(handler);
    return app_.add_subcommand(name, help);
  }

  void AddFlops() {
    struct Opts {
      ModelOptions model;
      int64_t seq = 40;
      int64_t batch = 1;
    };
    auto o = std::make_shared<Opts>();
    CLI::App* cmd = Add("flops", "GEMM FLOPs of one encoder inference",
                        [this, o](std::ostream& out, std::ostream&) {
                          const ModelConfig c = o->model.Resolve();
                          const int64_t f = Flops(c, o->batch, o->seq);
                          WriteKeyValues(out,
                                         {{"flops", std::to_string(f)},
                                          {"gflops", Num(static_cast<double>(f) / 1e9)}},
                                         global_.format);
                        });
    o->model.Register(cmd);
    cmd->add_option("--seq", o->seq, "sequence length")->capture_default_str();
    cmd->add_option("--batch", o->batch, "batch size")->capture_default_str();
  }

  void AddGraph() {
    struct Opts {
      ModelOptions model;
      int64_t seq = 128;
      int64_t batch = 1;
      bool single_layer = false;
    };
    auto o = std::make_shared<Opts>();
    CLI::App* cmd = Add(
        "graph", "emit tensor usage records of the fused encoder graph",
        [o](std::ostream& out, std::ostream&) {
          const FusedGraph g = BuildEncoderGraph(
              o->model.Resolve(), o->batch, o->seq, {o->single_layer});
          out << "# ops=" << g.ops.size() << " repeat=" << g.repeat << '\n';
          WriteRecords(out, g.tensors);
        });
    o->model.Register(cmd);
    cmd->add_option("--seq", o->seq, "sequence length")->capture_default_str();
    cmd->add_option("--batch", o->batch, "batch size")->capture_default_str();
    cmd->add_flag("--single-layer", o->single_layer,
                  "emit one layer plus a repeat count");
  }

  void AddPlanMemory() {
    struct Opts {
      std::string records;
      Bytes chunk_size = 2 * kMiB;
      double k_scale = 1.2;
      Bytes alignment = 32;
      std::string algo = "turbo";
    };
    auto o = std::make_shared<Opts>();
    CLI::App* cmd = Add(
        "plan-memory", "plan intermediate tensor offsets",
        [this, o](std::ostream& out, std::ostream&) {
          std::ifstream in = OpenInput(o->records);
          std::vector<TensorUsageRecord> records;
          try {
            records = ReadRecords(in);
          } catch (const std::exception& e) {
            throw std::runtime_error(o->records + ": " + e.what());
          }
          if (o->algo == "caching") {
            const AllocStats s =
                SimulateCachingAllocator(BuildAllocFreeTrace(records));
            WriteKeyValues(out, StatsToKv(s), global_.format);
            return;
          }
          AllocStats stats;
          MemoryPlan plan;
          if (o->algo == "gsoc") {
            plan = PlanGsoc(records, o->alignment);
            stats.peak_footprint = plan.Footprint();
            stats.bytes_allocated = plan.Footprint();
            stats.device_alloc_calls = plan.Footprint() > 0 ? 1 : 0;
          } else {
            PlannerConfig cfg;
            cfg.default_chunk_size = o->chunk_size;
            cfg.k_scale = o->k_scale;
            cfg.alignment = o->alignment;
            AllocationResult r = MemAllocate(records, {}, cfg);
            plan = std::move(r.plan);
            stats = r.stats;
          }
          out << "tensor_id,chunk_id,offset\n";
          for (const auto& [id, chunk] : plan.assigned_chunk) {
            out << id << ',' << chunk << ',' << plan.assigned_offset.at(id)
                << '\n';
          }
          KeyValues kv = StatsToKv(stats);
          kv.emplace_back("chunks", std::to_string(plan.chunks.size()));
          kv.emplace_back("footprint", std::to_string(plan.Footprint()));
          WriteKeyValues(out, kv, global_.format);
        });
    cmd->add_option("--records", o->records, "tensor usage record file")
        ->required();
    cmd->add_option("--chunk-size", o->chunk_size, "default chunk bytes")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--k-scale", o->k_scale, "new chunk size factor")
        ->check(CLI::Range(1.0, 1e9))
        ->capture_default_str();
    cmd->add_option("--alignment", o->alignment, "offset alignment in bytes")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--algo", o->algo, "planner")
        ->check(CLI::IsMember({"turbo", "gsoc", "caching"}))
        ->capture_default_str();
  }

  static KeyValues StatsToKv(const AllocStats& s) {
    return {{"peak_footprint", std::to_string(s.peak_footprint)},
            {"bytes_allocated", std::to_string(s.bytes_allocated)},
            {"bytes_freed", std::to_string(s.bytes_freed)},
            {"device_alloc_calls", std::to_string(s.device_alloc_calls)},
            {"device_free_calls", std::to_string(s.device_free_calls)}};
  }

  void AddWarmup() {
    struct Opts {
      ModelOptions model;
      CoeffOptions coeffs;
      std::vector<std::string> grid_seq;
      std::vector<std::string> grid_batch;
    };
    auto o = std::make_shared<Opts>();
    CLI::App* cmd = Add(
        "warmup", "build a cost table over a (seq_len, batch) grid",
        [o](std::ostream& out, std::ostream& err) {
          const auto seqs = ParseIntList(o->grid_seq, "--grid-seq");
          const auto batches = ParseIntList(o->grid_batch, "--grid-batch");
          const CostProvider analytic =
              CostProvider::Analytic(o->model.Resolve(), o->coeffs.coeffs);
          try {
            WriteCostTableCsv(out, Warmup(analytic, seqs, batches));
          } catch (const WarmupError& e) {
            err << "partial table (" << e.partial().size() << " entries):\n";
            WriteCostTableCsv(err, e.partial());
            throw;
          }
        });
    o->model.Register(cmd);
    o->coeffs.Register(cmd);
    cmd->add_option("--grid-seq", o->grid_seq, "sequence lengths, comma separated")
        ->required();
    cmd->add_option("--grid-batch", o->grid_batch, "batch sizes, comma separated")
        ->required();
  }

  void AddSchedule() {
    struct Opts {
      ModelOptions model;
      CoeffOptions coeffs;
      std::string requests;
      std::string costs;
      std::string algo = "dp";
      bool interpolate = false;
    };
    auto o = std::make_shared<Opts>();
    CLI::App* cmd = Add(
        "schedule", "batch a request list",
        [this, o](std::ostream& out, std::ostream&) {
          std::ifstream in = OpenInput(o->requests);
          std::vector<Request> requests;
          try {
            requests = ReadRequestsCsv(in);
          } catch (const std::exception& e) {
            throw std::runtime_error(o->requests + ": " + e.what());
          }
          if (requests.empty()) {
            throw UsageError(o->requests + " contains no requests");
          }
          const CostProvider costs =
              LoadCosts(o->costs, o->interpolate, o->model, o->coeffs);
          const BatchPlan plan = Schedule(ParseSchedulerAlgo(o->algo),
                                          requests, BatchCostFrom(costs));
          WriteBatchPlanCsv(out, plan);
          WriteKeyValues(out,
                         {{"batches", std::to_string(plan.batches.size())},
                          {"predicted_cost_s", Num(plan.predicted_cost)}},
                         global_.format);
        });
    o->model.Register(cmd);
    o->coeffs.Register(cmd);
    cmd->add_option("--requests", o->requests, "CSV id,seq_len,arrival")
        ->required();
    cmd->add_option("--costs", o->costs,
                    "cost table CSV (default: analytic model)");
    cmd->add_flag("--interp", o->interpolate,
                  "interpolate between cost table grid points");
    cmd->add_option("--algo", o->algo, "scheduler")
        ->check(CLI::IsMember({"dp", "naive", "nobatch"}))
        ->capture_default_str();
  }

  struct SimOptions {
    ModelOptions model;
    CoeffOptions coeffs;
    Workload workload;
    std::string algo = "dp";
    std::string policy = "hungry";
    Seconds timeout = 0.01;
    int64_t max_batch = 20;
    Seconds latency_constraint = 0.0;
    std::string costs;
    bool interpolate = false;

    void Register(CLI::App* cmd) {
      model.Register(cmd);
      coeffs.Register(cmd);
      cmd->add_option("--rate", workload.rate, "arrivals per second")
          ->check(CLI::PositiveNumber)
          ->capture_default_str();
      cmd->add_option("--len-lo", workload.len_lo, "shortest sequence")
          ->capture_default_str();
      cmd->add_option("--len-hi", workload.len_hi, "longest sequence")
          ->capture_default_str();
      cmd->add_option("--dur", workload.duration, "arrival window in seconds")
          ->check(CLI::PositiveNumber)
          ->capture_default_str();
      cmd->add_option("--seed", workload.seed, "random seed")
          ->capture_default_str();
      cmd->add_option("--algo", algo, "scheduler")
          ->check(CLI::IsMember({"dp", "naive", "nobatch"}))
          ->capture_default_str();
      cmd->add_option("--policy", policy, "trigger policy")
          ->check(CLI::IsMember({"hungry", "lazy"}))
          ->capture_default_str();
      cmd->add_option("--timeout", timeout, "lazy timeout in seconds")
          ->capture_default_str();
      cmd->add_option("--max-batch", max_batch, "largest batch per run")
          ->check(CLI::PositiveNumber)
          ->capture_default_str();
      cmd->add_option("--latency-constraint", latency_constraint,
                      "latency SLO in seconds (0 disables)")
          ->capture_default_str();
      cmd->add_option("--costs", costs,
                      "cost table CSV (default: analytic model)");
      cmd->add_flag("--interp", interpolate,
                    "interpolate between cost table grid points");
    }

    TriggerPolicy Policy() const {
      TriggerPolicy p;
      p.kind = policy == "lazy" ? TriggerPolicy::Kind::kLazy
                                : TriggerPolicy::Kind::kHungry;
      p.timeout = timeout;
      p.max_batch = max_batch;
      if (latency_constraint > 0) p.latency_constraint = latency_constraint;
      p.Validate();
      return p;
    }
  };

  void AddSimulate() {
    struct Opts : SimOptions {
      std::string trace;
    };
    auto o = std::make_shared<Opts>();
    CLI::App* cmd = Add(
        "simulate", "run the discrete-event serving simulation",
        [this, o](std::ostream& out, std::ostream&) {
          const CostProvider costs =
              LoadCosts(o->costs, o->interpolate, o->model, o->coeffs);
          const SimReport report = RunSim(o->workload, o->Policy(),
                                          ParseSchedulerAlgo(o->algo), costs);
          KeyValues kv;
          std::ostringstream text;
          WriteSimReport(text, report);
          std::istringstream lines(text.str());
          std::string line;
          while (std::getline(lines, line)) {
            const auto eq = line.find('=');
            kv.emplace_back(line.substr(0, eq), line.substr(eq + 1));
          }
          WriteKeyValues(out, kv, global_.format);
          if (!o->trace.empty()) {
            std::ofstream trace(o->trace, std::ios::binary | std::ios::trunc);
            if (!trace) {
              throw std::runtime_error("cannot open '" + o->trace +
                                       "' for writing");
            }
            WriteTraceCsv(trace, report);
          }
        });
    o->Register(cmd);
    cmd->add_option("--trace", o->trace, "per-request CSV trace output");
  }

  void AddCriticalPoint() {
    auto o = std::make_shared<SimOptions>();
    CLI::App* cmd = Add(
        "critical-point", "bisect the largest sustainable arrival rate",
        [this, o](std::ostream& out, std::ostream&) {
          const CostProvider costs =
              LoadCosts(o->costs, o->interpolate, o->model, o->coeffs);
          const double rate =
              FindCriticalPoint(o->workload, o->Policy(),
                                ParseSchedulerAlgo(o->algo), costs);
          WriteKeyValues(out, {{"critical_point_rps", Num(rate)}},
                         global_.format);
        });
    o->Register(cmd);
  }

  void AddBenchReductions() {
    struct Opts {
      int64_t rows = 64;
      int64_t cols = 768;
      uint64_t seed = 1;
    };
    auto o = std::make_shared<Opts>();
    CLI::App* cmd = Add(
        "bench-reductions",
        "check batched softmax / layernorm / tree sum against references",
        [this, o](std::ostream& out, std::ostream& err) {
          std::mt19937_64 rng(o->seed);
          auto uniform = [&rng](double lo, double hi) {
            return static_cast<float>(
                lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53);
          };
          std::vector<float> values(static_cast<size_t>(o->rows * o->cols));
          for (float& v : values) v = uniform(-100.0, 100.0);
          const Batch2D x(o->rows, o->cols, std::move(values));
          std::vector<float> gamma(static_cast<size_t>(o->cols));
          std::vector<float> beta(static_cast<size_t>(o->cols));
          for (float& g : gamma) g = uniform(0.5, 1.5);
          for (float& b : beta) b = uniform(-0.5, 0.5);
          constexpr float kEps = 1e-5f;

          const auto t0 = std::chrono::steady_clock::now();
          const Batch2D sm = BatchedSoftmax(x);
          const Batch2D ln = BatchedLayerNormOnePass(x, gamma, beta, kEps);
          const std::vector<float> sums = SimulatedBlockReduce(x, 32, 2);
          const double elapsed = std::chrono::duration<double>(
                                     std::chrono::steady_clock::now() - t0)
                                     .count();

          long double sm_dev = 0, sm_rowsum_dev = 0, ln_dev = 0, sum_dev = 0;
          for (int64_t r = 0; r < x.rows(); ++r) {
            const auto ref_sm = reference::Softmax(x.row(r));
            const auto ref_ln =
                reference::LayerNormTwoPass(x.row(r), gamma, beta, kEps);
            long double row_sum = 0;
            for (int64_t c = 0; c < x.cols(); ++c) {
              sm_dev = std::max(sm_dev, std::fabs(sm.at(r, c) - ref_sm[c]));
              ln_dev = std::max(ln_dev, std::fabs(ln.at(r, c) - ref_ln[c]) /
                                            std::max<long double>(
                                                1, std::fabs(ref_ln[c])));
              row_sum += sm.at(r, c);
            }
            sm_rowsum_dev = std::max(sm_rowsum_dev, std::fabs(row_sum - 1));
            long double abs_sum = 0;
            for (float v : x.row(r)) abs_sum += std::fabs(v);
            sum_dev = std::max(
                sum_dev, std::fabs(sums[r] - reference::SequentialSum(x.row(r))) /
                             std::max<long double>(1, abs_sum));
          }
          WriteKeyValues(
              out,
              {{"rows", std::to_string(o->rows)},
               {"cols", std::to_string(o->cols)},
               {"softmax_max_abs_dev", Num(static_cast<double>(sm_dev))},
               {"softmax_max_rowsum_dev", Num(static_cast<double>(sm_rowsum_dev))},
               {"layernorm_max_rel_dev", Num(static_cast<double>(ln_dev))},
               {"tree_sum_max_rel_dev", Num(static_cast<double>(sum_dev))}},
              global_.format);
          // Timing is not reproducible, so it stays off the data stream.
          err << "rows_per_sec="
              << Num(elapsed > 0 ? static_cast<double>(o->rows) / elapsed : 0)
              << '\n';
        });
    cmd->add_option("--rows", o->rows, "rows")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--cols", o->cols, "columns")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--seed", o->seed, "random seed")->capture_default_str();
  }

  CLI::App app_;
  GlobalOptions global_;
  std::map<std::string, Handler> handlers_;
};

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err) {
  Cli cli;
  return cli.Run(args, out, err);
}

}  // namespace turbo

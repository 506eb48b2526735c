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

#include "turbo/cost.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace turbo {

void CostTable::Set(int64_t seq_len, int64_t batch, Seconds latency) {
  if (seq_len < 1 || batch < 1) {
    throw std::invalid_argument("cost key must have seq_len, batch >= 1");
  }
  if (!(latency > 0.0) || !std::isfinite(latency)) {
    throw std::invalid_argument("cost entry (" + std::to_string(seq_len) +
                                ", " + std::to_string(batch) +
                                ") must have finite positive latency");
  }
  entries_[{seq_len, batch}] = latency;
}

std::optional<Seconds> CostTable::Find(int64_t seq_len, int64_t batch) const {
  auto it = entries_.find({seq_len, batch});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::vector<int64_t> CostTable::SeqGrid() const {
  std::set<int64_t> values;
  for (const auto& [key, _] : entries_) values.insert(key.first);
  return {values.begin(), values.end()};
}

std::vector<int64_t> CostTable::BatchGrid() const {
  std::set<int64_t> values;
  for (const auto& [key, _] : entries_) values.insert(key.second);
  return {values.begin(), values.end()};
}

std::vector<std::string> CostTable::MonotonicityWarnings() const {
  std::vector<std::string> warnings;
  std::map<int64_t, std::pair<int64_t, Seconds>> last_by_batch;
  // entries_ iterates by seq_len, then batch.
  for (const auto& [key, latency] : entries_) {
    auto [seq, batch] = key;
    auto it = last_by_batch.find(batch);
    if (it != last_by_batch.end() && latency < it->second.second) {
      warnings.push_back("latency decreases from seq_len " +
                         std::to_string(it->second.first) + " to " +
                         std::to_string(seq) + " at batch " +
                         std::to_string(batch));
    }
    last_by_batch[batch] = {seq, latency};
  }
  return warnings;
}

void WriteCostTableCsv(std::ostream& out, const CostTable& table) {
  out << "seq_len,batch,latency_s\n";
  char buf[64];
  for (const auto& [key, latency] : table.entries()) {
    std::snprintf(buf, sizeof(buf), "%.17g", latency);
    out << key.first << ',' << key.second << ',' << buf << '\n';
  }
}

CostTable ReadCostTableCsv(std::istream& in) {
  CostTable table;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("seq_len", 0) == 0) continue;
    std::istringstream fields(line);
    int64_t seq = 0, batch = 0;
    char c1 = 0, c2 = 0;
    std::string latency_text;
    if (!(fields >> seq >> c1 >> batch >> c2) || c1 != ',' || c2 != ',' ||
        !(fields >> latency_text)) {
      throw std::runtime_error("cost table line " + std::to_string(line_no) +
                               ": expected 'seq_len,batch,latency_s'");
    }
    char* end = nullptr;
    const double latency = std::strtod(latency_text.c_str(), &end);
    if (end == latency_text.c_str() || *end != '\0') {
      throw std::runtime_error("cost table line " + std::to_string(line_no) +
                               ": bad latency '" + latency_text + "'");
    }
    try {
      table.Set(seq, batch, latency);
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error("cost table line " + std::to_string(line_no) +
                               ": " + e.what());
    }
  }
  return table;
}

MissingCostError::MissingCostError(int64_t seq_len, int64_t batch)
    : std::out_of_range("no cost entry for (seq_len=" +
                        std::to_string(seq_len) +
                        ", batch=" + std::to_string(batch) + ")"),
      seq_len_(seq_len),
      batch_(batch) {}

void AnalyticCoeffs::Validate() const {
  if (linear_s_per_flop < 0 || quadratic_s_per_flop < 0) {
    throw std::invalid_argument("analytic cost coefficients must be >= 0");
  }
  if (!(overhead_s > 0)) {
    throw std::invalid_argument("analytic overhead must be > 0");
  }
}

Seconds AnalyticCost(const ModelConfig& config, const AnalyticCoeffs& coeffs,
                     int64_t seq_len, int64_t batch) {
  if (seq_len < 1 || batch < 1) {
    throw std::invalid_argument("seq_len and batch must be >= 1");
  }
  const double s = static_cast<double>(seq_len);
  const double h = static_cast<double>(config.hidden_size);
  const double inter = static_cast<double>(config.intermediate_size);
  const double layers_batch =
      static_cast<double>(config.num_layers) * static_cast<double>(batch);
  const double linear_flops = (8.0 * h * h + 4.0 * h * inter) * s * layers_batch;
  const double attention_flops = 4.0 * s * s * h * layers_batch;
  return coeffs.linear_s_per_flop * linear_flops +
         coeffs.quadratic_s_per_flop * attention_flops + coeffs.overhead_s;
}

AnalyticCoeffs DefaultServingCoeffs() {
  return AnalyticCoeffs{1e-13, 4e-13, 3.3e-3};
}

CostProvider CostProvider::Analytic(ModelConfig config, AnalyticCoeffs coeffs) {
  config.Validate();
  coeffs.Validate();
  CostProvider p;
  p.kind_ = Kind::kAnalytic;
  p.model_ = config;
  p.coeffs_ = coeffs;
  return p;
}

CostProvider CostProvider::Table(CostTable table) {
  CostProvider p;
  p.kind_ = Kind::kTable;
  p.table_ = std::move(table);
  return p;
}

CostProvider CostProvider::Interpolated(CostTable table) {
  CostProvider p;
  p.kind_ = Kind::kInterpolated;
  p.seq_grid_ = table.SeqGrid();
  p.batch_grid_ = table.BatchGrid();
  if (p.seq_grid_.empty()) {
    throw std::invalid_argument("interpolated cost table is empty");
  }
  for (int64_t s : p.seq_grid_) {
    for (int64_t b : p.batch_grid_) {
      if (!table.Find(s, b)) {
        throw std::invalid_argument(
            "interpolated cost table is not a full grid: missing (" +
            std::to_string(s) + ", " + std::to_string(b) + ")");
      }
    }
  }
  p.table_ = std::move(table);
  return p;
}

CostLookup CostProvider::Lookup(int64_t seq_len, int64_t batch) const {
  switch (kind_) {
    case Kind::kAnalytic:
      return {AnalyticCost(model_, coeffs_, seq_len, batch), false};
    case Kind::kTable:
      if (auto v = table_.Find(seq_len, batch)) return {*v, false};
      throw MissingCostError(seq_len, batch);
    case Kind::kInterpolated:
      if (auto v = table_.Find(seq_len, batch)) return {*v, false};
      return Bilinear(seq_len, batch);
  }
  throw std::logic_error("unknown cost provider kind");
}

namespace {

// Index i such that grid[i] <= x <= grid[i + 1], with x already clamped.
size_t Cell(const std::vector<int64_t>& grid, double x) {
  if (grid.size() == 1) return 0;
  auto it = std::upper_bound(grid.begin(), grid.end(), x);
  size_t i = static_cast<size_t>(it - grid.begin());
  i = i == 0 ? 0 : i - 1;
  return std::min(i, grid.size() - 2);
}

double Fraction(const std::vector<int64_t>& grid, size_t i, double x) {
  if (grid.size() == 1) return 0.0;
  const double lo = static_cast<double>(grid[i]);
  const double hi = static_cast<double>(grid[i + 1]);
  return (x - lo) / (hi - lo);
}

}  // namespace

CostLookup CostProvider::Bilinear(int64_t seq_len, int64_t batch) const {
  CostLookup out;
  double s = static_cast<double>(seq_len);
  double b = static_cast<double>(batch);
  const auto clamp = [&out](double v, const std::vector<int64_t>& grid) {
    const double lo = static_cast<double>(grid.front());
    const double hi = static_cast<double>(grid.back());
    if (v < lo || v > hi) out.clamped = true;
    return std::clamp(v, lo, hi);
  };
  s = clamp(s, seq_grid_);
  b = clamp(b, batch_grid_);

  const size_t i = Cell(seq_grid_, s);
  const size_t j = Cell(batch_grid_, b);
  const double ts = Fraction(seq_grid_, i, s);
  const double tb = Fraction(batch_grid_, j, b);
  const size_t i1 = std::min(i + 1, seq_grid_.size() - 1);
  const size_t j1 = std::min(j + 1, batch_grid_.size() - 1);
  const auto at = [this](size_t si, size_t bi) {
    return *table_.Find(seq_grid_[si], batch_grid_[bi]);
  };
  const double low = (1 - ts) * at(i, j) + ts * at(i1, j);
  const double high = (1 - ts) * at(i, j1) + ts * at(i1, j1);
  out.latency = (1 - tb) * low + tb * high;
  return out;
}

void CostProvider::Observe(int64_t seq_len, int64_t batch, Seconds latency) {
  if (kind_ == Kind::kAnalytic) return;
  if (kind_ == Kind::kInterpolated && !table_.Find(seq_len, batch)) {
    // Off-grid observations would break the rectangular grid; keep them out.
    return;
  }
  table_.Observe(seq_len, batch, latency);
}

CostTable Warmup(const CostExecutor& executor,
                 std::span<const int64_t> seq_lens,
                 std::span<const int64_t> batches) {
  if (seq_lens.empty() || batches.empty()) {
    throw std::invalid_argument("warm-up grids must be non-empty");
  }
  CostTable table;
  for (int64_t s : seq_lens) {
    for (int64_t b : batches) {
      Seconds latency = 0;
      try {
        latency = executor(s, b);
        table.Set(s, b, latency);
      } catch (const std::exception& e) {
        throw WarmupError("warm-up failed at (seq_len=" + std::to_string(s) +
                              ", batch=" + std::to_string(b) + ") after " +
                              std::to_string(table.size()) +
                              " entries: " + e.what(),
                          table);
      }
    }
  }
  return table;
}

}  // namespace turbo

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

#include "turbo/reduce.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace turbo {

Batch2D::Batch2D(int64_t rows, int64_t cols)
    : Batch2D(rows, cols,
              std::vector<float>(static_cast<size_t>(std::max<int64_t>(
                  rows * cols, 0)))) {}

Batch2D::Batch2D(int64_t rows, int64_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (rows < 0 || cols < 0) {
    throw std::invalid_argument("Batch2D dimensions must be non-negative");
  }
  if (static_cast<int64_t>(data_.size()) != rows * cols) {
    throw std::invalid_argument("Batch2D data length does not match shape");
  }
}

bool Batch2D::AllFinite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](float v) { return std::isfinite(v); });
}

Batch2D BatchedSoftmax(const Batch2D& x) {
  if (!x.AllFinite()) {
    throw std::invalid_argument("softmax input contains non-finite values");
  }
  Batch2D out(x.rows(), x.cols());
  std::vector<double> exps(static_cast<size_t>(x.cols()));
  for (int64_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    if (in.empty()) continue;
    const float max = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (size_t c = 0; c < in.size(); ++c) {
      exps[c] = std::exp(static_cast<double>(in[c]) - max);
      sum += exps[c];
    }
    auto dst = out.row(r);
    for (size_t c = 0; c < in.size(); ++c) {
      dst[c] = static_cast<float>(exps[c] / sum);
    }
  }
  return out;
}

Batch2D BatchedLayerNormOnePass(const Batch2D& x, std::span<const float> gamma,
                                std::span<const float> beta, float eps) {
  if (static_cast<int64_t>(gamma.size()) != x.cols() ||
      static_cast<int64_t>(beta.size()) != x.cols()) {
    throw std::invalid_argument("gamma and beta must have one entry per column");
  }
  if (!(eps > 0)) throw std::invalid_argument("eps must be > 0");
  Batch2D out(x.rows(), x.cols());
  const double n = static_cast<double>(x.cols());
  for (int64_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    if (in.empty()) continue;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (float v : in) {
      sum += v;
      sum_sq += static_cast<double>(v) * v;
    }
    const double mean = sum / n;
    const double var = std::max(0.0, sum_sq / n - mean * mean);
    const double inv_std = 1.0 / std::sqrt(var + eps);
    auto dst = out.row(r);
    for (size_t c = 0; c < in.size(); ++c) {
      dst[c] = static_cast<float>(gamma[c] * (in[c] - mean) * inv_std + beta[c]);
    }
  }
  return out;
}

std::vector<float> SimulatedBlockReduce(const Batch2D& x,
                                        int64_t lanes_per_group,
                                        int64_t rows_per_block) {
  if (lanes_per_group < 1 || (lanes_per_group & (lanes_per_group - 1)) != 0) {
    throw std::invalid_argument("lanes_per_group must be a power of two");
  }
  if (rows_per_block < 1) {
    throw std::invalid_argument("rows_per_block must be >= 1");
  }
  const int64_t lanes = lanes_per_group;
  const int64_t steps = (x.cols() + lanes - 1) / lanes;
  std::vector<float> result(static_cast<size_t>(x.rows()));

  // partial[row_in_block * lanes + lane]
  std::vector<float> partial;
  std::vector<float> exchanged;
  for (int64_t first = 0; first < x.rows(); first += rows_per_block) {
    const int64_t group = std::min(rows_per_block, x.rows() - first);
    partial.assign(static_cast<size_t>(group * lanes), 0.0f);

    for (int64_t step = 0; step < steps; ++step) {
      for (int64_t lane = 0; lane < lanes; ++lane) {
        const int64_t col = step * lanes + lane;
        for (int64_t g = 0; g < group; ++g) {
          const float v = col < x.cols() ? x.at(first + g, col) : 0.0f;
          partial[g * lanes + lane] += v;
        }
      }
    }

    for (int64_t distance = lanes / 2; distance >= 1; distance /= 2) {
      exchanged = partial;
      for (int64_t lane = 0; lane < lanes; ++lane) {
        for (int64_t g = 0; g < group; ++g) {
          partial[g * lanes + lane] =
              exchanged[g * lanes + lane] + exchanged[g * lanes + (lane ^ distance)];
        }
      }
    }
    for (int64_t g = 0; g < group; ++g) {
      result[first + g] = partial[g * lanes];
    }
  }
  return result;
}

}  // namespace turbo

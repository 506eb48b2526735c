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

// Row-wise reductions over a 2-D batch of FP32 values: softmax, layernorm
// with single-pass mean/second-moment statistics, and a model of the
// lane-strided shuffle tree a GPU warp uses to sum a row.

#ifndef TURBO_REDUCE_H_
#define TURBO_REDUCE_H_

#include <cstdint>
#include <span>
#include <vector>

namespace turbo {

class Batch2D {
 public:
  Batch2D() = default;
  Batch2D(int64_t rows, int64_t cols);
  // Throws std::invalid_argument when data.size() != rows * cols.
  Batch2D(int64_t rows, int64_t cols, std::vector<float> data);

  int64_t rows() const { return rows_; }
  int64_t cols() const { return cols_; }

  std::span<float> row(int64_t r) {
    return {data_.data() + r * cols_, static_cast<size_t>(cols_)};
  }
  std::span<const float> row(int64_t r) const {
    return {data_.data() + r * cols_, static_cast<size_t>(cols_)};
  }
  float& at(int64_t r, int64_t c) { return data_[r * cols_ + c]; }
  float at(int64_t r, int64_t c) const { return data_[r * cols_ + c]; }

  const std::vector<float>& data() const { return data_; }

  bool AllFinite() const;

 private:
  int64_t rows_ = 0;
  int64_t cols_ = 0;
  std::vector<float> data_;
};

// exp(x - rowmax) / rowsum per row. Rejects non-finite input.
Batch2D BatchedSoftmax(const Batch2D& x);

// gamma * (x - mean) / sqrt(var + eps) + beta per row, where mean and E[x^2]
// come from one sweep and var = max(0, E[x^2] - mean^2).
Batch2D BatchedLayerNormOnePass(const Batch2D& x, std::span<const float> gamma,
                                std::span<const float> beta, float eps);

// Sums each row the way a group of `lanes_per_group` lanes would: lane l
// accumulates elements l, l + lanes, ... in order (the tail is zero padded),
// then a butterfly exchange at distances lanes/2, ..., 1 combines the lanes.
// `rows_per_block` rows are reduced together, interleaved element by element,
// which does not change the association order of any single row.
std::vector<float> SimulatedBlockReduce(const Batch2D& x,
                                        int64_t lanes_per_group = 32,
                                        int64_t rows_per_block = 1);

}  // namespace turbo

#endif  // TURBO_REDUCE_H_

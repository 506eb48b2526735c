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

// Slow, straightforward reference versions of the row reductions, computed
// in long double. They share no code with reduce.cc and serve as oracles.

#ifndef TURBO_REFERENCE_H_
#define TURBO_REFERENCE_H_

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace turbo::reference {

inline std::vector<long double> Softmax(std::span<const float> row) {
  long double max = -INFINITY;
  for (float v : row) max = std::max<long double>(max, v);
  std::vector<long double> out(row.size());
  long double sum = 0;
  for (size_t i = 0; i < row.size(); ++i) {
    out[i] = std::exp(static_cast<long double>(row[i]) - max);
    sum += out[i];
  }
  for (long double& v : out) v /= sum;
  return out;
}

// Mean first, then the mean of squared deviations.
inline std::vector<long double> LayerNormTwoPass(std::span<const float> row,
                                                 std::span<const float> gamma,
                                                 std::span<const float> beta,
                                                 float eps) {
  const long double n = static_cast<long double>(row.size());
  long double mean = 0;
  for (float v : row) mean += v;
  mean /= n;
  long double var = 0;
  for (float v : row) var += (v - mean) * (v - mean);
  var /= n;
  const long double denom = std::sqrt(var + eps);
  std::vector<long double> out(row.size());
  for (size_t i = 0; i < row.size(); ++i) {
    out[i] = gamma[i] * (row[i] - mean) / denom + beta[i];
  }
  return out;
}

inline long double SequentialSum(std::span<const float> row) {
  long double sum = 0;
  for (float v : row) sum += v;
  return sum;
}

}  // namespace turbo::reference

#endif  // TURBO_REFERENCE_H_

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

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include "turbo/reference.h"

namespace turbo {
namespace {

Batch2D RandomBatch(std::mt19937_64& rng, int64_t rows, int64_t cols,
                    float bound) {
  std::uniform_real_distribution<float> d(-bound, bound);
  Batch2D x(rows, cols);
  for (int64_t r = 0; r < rows; ++r) {
    for (float& v : x.row(r)) v = d(rng);
  }
  return x;
}

TEST(SoftmaxTest, UniformRow) {
  const Batch2D y = BatchedSoftmax(Batch2D(1, 4, {0, 0, 0, 0}));
  for (int c = 0; c < 4; ++c) EXPECT_FLOAT_EQ(y.at(0, c), 0.25f);
}

TEST(SoftmaxTest, ShiftInvariance) {
  std::mt19937_64 rng(2);
  const Batch2D x = RandomBatch(rng, 4, 50, 10);
  for (float shift : {-30.0f, 1.5f, 60.0f}) {
    Batch2D shifted = x;
    for (int64_t r = 0; r < x.rows(); ++r) {
      for (float& v : shifted.row(r)) v += shift;
    }
    const Batch2D a = BatchedSoftmax(x), b = BatchedSoftmax(shifted);
    for (size_t i = 0; i < a.data().size(); ++i) {
      EXPECT_NEAR(a.data()[i], b.data()[i], 1e-6);
    }
  }
}

TEST(SoftmaxTest, MatchesExtendedPrecisionOracle) {
  std::mt19937_64 rng(3);
  const Batch2D x = RandomBatch(rng, 8, 37, 5);
  const Batch2D y = BatchedSoftmax(x);
  for (int64_t r = 0; r < 8; ++r) {
    const auto want = reference::Softmax(x.row(r));
    double sum = 0;
    for (int64_t c = 0; c < 37; ++c) {
      EXPECT_LE(std::fabs(y.at(r, c) - want[c]), 1e-6 * want[c]) << r << "," << c;
      EXPECT_GT(y.at(r, c), 0.0f);
      EXPECT_LE(y.at(r, c), 1.0f);
      sum += y.at(r, c);
    }
    EXPECT_NEAR(sum, 1.0, 1e-6);
  }
}

TEST(SoftmaxTest, RejectsNonFinite) {
  Batch2D x(1, 3, {0, std::numeric_limits<float>::infinity(), 1});
  EXPECT_THROW(BatchedSoftmax(x), std::invalid_argument);
  x.at(0, 1) = std::nanf("");
  EXPECT_THROW(BatchedSoftmax(x), std::invalid_argument);
}

TEST(Batch2DTest, ShapeMismatchRejected) {
  EXPECT_THROW(Batch2D(2, 3, std::vector<float>(5)), std::invalid_argument);
}

TEST(LayerNormTest, ConstantRowGivesZeros) {
  const std::vector<float> gamma(16, 1.0f), beta(16, 0.0f);
  Batch2D x(1, 16, std::vector<float>(16, 3.25f));
  const Batch2D y = BatchedLayerNormOnePass(x, gamma, beta, 1e-5f);
  for (float v : y.data()) EXPECT_EQ(v, 0.0f);
}

TEST(LayerNormTest, ZeroGammaGivesBeta) {
  std::mt19937_64 rng(4);
  const Batch2D x = RandomBatch(rng, 3, 10, 50);
  std::vector<float> gamma(10, 0.0f), beta(10);
  for (int i = 0; i < 10; ++i) beta[i] = 0.5f * i - 1;
  const Batch2D y = BatchedLayerNormOnePass(x, gamma, beta, 1e-5f);
  for (int64_t r = 0; r < 3; ++r) {
    for (int c = 0; c < 10; ++c) EXPECT_EQ(y.at(r, c), beta[c]);
  }
}

TEST(LayerNormTest, MatchesTwoPassOracle) {
  std::mt19937_64 rng(5);
  const Batch2D x = RandomBatch(rng, 8, 64, 100);
  std::uniform_real_distribution<float> d(0.5f, 1.5f);
  std::vector<float> gamma(64), beta(64);
  for (auto& g : gamma) g = d(rng);
  for (auto& b : beta) b = d(rng) - 1.0f;
  const Batch2D y = BatchedLayerNormOnePass(x, gamma, beta, 1e-5f);
  for (int64_t r = 0; r < 8; ++r) {
    const auto want = reference::LayerNormTwoPass(x.row(r), gamma, beta, 1e-5f);
    for (int c = 0; c < 64; ++c) {
      const long double scale = std::max<long double>(1, std::fabs(want[c]));
      EXPECT_LE(std::fabs(y.at(r, c) - want[c]), 1e-5 * scale);
    }
  }
}

TEST(LayerNormTest, ShapeChecks) {
  Batch2D x(1, 4);
  std::vector<float> three(3, 1.0f), four(4, 1.0f);
  EXPECT_THROW(BatchedLayerNormOnePass(x, three, four, 1e-5f), std::invalid_argument);
  EXPECT_THROW(BatchedLayerNormOnePass(x, four, four, 0.0f), std::invalid_argument);
}

// Large mean, tiny spread: the one-pass variance loses digits. The error is
// recorded rather than bounded.
TEST(LayerNormTest, CancellationIsMeasured) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<float> d(-0.01f, 0.01f);
  Batch2D x(1, 256);
  for (float& v : x.row(0)) v = 1000.0f + d(rng);
  const std::vector<float> gamma(256, 1.0f), beta(256, 0.0f);
  const Batch2D y = BatchedLayerNormOnePass(x, gamma, beta, 1e-5f);
  const auto want = reference::LayerNormTwoPass(x.row(0), gamma, beta, 1e-5f);
  long double worst = 0;
  for (int c = 0; c < 256; ++c) {
    worst = std::max(worst, std::fabs(y.at(0, c) - want[c]));
  }
  EXPECT_TRUE(y.AllFinite());
  RecordProperty("max_abs_error", std::to_string(static_cast<double>(worst)));
}

TEST(BlockReduceTest, ThirtyTwoOnes) {
  const auto s = SimulatedBlockReduce(Batch2D(1, 32, std::vector<float>(32, 1.0f)));
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0], 32.0f);
}

TEST(BlockReduceTest, TailMatchesZeroPadding) {
  std::mt19937_64 rng(7);
  const Batch2D x = RandomBatch(rng, 3, 37, 1);
  Batch2D padded(3, 64);
  for (int64_t r = 0; r < 3; ++r) {
    for (int c = 0; c < 37; ++c) padded.at(r, c) = x.at(r, c);
  }
  const auto a = SimulatedBlockReduce(x), b = SimulatedBlockReduce(padded);
  for (int r = 0; r < 3; ++r) {
    EXPECT_EQ(std::memcmp(&a[r], &b[r], sizeof(float)), 0);
  }
}

TEST(BlockReduceTest, InterleaveFactorDoesNotChangeBits) {
  std::mt19937_64 rng(8);
  const Batch2D x = RandomBatch(rng, 7, 101, 10);
  const auto one = SimulatedBlockReduce(x, 32, 1);
  for (int64_t per_block : {2, 3, 4}) {
    const auto many = SimulatedBlockReduce(x, 32, per_block);
    ASSERT_EQ(many.size(), one.size());
    EXPECT_EQ(std::memcmp(many.data(), one.data(), one.size() * sizeof(float)), 0)
        << per_block;
  }
}

TEST(BlockReduceTest, CloseToSequentialSum) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<float> d(0.0f, 1.0f);
  Batch2D x(16, 1000);
  for (int64_t r = 0; r < 16; ++r) {
    for (float& v : x.row(r)) v = d(rng);
  }
  const auto s = SimulatedBlockReduce(x);
  for (int64_t r = 0; r < 16; ++r) {
    const long double want = reference::SequentialSum(x.row(r));
    EXPECT_LE(std::fabs(s[r] - want), 1e-5 * std::fabs(want));
  }
}

TEST(BlockReduceTest, RejectsBadLaneCount) {
  Batch2D x(1, 8);
  EXPECT_THROW(SimulatedBlockReduce(x, 24), std::invalid_argument);
  EXPECT_THROW(SimulatedBlockReduce(x, 0), std::invalid_argument);
  EXPECT_THROW(SimulatedBlockReduce(x, 32, 0), std::invalid_argument);
}

}  // namespace
}  // namespace turbo

/*
 * Copyright 2026 The tripcon Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "tripcon/kernels.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "tripcon/rng.hpp"

namespace tripcon {
namespace {

std::vector<double> random_values(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

TEST(KernelsTest, GemmMatchesTripleLoopForEveryTransposeCombination) {
  Rng rng(7);
  const std::size_t m = 37, n = 23, k = 41;
  for (int mode = 0; mode < 4; ++mode) {
    kernels::GemmArgs g{(mode & 1) != 0, (mode & 2) != 0, m, n, k, false};
    const auto a = random_values(rng, m * k);
    const auto b = random_values(rng, k * n);
    std::vector<double> serial(m * n), parallel(m * n), naive(m * n, 0.0);
    kernels::serial::gemm(g, a, b, serial);
    kernels::omp::gemm(g, a, b, parallel);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t p = 0; p < k; ++p) {
          const double av = g.trans_a ? a[p * m + i] : a[i * k + p];
          const double bv = g.trans_b ? b[j * k + p] : b[p * n + j];
          naive[i * n + j] += av * bv;
        }
    EXPECT_EQ(serial, parallel) << "mode " << mode;
    for (std::size_t i = 0; i < naive.size(); ++i) EXPECT_NEAR(serial[i], naive[i], 1e-12);
  }
}

TEST(KernelsTest, GemmAccumulateAddsIntoOutput) {
  kernels::GemmArgs g{false, false, 1, 1, 2, true};
  std::vector<double> a{1, 2}, b{3, 4}, c{10};
  kernels::gemm(g, a, b, c);
  EXPECT_DOUBLE_EQ(c[0], 21.0);
}

TEST(KernelsTest, PairwiseCosineSerialAndParallelAreBitIdentical) {
  Rng rng(11);
  const std::size_t rows = 70, cols = 9;
  const auto x = random_values(rng, rows * cols);
  std::vector<double> serial(rows * rows), parallel(rows * rows);
  kernels::serial::pairwise_cosine(x, rows, cols, serial);
  kernels::omp::pairwise_cosine(x, rows, cols, parallel);
  EXPECT_EQ(serial, parallel);
  for (std::size_t i = 0; i < rows; ++i) {
    EXPECT_EQ(serial[i * rows + i], 1.0);
    for (std::size_t j = 0; j < rows; ++j) EXPECT_EQ(serial[i * rows + j], serial[j * rows + i]);
  }
}

TEST(KernelsTest, AveragePrecisionSerialAndParallelAreBitIdentical) {
  Rng rng(13);
  const std::size_t rows = 300, cols = 17;
  std::vector<double> scores(rows * cols);
  std::vector<std::uint8_t> labels(rows * cols);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    // Coarse scores to exercise tie blocks.
    scores[i] = std::round(rng.uniform() * 20.0) / 20.0;
    labels[i] = rng.uniform() < 0.2 ? 1 : 0;
  }
  // One column without positives.
  for (std::size_t r = 0; r < rows; ++r) labels[r * cols + 3] = 0;
  std::vector<double> ap_s(cols), ap_p(cols);
  std::vector<std::size_t> pos_s(cols), pos_p(cols);
  kernels::serial::average_precision_columns(scores, labels, rows, cols, ap_s, pos_s);
  kernels::omp::average_precision_columns(scores, labels, rows, cols, ap_p, pos_p);
  EXPECT_EQ(pos_s, pos_p);
  for (std::size_t c = 0; c < cols; ++c) {
    if (c == 3) {
      EXPECT_TRUE(std::isnan(ap_s[c]));
      EXPECT_TRUE(std::isnan(ap_p[c]));
      EXPECT_EQ(pos_s[c], 0u);
    } else {
      EXPECT_EQ(ap_s[c], ap_p[c]);
    }
  }
}

}  // namespace
}  // namespace tripcon

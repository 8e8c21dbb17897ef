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

#pragma once

// Data-parallel inner loops used by the tape, the sampler and the metrics.
//
// Every kernel exists twice: a serial reference and an OpenMP variant. Both
// partition work over independent output elements and accumulate in the same
// order, so their results are bit-identical; tests assert exactly that, and
// bench/ compares their throughput.

#include <cstddef>
#include <cstdint>
#include <span>

namespace tripcon::kernels {

// C[m x n] (+)= op(A) * op(B); A is m x k (k x m when transposed), B is
// k x n (n x k when transposed). All buffers row-major.
struct GemmArgs {
  bool trans_a = false;
  bool trans_b = false;
  std::size_t m = 0;
  std::size_t n = 0;
  std::size_t k = 0;
  bool accumulate = false;
};

// pairwise_cosine: out[i, j] = cos(x_i, x_j) for the rows of x (rows x cols). Rows must be
// nonzero; callers check.
// average_precision_columns: per-column average precision over descending score thresholds: tied scores
// form one block and every positive inside it gets the block-end precision.
// Columns without positives get NaN and positives[c] == 0.

namespace serial {
void gemm(const GemmArgs& args, std::span<const double> a, std::span<const double> b,
          std::span<double> c);
void pairwise_cosine(std::span<const double> x, std::size_t rows, std::size_t cols,
                     std::span<double> out);
void average_precision_columns(std::span<const double> scores, std::span<const std::uint8_t> labels,
                               std::size_t rows, std::size_t cols, std::span<double> ap,
                               std::span<std::size_t> positives);
}  // namespace serial

namespace omp {
void gemm(const GemmArgs& args, std::span<const double> a, std::span<const double> b,
          std::span<double> c);
void pairwise_cosine(std::span<const double> x, std::size_t rows, std::size_t cols,
                     std::span<double> out);
void average_precision_columns(std::span<const double> scores, std::span<const std::uint8_t> labels,
                               std::size_t rows, std::size_t cols, std::span<double> ap,
                               std::span<std::size_t> positives);
}  // namespace omp

// True when the OpenMP variants were compiled with OpenMP enabled.
bool openmp_enabled();

// Dispatchers: OpenMP variant above a work threshold, serial below it.
void gemm(const GemmArgs& args, std::span<const double> a, std::span<const double> b,
          std::span<double> c);
void pairwise_cosine(std::span<const double> x, std::size_t rows, std::size_t cols,
                     std::span<double> out);
void average_precision_columns(std::span<const double> scores, std::span<const std::uint8_t> labels,
                               std::size_t rows, std::size_t cols, std::span<double> ap,
                               std::span<std::size_t> positives);

}  // namespace tripcon::kernels

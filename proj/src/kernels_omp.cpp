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

#include "kernels_detail.hpp"

#include <cstdint>

namespace tripcon::kernels {

namespace omp {

void gemm(const GemmArgs& args, std::span<const double> a, std::span<const double> b,
          std::span<double> c) {
  const auto m = static_cast<std::int64_t>(args.m);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < m; ++i) {
    detail::gemm_row_dispatch(args, a, b, c, static_cast<std::size_t>(i));
  }
}

void pairwise_cosine(std::span<const double> x, std::size_t rows, std::size_t cols,
                     std::span<double> out) {
  std::vector<double> norms(rows);
  const auto n = static_cast<std::int64_t>(rows);
#pragma omp parallel
  {
#pragma omp for schedule(static)
    for (std::int64_t r = 0; r < n; ++r) {
      norms[static_cast<std::size_t>(r)] = detail::row_norm(x, cols, static_cast<std::size_t>(r));
    }
#pragma omp for schedule(dynamic, 4)
    for (std::int64_t i = 0; i < n; ++i) {
      detail::cosine_row(x, rows, cols, norms, out, static_cast<std::size_t>(i));
    }
  }
}

void average_precision_columns(std::span<const double> scores, std::span<const std::uint8_t> labels,
                               std::size_t rows, std::size_t cols, std::span<double> ap,
                               std::span<std::size_t> positives) {
  const auto n = static_cast<std::int64_t>(cols);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t c = 0; c < n; ++c) {
    detail::ap_column(scores, labels, rows, cols, ap, positives, static_cast<std::size_t>(c));
  }
}

}  // namespace omp

bool openmp_enabled() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

namespace {
// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kParallelWork = 1 << 16;
}  // namespace

void gemm(const GemmArgs& args, std::span<const double> a, std::span<const double> b,
          std::span<double> c) {
  if (openmp_enabled() && args.m * args.n * args.k >= kParallelWork && args.m > 1) {
    omp::gemm(args, a, b, c);
  } else {
    serial::gemm(args, a, b, c);
  }
}

void pairwise_cosine(std::span<const double> x, std::size_t rows, std::size_t cols,
                     std::span<double> out) {
  if (openmp_enabled() && rows * rows * cols >= kParallelWork) {
    omp::pairwise_cosine(x, rows, cols, out);
  } else {
    serial::pairwise_cosine(x, rows, cols, out);
  }
}

void average_precision_columns(std::span<const double> scores, std::span<const std::uint8_t> labels,
                               std::size_t rows, std::size_t cols, std::span<double> ap,
                               std::span<std::size_t> positives) {
  if (openmp_enabled() && cols > 1 && rows * cols >= kParallelWork / 16) {
    omp::average_precision_columns(scores, labels, rows, cols, ap, positives);
  } else {
    serial::average_precision_columns(scores, labels, rows, cols, ap, positives);
  }
}

}  // namespace tripcon::kernels

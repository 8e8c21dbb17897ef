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

namespace tripcon::kernels::serial {

void gemm(const GemmArgs& args, std::span<const double> a, std::span<const double> b,
          std::span<double> c) {
  for (std::size_t i = 0; i < args.m; ++i) detail::gemm_row_dispatch(args, a, b, c, i);
}

void pairwise_cosine(std::span<const double> x, std::size_t rows, std::size_t cols,
                     std::span<double> out) {
  std::vector<double> norms(rows);
  for (std::size_t r = 0; r < rows; ++r) norms[r] = detail::row_norm(x, cols, r);
  for (std::size_t i = 0; i < rows; ++i) detail::cosine_row(x, rows, cols, norms, out, i);
}

void average_precision_columns(std::span<const double> scores, std::span<const std::uint8_t> labels,
                               std::size_t rows, std::size_t cols, std::span<double> ap,
                               std::span<std::size_t> positives) {
  for (std::size_t c = 0; c < cols; ++c) detail::ap_column(scores, labels, rows, cols, ap, positives, c);
}

}  // namespace tripcon::kernels::serial

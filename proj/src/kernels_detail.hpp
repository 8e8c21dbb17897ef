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

// Loop bodies shared by the serial and OpenMP kernel variants. Keeping one
// body per output element is what makes the two variants bit-identical.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "tripcon/kernels.hpp"

namespace tripcon::kernels::detail {

template <bool TransA, bool TransB>
inline void gemm_row(const GemmArgs& g, std::span<const double> a, std::span<const double> b,
                     std::span<double> c, std::size_t i) {
  double* out = c.data() + i * g.n;
  if (!g.accumulate) std::fill(out, out + g.n, 0.0);
  for (std::size_t p = 0; p < g.k; ++p) {
    const double aip = TransA ? a[p * g.m + i] : a[i * g.k + p];
    if (aip == 0.0) continue;
    if constexpr (!TransB) {
      const double* brow = b.data() + p * g.n;
      for (std::size_t j = 0; j < g.n; ++j) out[j] += aip * brow[j];
    } else {
      for (std::size_t j = 0; j < g.n; ++j) out[j] += aip * b[j * g.k + p];
    }
  }
}

inline void gemm_row_dispatch(const GemmArgs& g, std::span<const double> a,
                              std::span<const double> b, std::span<double> c, std::size_t i) {
  if (g.trans_a) {
    g.trans_b ? gemm_row<true, true>(g, a, b, c, i) : gemm_row<true, false>(g, a, b, c, i);
  } else {
    g.trans_b ? gemm_row<false, true>(g, a, b, c, i) : gemm_row<false, false>(g, a, b, c, i);
  }
}

inline double row_norm(std::span<const double> x, std::size_t cols, std::size_t r) {
  double s = 0.0;
  for (std::size_t c = 0; c < cols; ++c) s += x[r * cols + c] * x[r * cols + c];
  return std::sqrt(s);
}

inline void cosine_row(std::span<const double> x, std::size_t rows, std::size_t cols,
                       std::span<const double> norms, std::span<double> out, std::size_t i) {
  for (std::size_t j = 0; j < rows; ++j) {
    if (j == i) {
      out[i * rows + j] = 1.0;
      continue;
    }
    // Symmetric by construction: the dot product is accumulated in the same
    // order for (i, j) and (j, i).
    const std::size_t lo = std::min(i, j), hi = std::max(i, j);
    double dot = 0.0;
    for (std::size_t c = 0; c < cols; ++c) dot += x[lo * cols + c] * x[hi * cols + c];
    const double v = dot / (norms[lo] * norms[hi]);
    out[i * rows + j] = std::clamp(v, -1.0, 1.0);
  }
}

inline void ap_column(std::span<const double> scores, std::span<const std::uint8_t> labels,
                      std::size_t rows, std::size_t cols, std::span<double> ap,
                      std::span<std::size_t> positives, std::size_t c) {
  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return scores[x * cols + c] > scores[y * cols + c];
  });
  std::size_t total_pos = 0;
  for (std::size_t r = 0; r < rows; ++r) total_pos += labels[r * cols + c] ? 1 : 0;
  positives[c] = total_pos;
  if (total_pos == 0) {
    ap[c] = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  double sum = 0.0;
  std::size_t seen = 0, seen_pos = 0;
  std::size_t r = 0;
  while (r < rows) {
    const double s = scores[order[r] * cols + c];
    std::size_t block_pos = 0;
    std::size_t end = r;
    while (end < rows && scores[order[end] * cols + c] == s) {
      block_pos += labels[order[end] * cols + c] ? 1 : 0;
      ++end;
    }
    seen += end - r;
    seen_pos += block_pos;
    if (block_pos) {
      sum += static_cast<double>(block_pos) * (static_cast<double>(seen_pos) / static_cast<double>(seen));
    }
    r = end;
  }
  ap[c] = sum / static_cast<double>(total_pos);
}

}  // namespace tripcon::kernels::detail

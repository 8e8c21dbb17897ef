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

// Minimal SVG charts for run reports. Output depends only on the inputs, so
// plots are as reproducible as the numbers behind them.

#include <string>
#include <vector>

namespace tripcon::plot {

struct Series {
  std::string name;
  std::vector<double> values;  // y per x = 0, 1, ...; NaN points are skipped
};

std::string line_chart(const std::string& title, const std::string& x_label, const std::vector<Series>& series);

// One bar per label; NaN bars are drawn as a gap with "n/a".
std::string bar_chart(const std::string& title, const std::vector<std::string>& labels,
                      const std::vector<double>& values, double y_max = 1.0);

}  // namespace tripcon::plot

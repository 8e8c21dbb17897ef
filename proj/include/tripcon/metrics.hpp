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

// Multi-label average precision for triplets and their component / pair
// projections.

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "tripcon/schema.hpp"
#include "tripcon/tensor.hpp"

namespace tripcon {

// Frame-major binary label matrix (frames x classes).
struct LabelMatrix {
  std::size_t frames = 0;
  std::size_t classes = 0;
  std::vector<std::uint8_t> bits;

  LabelMatrix() = default;
  LabelMatrix(std::size_t f, std::size_t c) : frames(f), classes(c), bits(f * c, 0) {}
  static LabelMatrix from_labels(const std::vector<MultiLabel>& labels, std::size_t classes);
  std::uint8_t at(std::size_t f, std::size_t c) const { return bits[f * classes + c]; }
};

struct ClassAp {
  std::vector<double> ap;             // NaN where undefined
  std::vector<std::size_t> positives;
};

// Per-class AP over descending scores; tied scores form one block.
ClassAp average_precision(const Tensor& scores, const LabelMatrix& labels);

// Group score = max over member triplets; group label = OR of members.
Tensor project_scores(const Tensor& triplet_scores, const GroupMap& map);
LabelMatrix project_labels(const LabelMatrix& labels, const GroupMap& map);

struct FamilyReport {
  MetricFamily family = MetricFamily::kIVT;
  std::vector<std::string> class_names;
  std::vector<double> ap;  // NaN for classes without positives
  std::vector<std::size_t> positives;
  double mean = 0.0;       // over defined classes; NaN if none
  std::size_t defined = 0;
};

struct EvalReport {
  std::array<FamilyReport, 6> families;
  std::size_t frames = 0;

  const FamilyReport& family(MetricFamily f) const { return families[static_cast<std::size_t>(f)]; }
  double mean(MetricFamily f) const { return family(f).mean; }

  nlohmann::json to_json() const;
  // family,class,name,ap,positives
  std::string to_csv() const;
};

EvalReport evaluate(const Tensor& scores, const LabelMatrix& labels, const TripletVocabulary& vocab);

}  // namespace tripcon

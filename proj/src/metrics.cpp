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

#include "tripcon/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "tripcon/errors.hpp"
#include "tripcon/kernels.hpp"

namespace tripcon {

LabelMatrix LabelMatrix::from_labels(const std::vector<MultiLabel>& labels, std::size_t classes) {
  LabelMatrix out(labels.size(), classes);
  for (std::size_t f = 0; f < labels.size(); ++f) {
    if (labels[f].size() != classes) throw ShapeError("label length differs from the class count");
    for (std::size_t c = 0; c < classes; ++c) out.bits[f * classes + c] = labels[f][c] ? 1 : 0;
  }
  return out;
}

ClassAp average_precision(const Tensor& scores, const LabelMatrix& labels) {
  if (scores.rank() != 2 || scores.rows() != labels.frames || scores.cols() != labels.classes) {
    throw ShapeError("scores " + shape_string(scores.shape()) + " do not align with " +
                     std::to_string(labels.frames) + " x " + std::to_string(labels.classes) + " labels");
  }
  if (labels.frames == 0) throw ShapeError("average precision needs at least one frame");
  ClassAp out{std::vector<double>(labels.classes), std::vector<std::size_t>(labels.classes)};
  kernels::average_precision_columns(scores.data(), labels.bits, labels.frames, labels.classes, out.ap,
                                     out.positives);
  return out;
}

Tensor project_scores(const Tensor& triplet_scores, const GroupMap& map) {
  if (triplet_scores.cols() != map.group_of.size()) throw ShapeError("score columns do not match the group map");
  const std::size_t frames = triplet_scores.rows();
  Tensor out({frames, map.groups}, -std::numeric_limits<double>::infinity());
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t c = 0; c < map.group_of.size(); ++c) {
      double& slot = out.at(f, map.group_of[c]);
      slot = std::max(slot, triplet_scores.at(f, c));
    }
  }
  return out;
}

LabelMatrix project_labels(const LabelMatrix& labels, const GroupMap& map) {
  if (labels.classes != map.group_of.size()) throw ShapeError("label columns do not match the group map");
  LabelMatrix out(labels.frames, map.groups);
  for (std::size_t f = 0; f < labels.frames; ++f) {
    for (std::size_t c = 0; c < labels.classes; ++c) {
      if (labels.at(f, c)) out.bits[f * map.groups + map.group_of[c]] = 1;
    }
  }
  return out;
}

namespace {

FamilyReport make_family(MetricFamily family, std::vector<std::string> names, const ClassAp& ap) {
  FamilyReport r;
  r.family = family;
  r.class_names = std::move(names);
  r.ap = ap.ap;
  r.positives = ap.positives;
  double sum = 0.0;
  for (double v : r.ap) {
    if (std::isnan(v)) continue;
    sum += v;
    ++r.defined;
  }
  r.mean = r.defined == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(r.defined);
  return r;
}

nlohmann::json number_or_null(double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }

}  // namespace

EvalReport evaluate(const Tensor& scores, const LabelMatrix& labels, const TripletVocabulary& vocab) {
  if (labels.classes != vocab.size()) throw ShapeError("labels do not match the vocabulary");
  EvalReport report;
  report.frames = labels.frames;
  const ComponentMaps maps = component_maps(vocab);
  for (MetricFamily f : kAllFamilies) {
    if (f == MetricFamily::kIVT) {
      std::vector<std::string> names;
      for (std::size_t c = 0; c < vocab.size(); ++c) names.push_back(vocab.triplet_name(c));
      report.families[static_cast<std::size_t>(f)] = make_family(f, names, average_precision(scores, labels));
      continue;
    }
    const GroupMap& map = maps.family(f);
    report.families[static_cast<std::size_t>(f)] = make_family(
        f, map.group_names, average_precision(project_scores(scores, map), project_labels(labels, map)));
  }
  return report;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json out = {{"frames", frames}};
  nlohmann::json fams = nlohmann::json::object();
  for (const FamilyReport& f : families) {
    nlohmann::json classes = nlohmann::json::array();
    for (std::size_t c = 0; c < f.ap.size(); ++c) {
      classes.push_back({{"name", f.class_names[c]},
                         {"ap", number_or_null(f.ap[c])},
                         {"positives", f.positives[c]},
                         {"defined", !std::isnan(f.ap[c])}});
    }
    fams[std::string(family_name(f.family))] = {
        {"mean", number_or_null(f.mean)}, {"defined_classes", f.defined}, {"classes", classes}};
  }
  out["families"] = fams;
  return out;
}

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os << "family,class,name,ap,positives\n";
  os << std::setprecision(17);
  for (const FamilyReport& f : families) {
    for (std::size_t c = 0; c < f.ap.size(); ++c) {
      os << family_name(f.family) << ',' << c << ",\"" << f.class_names[c] << "\",";
      if (!std::isnan(f.ap[c])) os << f.ap[c];
      os << ',' << f.positives[c] << '\n';
    }
  }
  return os.str();
}

}  // namespace tripcon

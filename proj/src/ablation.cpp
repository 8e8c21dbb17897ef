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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "tripcon/errors.hpp"
#include "tripcon/pipeline.hpp"

namespace tripcon {

namespace {

const char* const kKinds[] = {"toggles", "curriculum_order", "mixup_alpha", "strides"};

std::string number(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string mark(bool on) { return on ? "x" : ""; }

Toggles toggles_from_bits(std::initializer_list<int> bits) {
  auto it = bits.begin();
  Toggles t;
  t.supcon = *it++;
  t.curriculum = *it++;
  t.input_mixup = *it++;
  t.feature_mixup = *it++;
  t.gamma = *it++;
  t.beta = *it;
  return t;
}

std::string toggle_label(const Toggles& t) {
  std::string s;
  for (bool b : {t.supcon, t.curriculum, t.input_mixup, t.feature_mixup, t.gamma, t.beta}) s += b ? '1' : '0';
  return s;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

std::string join(const std::vector<std::size_t>& parts, const std::string& sep) {
  std::vector<std::string> s;
  for (auto p : parts) s.push_back(std::to_string(p));
  return join(s, sep);
}

}  // namespace

std::vector<AblationRow> ablation_rows(const RunConfig& base, const nlohmann::json& sweep) {
  if (!sweep.is_object() || !sweep.contains("kind")) throw ConfigError("sweep definition needs a \"kind\"");
  const std::string kind = sweep["kind"].get<std::string>();
  const bool custom = sweep.contains("rows");
  std::vector<AblationRow> rows;
  auto push = [&](std::string label, RunConfig c) { rows.push_back({std::move(label), std::move(c), {}, 0.0, 0.0}); };

  if (kind == "toggles") {
    std::vector<Toggles> grid;
    if (custom) {
      for (const auto& r : sweep["rows"]) grid.push_back(r.get<Toggles>());
    } else {
      grid = {toggles_from_bits({0, 0, 0, 0, 0, 0}), toggles_from_bits({1, 0, 0, 0, 0, 0}),
              toggles_from_bits({1, 1, 0, 0, 0, 0}), toggles_from_bits({1, 1, 1, 0, 0, 0}),
              toggles_from_bits({1, 1, 1, 1, 0, 0}), toggles_from_bits({1, 1, 1, 1, 1, 0}),
              toggles_from_bits({1, 1, 1, 1, 0, 1}), toggles_from_bits({1, 1, 1, 1, 1, 1})};
    }
    for (const auto& t : grid) {
      RunConfig c = base;
      c.toggles = t;
      push(toggle_label(t), c);
    }
  } else if (kind == "curriculum_order") {
    std::vector<std::vector<std::string>> orders{{"T", "IT", "IVT"}, {"V", "VT", "IVT"}, {"I", "IV", "IVT"}};
    if (custom) orders = sweep["rows"].get<std::vector<std::vector<std::string>>>();
    for (const auto& o : orders) {
      RunConfig c = base;
      c.curriculum = o;
      c.toggles.supcon = c.toggles.curriculum = true;
      push(join(o, ">"), c);
    }
  } else if (kind == "mixup_alpha") {
    std::vector<std::pair<double, double>> grid;  // (alpha_feat, alpha_input)
    if (custom) {
      for (const auto& r : sweep["rows"]) grid.emplace_back(r.at("alpha_feat").get<double>(), r.at("alpha_input").get<double>());
    } else {
      for (double a : {0.1, 0.2, 0.3, 0.4}) grid.emplace_back(a, 0.4);
      for (double a : {0.1, 0.2, 0.3, 0.4}) grid.emplace_back(0.4, a);
    }
    for (const auto& [feat, input] : grid) {
      RunConfig c = base;
      c.loss.alpha_feat = feat;
      c.loss.alpha_input = input;
      push("feat=" + number(feat) + " input=" + number(input), c);
    }
  } else if (kind == "strides") {
    std::vector<std::vector<std::size_t>> sets{{2, 3, 4}, {4, 5, 6}};
    if (custom) sets = sweep["rows"].get<std::vector<std::vector<std::size_t>>>();
    for (const auto& s : sets) {
      RunConfig c = base;
      c.temporal.pathway.strides = s;
      push("{" + join(s, ",") + "}", c);
    }
  } else {
    throw ConfigError("unknown sweep kind '" + kind + "'");
  }
  if (rows.empty()) throw ConfigError("sweep has no rows");
  for (const auto& r : rows) r.config.validate();
  return rows;
}

std::string AblationResult::to_csv() const {
  std::ostringstream os;
  if (kind == "toggles") {
    os << "supcon,curriculum,input_mixup,feature_mixup,gamma,beta";
  } else {
    os << "config";
  }
  for (auto s : seeds) os << ",seed_" << s;
  os << ",mean_ap_ivt,sd_ap_ivt\n";
  for (const auto& r : rows) {
    if (kind == "toggles") {
      const Toggles& t = r.config.toggles;
      os << t.supcon << ',' << t.curriculum << ',' << t.input_mixup << ',' << t.feature_mixup << ',' << t.gamma << ','
         << t.beta;
    } else {
      os << '"' << r.label << '"';
    }
    for (double v : r.val_ap_ivt) os << ',' << number(v);
    os << ',' << number(r.mean) << ',' << number(r.sd) << '\n';
  }
  return os.str();
}

std::string AblationResult::to_markdown() const {
  std::ostringstream os;
  if (kind == "toggles") {
    os << "| SupCon | Curriculum | Input Mixup | Feature Mixup | Multi-Res (gamma) | Spatio-Temporal (beta) | AP_IVT |\n"
       << "|---|---|---|---|---|---|---|\n";
    for (const auto& r : rows) {
      const Toggles& t = r.config.toggles;
      os << "| " << mark(t.supcon) << " | " << mark(t.curriculum) << " | " << mark(t.input_mixup) << " | "
         << mark(t.feature_mixup) << " | " << mark(t.gamma) << " | " << mark(t.beta) << " | " << number(r.mean)
         << " +- " << number(r.sd) << " |\n";
    }
  } else {
    const char* header = kind == "curriculum_order" ? "Stage order"
                         : kind == "mixup_alpha"   ? "Mixup alphas"
                                                   : "Strides";
    os << "| " << header << " | AP_IVT |\n|---|---|\n";
    for (const auto& r : rows) os << "| " << r.label << " | " << number(r.mean) << " +- " << number(r.sd) << " |\n";
  }
  os << "\nHeld-out AP_IVT, mean +- sd over seeds";
  for (std::size_t i = 0; i < seeds.size(); ++i) os << (i ? ", " : " ") << seeds[i];
  os << ".\n";
  return os.str();
}

AblationResult cmd_ablate(const RunConfig& config, const nlohmann::json& sweep, const RunDir& dir) {
  AblationResult result;
  result.kind = sweep.value("kind", "");
  if (std::find(std::begin(kKinds), std::end(kKinds), result.kind) == std::end(kKinds)) {
    throw ConfigError("unknown sweep kind '" + result.kind + "'");
  }
  if (!sweep.contains("seeds") || !sweep["seeds"].is_array() || sweep["seeds"].empty()) {
    throw ConfigError("sweep definition needs a non-empty \"seeds\" array");
  }
  result.seeds = sweep["seeds"].get<std::vector<std::uint64_t>>();
  result.rows = ablation_rows(config, sweep);
  dir.prepare(config, result.seeds.front());
  for (std::size_t r = 0; r < result.rows.size(); ++r) {
    AblationRow& row = result.rows[r];
    for (std::uint64_t seed : result.seeds) {
      spdlog::info("ablate {} row {} ({}) seed {}", result.kind, r, row.label, seed);
      const RunDir sub(dir.root() / ("row" + std::to_string(r)) / ("seed" + std::to_string(seed)));
      row.val_ap_ivt.push_back(cmd_run(row.config, seed, sub).val.mean(MetricFamily::kIVT));
    }
    const double n = static_cast<double>(row.val_ap_ivt.size());
    row.mean = 0.0;
    for (double v : row.val_ap_ivt) row.mean += v / n;
    double ss = 0.0;
    for (double v : row.val_ap_ivt) ss += (v - row.mean) * (v - row.mean);
    row.sd = row.val_ap_ivt.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  }
  const std::string stem = "ablation_" + result.kind;
  std::ofstream(dir.report(stem + ".csv"), std::ios::binary) << result.to_csv();
  std::ofstream(dir.report(stem + ".md"), std::ios::binary) << result.to_markdown();
  std::ofstream(dir.report(stem + "_sweep.json"), std::ios::binary) << sweep.dump(2) << "\n";
  return result;
}

}  // namespace tripcon

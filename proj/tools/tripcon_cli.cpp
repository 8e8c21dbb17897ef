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

// Command-line front end: one subcommand per pipeline stage.
//
//   tripcon <gen-data|pretrain|distill|train-temporal|evaluate|ablate|run>
//           [--config FILE] [--seed N] --out DIR [command options]
//
// Failures print {"kind": ..., "message": ...} on stderr and exit nonzero.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "tripcon/config.hpp"
#include "tripcon/errors.hpp"
#include "tripcon/pipeline.hpp"

namespace {

int fail(const std::string& kind, const std::string& message) {
  std::cerr << nlohmann::json{{"kind", kind}, {"message", message}}.dump() << std::endl;
  return kind == "usage" ? 2 : 1;
}

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON config; omitted fields take the desk preset")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "run seed");
  cmd->add_option("--out", c.out, "run directory")->required();
}

tripcon::RunConfig resolve(const Common& c) {
  if (c.config.empty()) {
    auto cfg = tripcon::RunConfig::desk();
    cfg.validate();
    return cfg;
  }
  return tripcon::load_run_config(c.config);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"contrastive triplet recognition pipeline"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "only print warnings and errors");

  Common common;
  auto* gen = app.add_subcommand("gen-data", "generate the synthetic dataset");
  auto* pre = app.add_subcommand("pretrain", "curriculum contrastive pretraining");
  auto* dis = app.add_subcommand("distill", "teacher training and self-distillation");
  auto* tmp = app.add_subcommand("train-temporal", "train the temporal transformer on frozen features");
  auto* eva = app.add_subcommand("evaluate", "AP report for one split");
  auto* abl = app.add_subcommand("ablate", "run a sweep of configurations");
  auto* run = app.add_subcommand("run", "every stage, then evaluation of both splits");
  for (auto* cmd : {gen, pre, dis, tmp, eva, abl, run}) add_common(cmd, common);

  std::string split = "val";
  std::string mode = "full";
  bool spatial_only = false, frame_level = false, oracle = false;
  eva->add_option("--split", split, "train or val")->check(CLI::IsMember({"train", "val"}));
  eva->add_option("--mode", mode, "full, spatial, frame, teacher or oracle");
  eva->add_flag("--spatial-only", spatial_only, "score with the spatial head alone (beta = 1)");
  eva->add_flag("--frame-level", frame_level, "score with the student per frame");
  eva->add_flag("--oracle", oracle, "score the ground truth itself");

  std::string sweep_path;
  abl->add_option("--sweep", sweep_path, "JSON sweep definition")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }
  if (quiet) spdlog::set_level(spdlog::level::warn);

  try {
    const tripcon::RunConfig config = resolve(common);
    const tripcon::RunDir dir(common.out);
    if (*gen) {
      tripcon::cmd_gen_data(config, common.seed, dir);
    } else if (*pre) {
      tripcon::cmd_pretrain(config, common.seed, dir);
    } else if (*dis) {
      tripcon::cmd_distill(config, common.seed, dir);
    } else if (*tmp) {
      tripcon::cmd_train_temporal(config, common.seed, dir);
    } else if (*eva) {
      if (spatial_only + frame_level + oracle > 1) return fail("usage", "choose at most one evaluation flag");
      if (spatial_only) mode = "spatial";
      if (frame_level) mode = "frame";
      if (oracle) mode = "oracle";
      const auto report = tripcon::cmd_evaluate(config, common.seed, dir,
                                                {split == "train", tripcon::parse_eval_mode(mode)});
      std::cout << report.to_json().dump(2) << std::endl;
    } else if (*abl) {
      std::ifstream in(sweep_path);
      const auto result = tripcon::cmd_ablate(config, nlohmann::json::parse(in), dir);
      std::cout << result.to_markdown();
    } else if (*run) {
      const auto summary = tripcon::cmd_run(config, common.seed, dir);
      std::cout << nlohmann::json{{"train_ap_ivt", summary.train.mean(tripcon::MetricFamily::kIVT)},
                                  {"val_ap_ivt", summary.val.mean(tripcon::MetricFamily::kIVT)}}
                       .dump(2)
                << std::endl;
    }
  } catch (const tripcon::Error& e) {
    return fail(e.kind(), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail("config", e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 0;
}

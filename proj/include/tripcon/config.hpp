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

// Run configuration shared by every pipeline subcommand.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tripcon/datagen.hpp"
#include "tripcon/encoder.hpp"
#include "tripcon/losses.hpp"
#include "tripcon/mrtt.hpp"
#include "tripcon/params.hpp"
#include "tripcon/sampler.hpp"

namespace tripcon {

// Component switches, one per ablation column.
struct Toggles {
  bool supcon = true;
  bool curriculum = true;
  bool input_mixup = true;
  bool feature_mixup = true;
  bool gamma = true;  // learned multi-resolution fusion
  bool beta = true;   // learned spatio-temporal blend

  bool temporal() const { return gamma || beta; }
  friend bool operator==(const Toggles&, const Toggles&) = default;
};

struct TemporalConfig {
  PathwayConfig pathway;
  std::size_t window = 32;
  std::size_t hop = 8;
  std::size_t batch_size = 8;
  std::size_t epochs = 10;
  bool pathway_loss = false;  // auxiliary BCE on every Z_k
  AdamWConfig optimizer;
};

struct RunConfig {
  SyntheticConfig data;
  std::optional<std::filesystem::path> dataset;  // default: <out>/data/dataset.bin
  EncoderConfig encoder;
  std::vector<std::string> curriculum{"T", "IT", "IVT"};
  std::size_t pretrain_epochs = 3;  // split equally over the stages
  std::size_t teacher_epochs = 8;
  std::size_t student_epochs = 12;
  std::size_t batch_size = 64;
  bool teacher_from_pretrained = true;
  AdamWConfig pretrain_optimizer;
  AdamWConfig finetune_optimizer;
  LossConfig loss;
  SamplerConfig sampler;
  TemporalConfig temporal;
  Toggles toggles;

  // Checks invariants and toggle dependencies; throws ConfigError.
  void validate() const;

  // Stage sequence actually used: the curriculum, or IVT alone when the
  // curriculum is off.
  std::vector<Stage> stages() const;
  // Epochs per stage; the total is split as evenly as possible, with any
  // remainder going to the later stages.
  std::vector<std::size_t> stage_epochs() const;

  // The desk preset.
  static RunConfig desk();
};

void to_json(nlohmann::json& j, const Toggles& t);
void from_json(const nlohmann::json& j, Toggles& t);
void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

// Parses a config file on top of the desk preset.
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace tripcon

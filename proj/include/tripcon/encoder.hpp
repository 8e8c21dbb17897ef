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

// Toy MLP backbone with a projection head for contrastive training and a
// classification head for fine-tuning.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "tripcon/autodiff.hpp"
#include "tripcon/params.hpp"

namespace tripcon {

struct EncoderConfig {
  std::size_t input_dim = 32;
  std::vector<std::size_t> hidden{128, 128};
  std::size_t feature_dim = 64;
  std::size_t projection_dim = 32;
  std::size_t classes = 12;

  void validate() const;
};

void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);

// Weights are stored [in, out] so a layer is x W + b.
class ToyEncoder {
 public:
  ToyEncoder(EncoderConfig config, std::uint64_t seed);

  const EncoderConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  // obs: B x D -> f: B x d (ReLU between layers, none after the last).
  Var encode(const Bindings& b, Var obs) const;
  // z = normalize(f W_p + b_p).
  Var project_normalize(const Bindings& b, Var f) const;
  // Logits f W_c + b_c; callers apply the sigmoid.
  Var classify(const Bindings& b, Var f) const;

  // Parameter names of the backbone only (no heads).
  std::vector<std::string> backbone_names() const;

  // Eval-mode helpers on a private no-grad tape.
  Tensor features(const Tensor& obs) const;
  Tensor probabilities(const Tensor& obs) const;

 private:
  EncoderConfig config_;
  ParameterSet params_;
};

}  // namespace tripcon

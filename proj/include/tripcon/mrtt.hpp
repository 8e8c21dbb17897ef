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

// Multi-resolution temporal transformer over frozen frame embeddings.
//
// Each pathway pools the sequence with stride k, runs a pre-norm
// transformer encoder over the pooled sequence plus sinusoidal positions,
// interpolates back to T frames and applies its own head. Pathway logits are
// fused with gamma = softmax(w); a per-frame spatial head is blended in with
// beta = sigmoid(b_beta).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tripcon/autodiff.hpp"
#include "tripcon/params.hpp"

namespace tripcon {

struct PathwayConfig {
  std::vector<std::size_t> strides{4, 5, 6};
  std::size_t layers = 3;
  std::size_t heads = 4;
  std::size_t ff_width = 2048;
  double dropout = 0.1;

  void validate(std::size_t model_dim) const;
};

void to_json(nlohmann::json& j, const PathwayConfig& c);
void from_json(const nlohmann::json& j, PathwayConfig& c);

struct MrttConfig {
  std::size_t embed_dim = 64;
  std::size_t classes = 12;
  PathwayConfig pathway;
  bool learn_gamma = true;  // off: w is held at 0, i.e. a uniform average
  bool use_beta = true;     // off: beta is 0 and the spatial head is unused
};

// length x dim; lane 2i holds sin(pos / 10000^(2i/dim)), lane 2i+1 the cos.
Tensor sinusoidal_pe(std::size_t length, std::size_t dim);

struct MrttOutput {
  std::vector<Var> pathways;  // Z_k, each B x T x C
  Var temporal;               // Z_temp
  Var spatial;                // Z_spat (invalid when beta is off)
  Var final_logits;           // Z_final
  Var gamma;                  // 1 x K
  Var beta;                   // scalar
};

class MrttModel {
 public:
  MrttModel(MrttConfig config, std::uint64_t seed);

  const MrttConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  // Names held constant during training under the current toggles.
  std::vector<std::string> frozen_names() const;

  // One pathway: E is B x T x C_e (or T x C_e), mask is B x T validity.
  Var pathway_forward(const Bindings& b, std::size_t path, Var e, const Tensor& mask, Rng* rng, bool train) const;
  Var spatial_head(const Bindings& b, Var e) const;
  MrttOutput forward(const Bindings& b, Var e, const Tensor& mask, Rng* rng, bool train) const;

  // Current gamma and beta values implied by the parameters and toggles.
  std::vector<double> gamma() const;
  double beta() const;

  // Eval-mode sigmoid(Z_final) (or sigmoid(Z_spat) when spatial_only).
  Tensor probabilities(const Tensor& e, const Tensor& mask, bool spatial_only = false) const;

 private:
  Var encoder_stack(const Bindings& b, const std::string& prefix, Var x, Rng* rng, bool train) const;

  MrttConfig config_;
  ParameterSet params_;
};

// Z_temp = sum_k gamma_k Z_k with gamma = softmax(w); w is 1 x K.
Var fuse_multires(std::span<const Var> pathways, Var w);
// Z_final = beta Z_spat + (1 - beta) Z_temp with beta = sigmoid(b_beta).
Var fuse_spatiotemporal(Var spatial, Var temporal, Var b_beta);

}  // namespace tripcon

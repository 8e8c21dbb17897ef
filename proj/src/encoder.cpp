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

#include "tripcon/encoder.hpp"

#include "tripcon/errors.hpp"

namespace tripcon {

void EncoderConfig::validate() const {
  if (input_dim == 0 || feature_dim == 0 || projection_dim == 0 || classes == 0) {
    throw ConfigError("encoder dimensions must be positive");
  }
  for (std::size_t h : hidden) {
    if (h == 0) throw ConfigError("hidden widths must be positive");
  }
}

void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = {{"input_dim", c.input_dim},
       {"hidden", c.hidden},
       {"feature_dim", c.feature_dim},
       {"projection_dim", c.projection_dim},
       {"classes", c.classes}};
}

void from_json(const nlohmann::json& j, EncoderConfig& c) {
  c.input_dim = j.value("input_dim", c.input_dim);
  c.hidden = j.value("hidden", c.hidden);
  c.feature_dim = j.value("feature_dim", c.feature_dim);
  c.projection_dim = j.value("projection_dim", c.projection_dim);
  c.classes = j.value("classes", c.classes);
}

namespace {

std::string layer_name(std::size_t l, const char* what) {
  return "backbone." + std::to_string(l) + "." + what;
}

}  // namespace

ToyEncoder::ToyEncoder(EncoderConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed);
  std::size_t in = config_.input_dim;
  std::vector<std::size_t> widths = config_.hidden;
  widths.push_back(config_.feature_dim);
  for (std::size_t l = 0; l < widths.size(); ++l) {
    params_.add(layer_name(l, "weight"), uniform_fan_in({in, widths[l]}, in, rng));
    params_.add(layer_name(l, "bias"), uniform_fan_in({widths[l]}, in, rng));
    in = widths[l];
  }
  const std::size_t d = config_.feature_dim;
  params_.add("projection.weight", uniform_fan_in({d, config_.projection_dim}, d, rng));
  params_.add("projection.bias", uniform_fan_in({config_.projection_dim}, d, rng));
  params_.add("classifier.weight", uniform_fan_in({d, config_.classes}, d, rng));
  params_.add("classifier.bias", uniform_fan_in({config_.classes}, d, rng));
}

Var ToyEncoder::encode(const Bindings& b, Var obs) const {
  if (obs.value().cols() != config_.input_dim) {
    throw ShapeError("encoder expects " + std::to_string(config_.input_dim) + " input features, got " +
                     shape_string(obs.shape()));
  }
  Var h = obs;
  const std::size_t layers = config_.hidden.size() + 1;
  for (std::size_t l = 0; l < layers; ++l) {
    h = ops::add(ops::matmul(h, b[layer_name(l, "weight")]), b[layer_name(l, "bias")]);
    if (l + 1 < layers) h = ops::relu(h);
  }
  return h;
}

Var ToyEncoder::project_normalize(const Bindings& b, Var f) const {
  return ops::l2_normalize_rows(ops::add(ops::matmul(f, b["projection.weight"]), b["projection.bias"]));
}

Var ToyEncoder::classify(const Bindings& b, Var f) const {
  return ops::add(ops::matmul(f, b["classifier.weight"]), b["classifier.bias"]);
}

std::vector<std::string> ToyEncoder::backbone_names() const {
  std::vector<std::string> out;
  for (const auto& [name, t] : params_.entries()) {
    if (name.rfind("backbone.", 0) == 0) out.push_back(name);
  }
  return out;
}

Tensor ToyEncoder::features(const Tensor& obs) const {
  Tape tape(false);
  const Bindings b(tape, params_, false);
  return encode(b, tape.constant(obs)).value();
}

Tensor ToyEncoder::probabilities(const Tensor& obs) const {
  Tape tape(false);
  const Bindings b(tape, params_, false);
  return ops::sigmoid(classify(b, encode(b, tape.constant(obs)))).value();
}

}  // namespace tripcon

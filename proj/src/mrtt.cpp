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

#include "tripcon/mrtt.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "tripcon/errors.hpp"

namespace tripcon {

void PathwayConfig::validate(std::size_t model_dim) const {
  if (strides.empty()) throw ConfigError("at least one pathway stride is required");
  std::set<std::size_t> seen;
  for (std::size_t k : strides) {
    if (k == 0) throw ConfigError("pathway strides must be at least 1");
    if (!seen.insert(k).second) throw ConfigError("pathway strides must be unique");
  }
  if (heads == 0 || model_dim % heads != 0) {
    throw ConfigError("attention heads (" + std::to_string(heads) + ") must divide the model width (" +
                      std::to_string(model_dim) + ")");
  }
  if (ff_width == 0) throw ConfigError("feed-forward width must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
}

void to_json(nlohmann::json& j, const PathwayConfig& c) {
  j = {{"strides", c.strides}, {"layers", c.layers}, {"heads", c.heads}, {"ff_width", c.ff_width},
       {"dropout", c.dropout}};
}

void from_json(const nlohmann::json& j, PathwayConfig& c) {
  c.strides = j.value("strides", c.strides);
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.ff_width = j.value("ff_width", c.ff_width);
  c.dropout = j.value("dropout", c.dropout);
}

Tensor sinusoidal_pe(std::size_t length, std::size_t dim) {
  if (dim % 2 != 0) throw ShapeError("positional encoding needs an even width");
  Tensor pe({length, dim});
  for (std::size_t pos = 0; pos < length; ++pos) {
    for (std::size_t i = 0; i < dim / 2; ++i) {
      const double angle =
          static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(dim));
      pe.at(pos, 2 * i) = std::sin(angle);
      pe.at(pos, 2 * i + 1) = std::cos(angle);
    }
  }
  return pe;
}

namespace {

std::string path_prefix(std::size_t p) { return "path" + std::to_string(p) + "."; }

void add_linear(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  params.add(name + ".weight", uniform_fan_in({in, out}, in, rng));
  params.add(name + ".bias", uniform_fan_in({out}, in, rng));
}

Var linear(const Bindings& b, const std::string& name, Var x) {
  return ops::add(ops::matmul(x, b[name + ".weight"]), b[name + ".bias"]);
}

}  // namespace

MrttModel::MrttModel(MrttConfig config, std::uint64_t seed) : config_(std::move(config)) {
  const std::size_t d = config_.embed_dim;
  config_.pathway.validate(d);
  if (d % 2 != 0) throw ConfigError("MRTT width must be even for positional encodings");
  Rng rng(seed);
  const PathwayConfig& pc = config_.pathway;
  for (std::size_t p = 0; p < pc.strides.size(); ++p) {
    const std::string pre = path_prefix(p);
    for (std::size_t l = 0; l < pc.layers; ++l) {
      const std::string lp = pre + "layer" + std::to_string(l) + ".";
      add_linear(params_, lp + "query", d, d, rng);
      add_linear(params_, lp + "key", d, d, rng);
      add_linear(params_, lp + "value", d, d, rng);
      add_linear(params_, lp + "output", d, d, rng);
      add_linear(params_, lp + "ff1", d, pc.ff_width, rng);
      add_linear(params_, lp + "ff2", pc.ff_width, d, rng);
    }
    params_.add(pre + "norm.gain", Tensor({d}, 1.0));
    params_.add(pre + "norm.bias", Tensor({d}, 0.0));
    add_linear(params_, pre + "head", d, config_.classes, rng);
  }
  add_linear(params_, "spatial", d, config_.classes, rng);
  params_.add("fusion.w", Tensor({1, pc.strides.size()}, 0.0));
  params_.add("fusion.b_beta", Tensor::scalar(0.0));
}

std::vector<std::string> MrttModel::frozen_names() const {
  std::vector<std::string> out;
  if (!config_.learn_gamma) out.push_back("fusion.w");
  if (!config_.use_beta) {
    out.push_back("fusion.b_beta");
    out.push_back("spatial.weight");
    out.push_back("spatial.bias");
  }
  return out;
}

Var MrttModel::encoder_stack(const Bindings& b, const std::string& prefix, Var x, Rng* rng, bool train) const {
  const PathwayConfig& pc = config_.pathway;
  const double rate = train ? pc.dropout : 0.0;
  for (std::size_t l = 0; l < pc.layers; ++l) {
    const std::string lp = prefix + "layer" + std::to_string(l) + ".";
    Var a = ops::layer_norm_rows(x);
    const Var att = ops::attention(linear(b, lp + "query", a), linear(b, lp + "key", a), linear(b, lp + "value", a),
                                   pc.heads);
    x = ops::add(x, ops::dropout(linear(b, lp + "output", att), rate, rng, train));
    a = ops::layer_norm_rows(x);
    const Var ff = linear(b, lp + "ff2", ops::relu(linear(b, lp + "ff1", a)));
    x = ops::add(x, ops::dropout(ff, rate, rng, train));
  }
  return ops::add(ops::mul(ops::layer_norm_rows(x), b[prefix + "norm.gain"]), b[prefix + "norm.bias"]);
}

Var MrttModel::pathway_forward(const Bindings& b, std::size_t path, Var e, const Tensor& mask, Rng* rng,
                               bool train) const {
  const std::size_t k = config_.pathway.strides.at(path);
  const Shape& shape = e.shape();
  if (shape.size() < 2 || shape.back() != config_.embed_dim) {
    throw ShapeError("MRTT expects embeddings of width " + std::to_string(config_.embed_dim) + ", got " +
                     shape_string(shape));
  }
  const std::size_t t = shape[shape.size() - 2];
  if (t < k) throw ShapeError("sequence length " + std::to_string(t) + " is shorter than stride " + std::to_string(k));
  const Var pooled = ops::masked_mean_pool(e, mask, k);
  const Var x = ops::add(pooled, ops::constant_like(e, sinusoidal_pe(pooled_length(t, k), config_.embed_dim)));
  const Var h = encoder_stack(b, path_prefix(path), x, rng, train);
  return linear(b, path_prefix(path) + "head", ops::upsample_linear(h, t));
}

Var MrttModel::spatial_head(const Bindings& b, Var e) const { return linear(b, "spatial", e); }

Var fuse_multires(std::span<const Var> pathways, Var w) {
  if (pathways.empty()) throw ShapeError("no pathways to fuse");
  if (w.value().size() != pathways.size()) throw ShapeError("one fusion logit per pathway expected");
  if (w.value().rank() != 2) throw ShapeError("fusion logits must be 1 x K");
  const Var gamma = ops::softmax_rows(w);
  Var out;
  for (std::size_t k = 0; k < pathways.size(); ++k) {
    if (pathways[k].shape() != pathways[0].shape()) throw ShapeError("pathway outputs differ in shape");
    const Var term = ops::mul(pathways[k], ops::slice(gamma, 1, k, k + 1));
    out = k == 0 ? term : ops::add(out, term);
  }
  return out;
}

Var fuse_spatiotemporal(Var spatial, Var temporal, Var b_beta) {
  if (spatial.shape() != temporal.shape()) throw ShapeError("spatial and temporal logits differ in shape");
  const Var beta = ops::sigmoid(b_beta);
  return ops::add(temporal, ops::mul(ops::sub(spatial, temporal), beta));
}

MrttOutput MrttModel::forward(const Bindings& b, Var e, const Tensor& mask, Rng* rng, bool train) const {
  MrttOutput out;
  for (std::size_t p = 0; p < config_.pathway.strides.size(); ++p) {
    out.pathways.push_back(pathway_forward(b, p, e, mask, rng, train));
  }
  const Var w = config_.learn_gamma ? b["fusion.w"] : ops::constant_like(e, Tensor({1, out.pathways.size()}, 0.0));
  out.gamma = ops::softmax_rows(w);
  out.temporal = fuse_multires(out.pathways, w);
  if (config_.use_beta) {
    out.spatial = spatial_head(b, e);
    out.beta = ops::sigmoid(b["fusion.b_beta"]);
    out.final_logits = fuse_spatiotemporal(out.spatial, out.temporal, b["fusion.b_beta"]);
  } else {
    out.beta = ops::constant_like(e, Tensor::scalar(0.0));
    out.final_logits = out.temporal;
  }
  return out;
}

std::vector<double> MrttModel::gamma() const {
  const std::size_t k = config_.pathway.strides.size();
  if (!config_.learn_gamma) return std::vector<double>(k, 1.0 / static_cast<double>(k));
  Tape tape(false);
  const Tensor g = ops::softmax_rows(tape.constant(params_.get("fusion.w"))).value();
  return {g.data().begin(), g.data().end()};
}

double MrttModel::beta() const {
  if (!config_.use_beta) return 0.0;
  return 1.0 / (1.0 + std::exp(-params_.get("fusion.b_beta").item()));
}

Tensor MrttModel::probabilities(const Tensor& e, const Tensor& mask, bool spatial_only) const {
  Tape tape(false);
  const Bindings b(tape, params_, false);
  const Var ev = tape.constant(e);
  if (spatial_only) return ops::sigmoid(spatial_head(b, ev)).value();
  return ops::sigmoid(forward(b, ev, mask, nullptr, false).final_logits).value();
}

}  // namespace tripcon

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

// Named parameter storage, tape bindings, the checkpoint file format and the
// AdamW optimizer.
//
// Checkpoint layout (all integers little-endian):
//   "TRIPCKPT"            8 bytes
//   version               u32 (currently 1)
//   count                 u32
//   count records of:
//     name_length         u32
//     name                name_length bytes
//     rank                u32
//     dims                rank x u64
//     values              prod(dims) x f64, row-major

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tripcon/autodiff.hpp"
#include "tripcon/rng.hpp"
#include "tripcon/tensor.hpp"

namespace tripcon {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Insertion-ordered name -> tensor map.
class ParameterSet {
 public:
  Tensor& add(const std::string& name, Tensor value);
  bool has(const std::string& name) const;
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;

  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::vector<std::pair<std::string, Tensor>>& entries() { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

  // Names and shapes agree.
  bool same_signature(const ParameterSet& other) const;

  std::string to_bytes() const;
  static ParameterSet from_bytes(const std::string& bytes);
  void save(const std::filesystem::path& path) const;
  static ParameterSet load(const std::filesystem::path& path);

  // Copies values from `other`; throws CheckpointError unless the
  // signatures agree.
  void assign(const ParameterSet& other);

  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

// Parameters placed on a tape: trainable ones as gradient-tracked leaves,
// the rest as constants.
class Bindings {
 public:
  Bindings(Tape& tape, const ParameterSet& params, bool trainable = true);
  Bindings(Tape& tape, const ParameterSet& params, const std::vector<std::string>& frozen);
  // Binds vars[i] under the i-th name of `params`; used by gradient checks.
  Bindings(const ParameterSet& params, std::span<const Var> vars);

  Var operator[](const std::string& name) const;
  Tape& tape() const { return *tape_; }
  const std::map<std::string, Var>& vars() const { return vars_; }

  // Gradients of every tracked parameter that received one.
  std::map<std::string, Tensor> gradients(const Gradients& grads) const;

 private:
  Tape* tape_;
  std::map<std::string, Var> vars_;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Tensor uniform_fan_in(Shape shape, std::size_t fan_in, Rng& rng);

struct AdamWConfig {
  double learning_rate = 2e-4;
  double final_learning_rate = 2e-5;  // cosine decay target
  double weight_decay = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Cosine decay from learning_rate to final_learning_rate over `total` steps.
double cosine_learning_rate(const AdamWConfig& config, std::size_t step, std::size_t total);

class AdamW {
 public:
  explicit AdamW(AdamWConfig config) : config_(config) {}

  // One update at the given learning rate; parameters without a gradient
  // are left untouched (no decay either).
  void step(ParameterSet& params, const std::map<std::string, Tensor>& grads, double learning_rate);
  std::size_t steps() const { return t_; }

 private:
  AdamWConfig config_;
  std::size_t t_ = 0;
  std::map<std::string, Tensor> m_;
  std::map<std::string, Tensor> v_;
};

}  // namespace tripcon

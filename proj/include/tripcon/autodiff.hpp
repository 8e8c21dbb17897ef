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

// Reverse-mode automatic differentiation over a linear tape.
//
// A Tape owns every value produced during one forward pass. Nodes are
// appended in execution order, so the tape is topologically sorted by
// construction and backward() is a single reverse sweep.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "tripcon/rng.hpp"
#include "tripcon/tensor.hpp"

namespace tripcon {

enum class Primitive : int {
  kAdd = 0,
  kSubtract,
  kMultiply,
  kScale,
  kMatmul,
  kTranspose,
  kExp,
  kLog,
  kSigmoid,
  kRelu,
  kRowSoftmax,
  kRowL2Normalize,
  kRowLayerNorm,
  kConcat,
  kSlice,
  kMaskedMeanPool1d,
  kLinearUpsample1d,
  kScaledDotAttention,
  kDropout,
  kMeanReduce,
  kSumReduce,
  kClamp,
  kCount,
};

std::string_view primitive_name(Primitive kind);

struct PrimitiveAttrs {
  double factor = 1.0;                // scale
  double lower = 0.0;                 // clamp
  double upper = 0.0;                 // clamp
  std::size_t axis = 0;               // concat, slice
  std::size_t begin = 0;              // slice
  std::size_t end = 0;                // slice
  std::size_t stride = 1;             // masked mean pool
  std::size_t length = 0;             // upsample target length
  std::size_t heads = 1;              // attention
  std::optional<Tensor> mask;         // pool validity, [B, T] of 0/1
  double rate = 0.0;                  // dropout
  Rng* rng = nullptr;                 // dropout
  bool train = false;                 // dropout
};

class Tape;

// Handle to one node of a tape.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Gradients {
 public:
  bool has(Var v) const;
  const Tensor& operator[](Var v) const;

 private:
  friend class Tape;
  std::vector<std::optional<Tensor>> grads_;
};

class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  // Evaluates `kind` on the inputs and records it. Throws ShapeError on
  // invalid shapes, DomainError on non-finite results or invalid domains,
  // Error("unknown_primitive") for ids outside the catalog.
  Var apply(Primitive kind, std::span<const Var> inputs, const PrimitiveAttrs& attrs = {});
  Var apply(Primitive kind, std::initializer_list<Var> inputs, const PrimitiveAttrs& attrs = {}) {
    return apply(kind, std::span<const Var>(inputs.begin(), inputs.size()), attrs);
  }

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape backwards once.
  Gradients backward(Var loss) const;

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id()).requires_grad; }
  std::size_t size() const { return nodes_.size(); }
  bool grad_enabled() const { return grad_enabled_; }

 private:
  struct Node {
    Primitive kind = Primitive::kCount;
    bool is_leaf = true;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    Tensor value;
    std::vector<Tensor> saved;
    PrimitiveAttrs attrs;
  };

  void backward_node(const Node& node, const Tensor& grad,
                     std::vector<std::optional<Tensor>>& grads) const;

  bool grad_enabled_;
  std::vector<Node> nodes_;
};

namespace ops {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var matmul(Var a, Var b);
Var transpose(Var a);
Var exp(Var a);
Var log(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var clamp(Var a, double lower, double upper);
Var softmax_rows(Var a);
Var l2_normalize_rows(Var a);
Var layer_norm_rows(Var a);
Var concat(std::span<const Var> parts, std::size_t axis);
Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end);
Var masked_mean_pool(Var a, const Tensor& mask, std::size_t stride);
Var upsample_linear(Var a, std::size_t length);
Var attention(Var q, Var k, Var v, std::size_t heads);
Var dropout(Var a, double rate, Rng* rng, bool train);
Var mean(Var a);
Var sum(Var a);

// Constant on the same tape as `like`.
Var constant_like(Var like, Tensor value);

}  // namespace ops

// Pooled length for stride k: the final window may be shorter than k.
std::size_t pooled_length(std::size_t length, std::size_t stride);

struct GradientCheckReport {
  struct Entry {
    double max_abs_error = 0.0;
    double max_rel_error = 0.0;
  };
  std::vector<Entry> inputs;
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;
  bool passed = false;
};

using ScalarFunction = std::function<Var(Tape&, std::span<const Var>)>;

// Relative error per coordinate is |a - n| / max(|a|, |n|, floor) with
// floor = 1e-6, comparing analytic gradients with central differences
// (f(x + h) - f(x - h)) / 2h.
GradientCheckReport check_gradients(const ScalarFunction& f, const std::vector<Tensor>& points,
                                    double step = 1e-5, double tolerance = 1e-4);

}  // namespace tripcon

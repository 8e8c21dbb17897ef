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

#include "tripcon/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tripcon/errors.hpp"
#include "tripcon/kernels.hpp"

namespace tripcon {

namespace {

constexpr double kLayerNormEps = 1e-5;

std::string_view kNames[] = {
    "add",    "subtract",      "multiply",        "scale",          "matmul",
    "transpose", "exp",        "log",             "sigmoid",        "relu",
    "row-softmax", "row-l2-normalize", "row-layer-norm", "concat", "slice",
    "masked-mean-pool-1d", "linear-interp-upsample-1d", "scaled-dot-attention", "dropout",
    "mean-reduce", "sum-reduce", "clamp",
};
static_assert(std::size(kNames) == static_cast<std::size_t>(Primitive::kCount));

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

// Output shape of a broadcasting binary op. The smaller operand must either
// match the trailing dimensions of the larger one or hold a single value.
Shape broadcast_shape(const Tensor& a, const Tensor& b, Primitive kind) {
  if (a.shape() == b.shape()) return a.shape();
  const Tensor& big = a.size() >= b.size() ? a : b;
  const Tensor& small = a.size() >= b.size() ? b : a;
  if (small.size() == 1 || (small.size() > 0 && is_suffix(small.shape(), big.shape()))) {
    return big.shape();
  }
  throw ShapeError(std::string(primitive_name(kind)) + ": cannot broadcast " +
                   shape_string(a.shape()) + " with " + shape_string(b.shape()));
}

void add_into(std::optional<Tensor>& slot, const Tensor& g) {
  if (!slot) {
    slot = g;
    return;
  }
  auto dst = slot->data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// Reduces a full-size gradient onto an operand of size n (modulo broadcast).
Tensor reduce_to(const Tensor& g, const Shape& shape) {
  Tensor out(shape);
  const std::size_t n = out.size();
  auto dst = out.data();
  auto src = g.data();
  if (n == src.size()) {
    std::copy(src.begin(), src.end(), dst.begin());
  } else {
    for (std::size_t i = 0; i < src.size(); ++i) dst[i % n] += src[i];
  }
  return out;
}

struct SeqDims {
  std::size_t batch, length, channels;
};

SeqDims seq_dims(const Tensor& t, Primitive kind) {
  if (t.rank() == 3) return {t.dim(0), t.dim(1), t.dim(2)};
  if (t.rank() == 2) return {1, t.dim(0), t.dim(1)};
  throw ShapeError(std::string(primitive_name(kind)) + " expects [B,T,C] or [T,C], got " +
                   shape_string(t.shape()));
}

Shape seq_shape(const Tensor& like, std::size_t length) {
  Shape s = like.shape();
  s[s.size() - 2] = length;
  return s;
}

// Frames averaged by each pooled window, after the empty-window rule: a
// window without valid frames reuses its nearest non-empty left neighbor,
// else its nearest non-empty right neighbor, else it stays empty (zeros).
std::vector<std::vector<std::size_t>> pool_plan(const std::optional<Tensor>& mask, SeqDims d,
                                                std::size_t stride) {
  const std::size_t windows = pooled_length(d.length, stride);
  std::vector<std::vector<std::size_t>> own(d.batch * windows);
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t j = 0; j < windows; ++j) {
      const std::size_t lo = j * stride, hi = std::min(d.length, lo + stride);
      for (std::size_t t = lo; t < hi; ++t) {
        const bool valid = !mask || (*mask)[b * d.length + t] != 0.0;
        if (valid) own[b * windows + j].push_back(t);
      }
    }
  }
  std::vector<std::vector<std::size_t>> plan(own.size());
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t j = 0; j < windows; ++j) {
      std::size_t src = j;
      bool found = !own[b * windows + j].empty();
      for (std::size_t l = j; !found && l-- > 0;) {
        if (!own[b * windows + l].empty()) src = l, found = true;
      }
      for (std::size_t r = j + 1; !found && r < windows; ++r) {
        if (!own[b * windows + r].empty()) src = r, found = true;
      }
      if (found) plan[b * windows + j] = own[b * windows + src];
    }
  }
  return plan;
}

struct InterpPoint {
  std::size_t lo, hi;
  double frac;
};

// Endpoint-aligned: output frame 0 reads pooled position 0 and the last
// output frame reads the last pooled position.
InterpPoint interp_point(std::size_t t, std::size_t in_len, std::size_t out_len) {
  if (in_len == 1 || out_len == 1) return {0, 0, 0.0};
  const double s = static_cast<double>(t) * static_cast<double>(in_len - 1) /
                   static_cast<double>(out_len - 1);
  std::size_t lo = static_cast<std::size_t>(std::floor(s));
  if (lo >= in_len - 1) return {in_len - 1, in_len - 1, 0.0};
  return {lo, lo + 1, s - static_cast<double>(lo)};
}

void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, const Tensor& a,
          const Tensor& b, Tensor& c, bool accumulate) {
  kernels::GemmArgs args{ta, tb, m, n, k, accumulate};
  kernels::gemm(args, a.data(), b.data(), c.data());
}

}  // namespace

std::string_view primitive_name(Primitive kind) {
  const auto i = static_cast<std::size_t>(kind);
  if (i >= std::size(kNames)) return "unknown";
  return kNames[i];
}

std::size_t pooled_length(std::size_t length, std::size_t stride) {
  if (stride == 0) throw ShapeError("pool stride must be positive");
  return (length + stride - 1) / stride;
}

const Tensor& Var::value() const {
  if (!tape_) throw Error("invalid_var", "Var is not attached to a tape");
  return tape_->value(id_);
}

bool Gradients::has(Var v) const { return v.id() < grads_.size() && grads_[v.id()].has_value(); }

const Tensor& Gradients::operator[](Var v) const {
  if (!has(v)) throw Error("no_gradient", "no gradient recorded for node " + std::to_string(v.id()));
  return *grads_[v.id()];
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  if (!value.all_finite()) throw DomainError("leaf tensor contains non-finite values");
  Node node;
  node.is_leaf = true;
  node.requires_grad = requires_grad && grad_enabled_;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::apply(Primitive kind, std::span<const Var> inputs, const PrimitiveAttrs& attrs) {
  for (const Var& v : inputs) {
    if (v.tape() != this) throw Error("foreign_var", "input belongs to a different tape");
  }
  auto in = [&](std::size_t i) -> const Tensor& { return nodes_[inputs[i].id()].value; };
  auto need = [&](std::size_t n) {
    if (inputs.size() != n) {
      throw ShapeError(std::string(primitive_name(kind)) + " expects " + std::to_string(n) +
                       " inputs, got " + std::to_string(inputs.size()));
    }
  };

  Node node;
  node.kind = kind;
  node.is_leaf = false;
  node.attrs = attrs;
  node.attrs.rng = nullptr;
  for (const Var& v : inputs) {
    node.inputs.push_back(v.id());
    node.requires_grad = node.requires_grad || nodes_[v.id()].requires_grad;
  }
  Tensor out;

  switch (kind) {
    case Primitive::kAdd:
    case Primitive::kSubtract:
    case Primitive::kMultiply: {
      need(2);
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      out = Tensor(broadcast_shape(a, b, kind));
      const std::size_t na = a.size(), nb = b.size();
      auto o = out.data();
      for (std::size_t i = 0; i < o.size(); ++i) {
        const double x = a[i % na], y = b[i % nb];
        o[i] = kind == Primitive::kAdd ? x + y : kind == Primitive::kSubtract ? x - y : x * y;
      }
      break;
    }
    case Primitive::kScale: {
      need(1);
      out = in(0);
      for (double& v : out.data()) v *= attrs.factor;
      break;
    }
    case Primitive::kMatmul: {
      need(2);
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      if (a.rank() < 2 || b.rank() != 2 || a.cols() != b.dim(0)) {
        throw ShapeError("matmul: cannot multiply " + shape_string(a.shape()) + " by " +
                         shape_string(b.shape()));
      }
      Shape s = a.shape();
      s.back() = b.dim(1);
      out = Tensor(s);
      gemm(false, false, a.rows(), b.dim(1), a.cols(), a, b, out, false);
      break;
    }
    case Primitive::kTranspose: {
      need(1);
      const Tensor& a = in(0);
      if (a.rank() != 2) throw ShapeError("transpose expects a matrix, got " + shape_string(a.shape()));
      out = Tensor(Shape{a.dim(1), a.dim(0)});
      for (std::size_t r = 0; r < a.dim(0); ++r)
        for (std::size_t c = 0; c < a.dim(1); ++c) out.at(c, r) = a.at(r, c);
      break;
    }
    case Primitive::kExp:
    case Primitive::kLog:
    case Primitive::kSigmoid:
    case Primitive::kRelu:
    case Primitive::kClamp: {
      need(1);
      out = in(0);
      for (double& v : out.data()) {
        switch (kind) {
          case Primitive::kExp: v = std::exp(v); break;
          case Primitive::kLog:
            if (!(v > 0.0)) throw DomainError("log of non-positive value " + std::to_string(v));
            v = std::log(v);
            break;
          case Primitive::kSigmoid:
            v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
            break;
          case Primitive::kRelu: v = v > 0.0 ? v : 0.0; break;
          default: v = std::clamp(v, attrs.lower, attrs.upper); break;
        }
      }
      break;
    }
    case Primitive::kRowSoftmax: {
      need(1);
      out = in(0);
      if (out.rank() == 0) throw ShapeError("row-softmax needs at least one axis");
      for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row(r);
        const double mx = *std::max_element(row.begin(), row.end());
        double s = 0.0;
        for (double& v : row) s += (v = std::exp(v - mx));
        for (double& v : row) v /= s;
      }
      break;
    }
    case Primitive::kRowL2Normalize: {
      need(1);
      out = in(0);
      if (out.rank() == 0) throw ShapeError("row-l2-normalize needs at least one axis");
      for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row(r);
        double s = 0.0;
        for (double v : row) s += v * v;
        const double n = std::sqrt(s);
        if (!(n > 0.0)) throw DomainError("row-l2-normalize of a zero-norm row " + std::to_string(r));
        for (double& v : row) v /= n;
      }
      break;
    }
    case Primitive::kRowLayerNorm: {
      need(1);
      out = in(0);
      if (out.rank() == 0) throw ShapeError("row-layer-norm needs at least one axis");
      Tensor inv_std(Shape{out.rows()});
      const double n = static_cast<double>(out.cols());
      for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row(r);
        double mu = 0.0;
        for (double v : row) mu += v;
        mu /= n;
        double var = 0.0;
        for (double v : row) var += (v - mu) * (v - mu);
        var /= n;
        const double is = 1.0 / std::sqrt(var + kLayerNormEps);
        for (double& v : row) v = (v - mu) * is;
        inv_std[r] = is;
      }
      node.saved.push_back(std::move(inv_std));
      break;
    }
    case Primitive::kConcat: {
      if (inputs.empty()) throw ShapeError("concat needs at least one input");
      const Tensor& first = in(0);
      const std::size_t axis = attrs.axis;
      if (axis >= first.rank()) throw ShapeError("concat axis out of range");
      Shape s = first.shape();
      s[axis] = 0;
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        const Tensor& t = in(i);
        if (t.rank() != first.rank()) throw ShapeError("concat rank mismatch");
        for (std::size_t d = 0; d < t.rank(); ++d) {
          if (d != axis && t.dim(d) != first.dim(d)) {
            throw ShapeError("concat: " + shape_string(t.shape()) + " vs " + shape_string(first.shape()));
          }
        }
        s[axis] += t.dim(axis);
      }
      out = Tensor(s);
      std::size_t outer = 1, inner = 1;
      for (std::size_t d = 0; d < axis; ++d) outer *= s[d];
      for (std::size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];
      const std::size_t out_chunk = s[axis] * inner;
      std::size_t offset = 0;
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        const Tensor& t = in(i);
        const std::size_t chunk = t.dim(axis) * inner;
        for (std::size_t o = 0; o < outer; ++o) {
          std::copy_n(t.data().begin() + o * chunk, chunk, out.data().begin() + o * out_chunk + offset);
        }
        offset += chunk;
      }
      break;
    }
    case Primitive::kSlice: {
      need(1);
      const Tensor& a = in(0);
      const std::size_t axis = attrs.axis;
      if (axis >= a.rank() || attrs.begin >= attrs.end || attrs.end > a.dim(axis)) {
        throw ShapeError("slice [" + std::to_string(attrs.begin) + "," + std::to_string(attrs.end) +
                         ") invalid for " + shape_string(a.shape()));
      }
      Shape s = a.shape();
      s[axis] = attrs.end - attrs.begin;
      out = Tensor(s);
      std::size_t outer = 1, inner = 1;
      for (std::size_t d = 0; d < axis; ++d) outer *= s[d];
      for (std::size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];
      const std::size_t in_chunk = a.dim(axis) * inner, out_chunk = s[axis] * inner;
      for (std::size_t o = 0; o < outer; ++o) {
        std::copy_n(a.data().begin() + o * in_chunk + attrs.begin * inner, out_chunk,
                    out.data().begin() + o * out_chunk);
      }
      break;
    }
    case Primitive::kMaskedMeanPool1d: {
      need(1);
      const Tensor& a = in(0);
      const SeqDims d = seq_dims(a, kind);
      if (attrs.stride == 0 || d.length < attrs.stride) {
        throw ShapeError("masked-mean-pool-1d: length " + std::to_string(d.length) +
                         " shorter than stride " + std::to_string(attrs.stride));
      }
      if (attrs.mask && attrs.mask->size() != d.batch * d.length) {
        throw ShapeError("masked-mean-pool-1d: mask " + shape_string(attrs.mask->shape()) +
                         " does not match input " + shape_string(a.shape()));
      }
      const std::size_t windows = pooled_length(d.length, attrs.stride);
      out = Tensor(seq_shape(a, windows));
      const auto plan = pool_plan(attrs.mask, d, attrs.stride);
      for (std::size_t b = 0; b < d.batch; ++b) {
        for (std::size_t j = 0; j < windows; ++j) {
          const auto& frames = plan[b * windows + j];
          double* dst = out.data().data() + (b * windows + j) * d.channels;
          // Running mean: exact on constant inputs.
          std::size_t count = 0;
          for (std::size_t t : frames) {
            ++count;
            const double* src = a.data().data() + (b * d.length + t) * d.channels;
            for (std::size_t c = 0; c < d.channels; ++c) {
              dst[c] = count == 1 ? src[c] : dst[c] + (src[c] - dst[c]) / static_cast<double>(count);
            }
          }
        }
      }
      break;
    }
    case Primitive::kLinearUpsample1d: {
      need(1);
      const Tensor& a = in(0);
      const SeqDims d = seq_dims(a, kind);
      if (attrs.length == 0 || d.length == 0) throw ShapeError("upsample to or from an empty sequence");
      out = Tensor(seq_shape(a, attrs.length));
      for (std::size_t b = 0; b < d.batch; ++b) {
        for (std::size_t t = 0; t < attrs.length; ++t) {
          const InterpPoint p = interp_point(t, d.length, attrs.length);
          const double* lo = a.data().data() + (b * d.length + p.lo) * d.channels;
          const double* hi = a.data().data() + (b * d.length + p.hi) * d.channels;
          double* dst = out.data().data() + (b * attrs.length + t) * d.channels;
          // lo + frac * (hi - lo) is exact whenever lo == hi.
          for (std::size_t c = 0; c < d.channels; ++c) dst[c] = lo[c] + p.frac * (hi[c] - lo[c]);
        }
      }
      break;
    }
    case Primitive::kScaledDotAttention: {
      need(3);
      const Tensor& q = in(0);
      const Tensor& k = in(1);
      const Tensor& v = in(2);
      const SeqDims dq = seq_dims(q, kind), dk = seq_dims(k, kind), dv = seq_dims(v, kind);
      if (dq.batch != dk.batch || dk.batch != dv.batch || dq.channels != dk.channels ||
          dk.length != dv.length || dv.channels != dq.channels || attrs.heads == 0 ||
          dq.channels % attrs.heads != 0) {
        throw ShapeError("scaled-dot-attention: incompatible q/k/v " + shape_string(q.shape()) + " " +
                         shape_string(k.shape()) + " " + shape_string(v.shape()) + " heads " +
                         std::to_string(attrs.heads));
      }
      const std::size_t h = attrs.heads, dh = dq.channels / h, lq = dq.length, lk = dk.length;
      const double s = 1.0 / std::sqrt(static_cast<double>(dh));
      out = Tensor(q.shape());
      Tensor probs(Shape{dq.batch, h, lq, lk});
      for (std::size_t b = 0; b < dq.batch; ++b) {
        for (std::size_t hh = 0; hh < h; ++hh) {
          for (std::size_t i = 0; i < lq; ++i) {
            double* p = probs.data().data() + ((b * h + hh) * lq + i) * lk;
            const double* qi = q.data().data() + (b * lq + i) * dq.channels + hh * dh;
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < lk; ++j) {
              const double* kj = k.data().data() + (b * lk + j) * dk.channels + hh * dh;
              double dot = 0.0;
              for (std::size_t c = 0; c < dh; ++c) dot += qi[c] * kj[c];
              p[j] = dot * s;
              mx = std::max(mx, p[j]);
            }
            double z = 0.0;
            for (std::size_t j = 0; j < lk; ++j) z += (p[j] = std::exp(p[j] - mx));
            for (std::size_t j = 0; j < lk; ++j) p[j] /= z;
            double* o = out.data().data() + (b * lq + i) * dq.channels + hh * dh;
            for (std::size_t j = 0; j < lk; ++j) {
              const double* vj = v.data().data() + (b * lk + j) * dv.channels + hh * dh;
              for (std::size_t c = 0; c < dh; ++c) o[c] += p[j] * vj[c];
            }
          }
        }
      }
      node.saved.push_back(std::move(probs));
      break;
    }
    case Primitive::kDropout: {
      need(1);
      out = in(0);
      if (attrs.train && attrs.rate > 0.0) {
        if (attrs.rate >= 1.0) throw DomainError("dropout rate must be below 1");
        if (!attrs.rng) throw Error("missing_rng", "dropout in train mode needs a generator");
        Tensor keep(out.shape());
        const double scale = 1.0 / (1.0 - attrs.rate);
        for (std::size_t i = 0; i < out.size(); ++i) {
          keep[i] = attrs.rng->uniform() >= attrs.rate ? scale : 0.0;
          out[i] *= keep[i];
        }
        node.saved.push_back(std::move(keep));
      }
      break;
    }
    case Primitive::kMeanReduce:
    case Primitive::kSumReduce: {
      need(1);
      const Tensor& a = in(0);
      if (a.size() == 0) throw ShapeError("reduction of an empty tensor");
      double s = 0.0;
      for (double v : a.data()) s += v;
      if (kind == Primitive::kMeanReduce) s /= static_cast<double>(a.size());
      out = Tensor::scalar(s);
      break;
    }
    default:
      throw Error("unknown_primitive", "unknown primitive id " + std::to_string(static_cast<int>(kind)));
  }

  if (!out.all_finite()) {
    throw DomainError(std::string(primitive_name(kind)) + " produced a non-finite value");
  }
  node.value = std::move(out);
  if (!node.requires_grad) node.saved.clear();
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Gradients Tape::backward(Var loss) const {
  if (loss.tape() != this) throw Error("not_on_tape", "loss is not recorded on this tape");
  const Node& root = nodes_.at(loss.id());
  if (root.value.size() != 1) {
    throw ShapeError("backward needs a scalar loss, got " + shape_string(root.value.shape()));
  }
  Gradients result;
  auto& grads = result.grads_;
  grads.resize(nodes_.size());
  if (!root.requires_grad) return result;
  grads[loss.id()] = Tensor(root.value.shape(), 1.0);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (!grads[i] || node.is_leaf || !node.requires_grad) continue;
    backward_node(node, *grads[i], grads);
    grads[i].reset();
  }
  return result;
}

void Tape::backward_node(const Node& node, const Tensor& g,
                         std::vector<std::optional<Tensor>>& grads) const {
  auto in = [&](std::size_t i) -> const Tensor& { return nodes_[node.inputs[i]].value; };
  auto wants = [&](std::size_t i) { return nodes_[node.inputs[i]].requires_grad; };
  auto slot = [&](std::size_t i) -> std::optional<Tensor>& { return grads[node.inputs[i]]; };
  const Tensor& y = node.value;
  const PrimitiveAttrs& attrs = node.attrs;

  switch (node.kind) {
    case Primitive::kAdd:
    case Primitive::kSubtract: {
      if (wants(0)) add_into(slot(0), reduce_to(g, in(0).shape()));
      if (wants(1)) {
        Tensor gb = reduce_to(g, in(1).shape());
        if (node.kind == Primitive::kSubtract) {
          for (double& v : gb.data()) v = -v;
        }
        add_into(slot(1), gb);
      }
      break;
    }
    case Primitive::kMultiply: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      const std::size_t na = a.size(), nb = b.size();
      if (wants(0)) {
        Tensor full(g.shape());
        for (std::size_t i = 0; i < g.size(); ++i) full[i] = g[i] * b[i % nb];
        add_into(slot(0), reduce_to(full, a.shape()));
      }
      if (wants(1)) {
        Tensor full(g.shape());
        for (std::size_t i = 0; i < g.size(); ++i) full[i] = g[i] * a[i % na];
        add_into(slot(1), reduce_to(full, b.shape()));
      }
      break;
    }
    case Primitive::kScale: {
      Tensor ga = g;
      for (double& v : ga.data()) v *= attrs.factor;
      add_into(slot(0), ga);
      break;
    }
    case Primitive::kMatmul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      const std::size_t m = a.rows(), k = a.cols(), n = b.dim(1);
      if (wants(0)) {
        Tensor ga(a.shape());
        gemm(false, true, m, k, n, g, b, ga, false);
        add_into(slot(0), ga);
      }
      if (wants(1)) {
        Tensor gb(b.shape());
        gemm(true, false, k, n, m, a, g, gb, false);
        add_into(slot(1), gb);
      }
      break;
    }
    case Primitive::kTranspose: {
      Tensor ga(Shape{g.dim(1), g.dim(0)});
      for (std::size_t r = 0; r < g.dim(0); ++r)
        for (std::size_t c = 0; c < g.dim(1); ++c) ga.at(c, r) = g.at(r, c);
      add_into(slot(0), ga);
      break;
    }
    case Primitive::kExp:
    case Primitive::kLog:
    case Primitive::kSigmoid:
    case Primitive::kRelu:
    case Primitive::kClamp: {
      const Tensor& x = in(0);
      Tensor ga(x.shape());
      for (std::size_t i = 0; i < x.size(); ++i) {
        double d = 0.0;
        switch (node.kind) {
          case Primitive::kExp: d = y[i]; break;
          case Primitive::kLog: d = 1.0 / x[i]; break;
          case Primitive::kSigmoid: d = y[i] * (1.0 - y[i]); break;
          case Primitive::kRelu: d = x[i] > 0.0 ? 1.0 : 0.0; break;
          default: d = (x[i] >= attrs.lower && x[i] <= attrs.upper) ? 1.0 : 0.0; break;
        }
        ga[i] = g[i] * d;
      }
      add_into(slot(0), ga);
      break;
    }
    case Primitive::kRowSoftmax: {
      Tensor ga(y.shape());
      for (std::size_t r = 0; r < y.rows(); ++r) {
        auto yr = y.row(r);
        auto gr = g.row(r);
        double dot = 0.0;
        for (std::size_t c = 0; c < yr.size(); ++c) dot += gr[c] * yr[c];
        auto out = ga.row(r);
        for (std::size_t c = 0; c < yr.size(); ++c) out[c] = yr[c] * (gr[c] - dot);
      }
      add_into(slot(0), ga);
      break;
    }
    case Primitive::kRowL2Normalize: {
      const Tensor& x = in(0);
      Tensor ga(y.shape());
      for (std::size_t r = 0; r < y.rows(); ++r) {
        auto xr = x.row(r);
        auto yr = y.row(r);
        auto gr = g.row(r);
        double norm = 0.0, dot = 0.0;
        for (std::size_t c = 0; c < xr.size(); ++c) {
          norm += xr[c] * xr[c];
          dot += gr[c] * yr[c];
        }
        norm = std::sqrt(norm);
        auto out = ga.row(r);
        for (std::size_t c = 0; c < xr.size(); ++c) out[c] = (gr[c] - yr[c] * dot) / norm;
      }
      add_into(slot(0), ga);
      break;
    }
    case Primitive::kRowLayerNorm: {
      const Tensor& inv_std = node.saved.at(0);
      Tensor ga(y.shape());
      const double n = static_cast<double>(y.cols());
      for (std::size_t r = 0; r < y.rows(); ++r) {
        auto yr = y.row(r);
        auto gr = g.row(r);
        double mg = 0.0, mgy = 0.0;
        for (std::size_t c = 0; c < yr.size(); ++c) {
          mg += gr[c];
          mgy += gr[c] * yr[c];
        }
        mg /= n;
        mgy /= n;
        auto out = ga.row(r);
        for (std::size_t c = 0; c < yr.size(); ++c) out[c] = inv_std[r] * (gr[c] - mg - yr[c] * mgy);
      }
      add_into(slot(0), ga);
      break;
    }
    case Primitive::kConcat: {
      const Shape& s = y.shape();
      const std::size_t axis = attrs.axis;
      std::size_t outer = 1, inner = 1;
      for (std::size_t d = 0; d < axis; ++d) outer *= s[d];
      for (std::size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];
      const std::size_t out_chunk = s[axis] * inner;
      std::size_t offset = 0;
      for (std::size_t i = 0; i < node.inputs.size(); ++i) {
        const Tensor& t = in(i);
        const std::size_t chunk = t.dim(axis) * inner;
        if (wants(i)) {
          Tensor gi(t.shape());
          for (std::size_t o = 0; o < outer; ++o) {
            std::copy_n(g.data().begin() + o * out_chunk + offset, chunk, gi.data().begin() + o * chunk);
          }
          add_into(slot(i), gi);
        }
        offset += chunk;
      }
      break;
    }
    case Primitive::kSlice: {
      const Tensor& a = in(0);
      const std::size_t axis = attrs.axis;
      std::size_t outer = 1, inner = 1;
      for (std::size_t d = 0; d < axis; ++d) outer *= a.dim(d);
      for (std::size_t d = axis + 1; d < a.rank(); ++d) inner *= a.dim(d);
      const std::size_t in_chunk = a.dim(axis) * inner, out_chunk = y.dim(axis) * inner;
      Tensor ga(a.shape());
      for (std::size_t o = 0; o < outer; ++o) {
        std::copy_n(g.data().begin() + o * out_chunk, out_chunk,
                    ga.data().begin() + o * in_chunk + attrs.begin * inner);
      }
      add_into(slot(0), ga);
      break;
    }
    case Primitive::kMaskedMeanPool1d: {
      const Tensor& a = in(0);
      const SeqDims d = seq_dims(a, node.kind);
      const std::size_t windows = pooled_length(d.length, attrs.stride);
      const auto plan = pool_plan(attrs.mask, d, attrs.stride);
      Tensor ga(a.shape());
      for (std::size_t b = 0; b < d.batch; ++b) {
        for (std::size_t j = 0; j < windows; ++j) {
          const auto& frames = plan[b * windows + j];
          if (frames.empty()) continue;
          const double w = 1.0 / static_cast<double>(frames.size());
          const double* src = g.data().data() + (b * windows + j) * d.channels;
          for (std::size_t t : frames) {
            double* dst = ga.data().data() + (b * d.length + t) * d.channels;
            for (std::size_t c = 0; c < d.channels; ++c) dst[c] += w * src[c];
          }
        }
      }
      add_into(slot(0), ga);
      break;
    }
    case Primitive::kLinearUpsample1d: {
      const Tensor& a = in(0);
      const SeqDims d = seq_dims(a, node.kind);
      Tensor ga(a.shape());
      for (std::size_t b = 0; b < d.batch; ++b) {
        for (std::size_t t = 0; t < attrs.length; ++t) {
          const InterpPoint p = interp_point(t, d.length, attrs.length);
          const double* src = g.data().data() + (b * attrs.length + t) * d.channels;
          double* lo = ga.data().data() + (b * d.length + p.lo) * d.channels;
          double* hi = ga.data().data() + (b * d.length + p.hi) * d.channels;
          for (std::size_t c = 0; c < d.channels; ++c) {
            lo[c] += (1.0 - p.frac) * src[c];
            hi[c] += p.frac * src[c];
          }
        }
      }
      add_into(slot(0), ga);
      break;
    }
    case Primitive::kScaledDotAttention: {
      const Tensor& q = in(0);
      const Tensor& k = in(1);
      const Tensor& v = in(2);
      const Tensor& probs = node.saved.at(0);
      const SeqDims dq = seq_dims(q, node.kind), dk = seq_dims(k, node.kind);
      const std::size_t h = attrs.heads, dh = dq.channels / h, lq = dq.length, lk = dk.length;
      const std::size_t ch = dq.channels;
      const double s = 1.0 / std::sqrt(static_cast<double>(dh));
      Tensor gq(q.shape()), gk(k.shape()), gv(v.shape());
      std::vector<double> dp(lk);
      for (std::size_t b = 0; b < dq.batch; ++b) {
        for (std::size_t hh = 0; hh < h; ++hh) {
          for (std::size_t i = 0; i < lq; ++i) {
            const double* p = probs.data().data() + ((b * h + hh) * lq + i) * lk;
            const double* go = g.data().data() + (b * lq + i) * ch + hh * dh;
            double row_dot = 0.0;
            for (std::size_t j = 0; j < lk; ++j) {
              const double* vj = v.data().data() + (b * lk + j) * ch + hh * dh;
              double* gvj = gv.data().data() + (b * lk + j) * ch + hh * dh;
              double acc = 0.0;
              for (std::size_t c = 0; c < dh; ++c) {
                acc += go[c] * vj[c];
                gvj[c] += p[j] * go[c];
              }
              dp[j] = acc;
              row_dot += acc * p[j];
            }
            const double* qi = q.data().data() + (b * lq + i) * ch + hh * dh;
            double* gqi = gq.data().data() + (b * lq + i) * ch + hh * dh;
            for (std::size_t j = 0; j < lk; ++j) {
              const double ds = p[j] * (dp[j] - row_dot) * s;
              const double* kj = k.data().data() + (b * lk + j) * ch + hh * dh;
              double* gkj = gk.data().data() + (b * lk + j) * ch + hh * dh;
              for (std::size_t c = 0; c < dh; ++c) {
                gqi[c] += ds * kj[c];
                gkj[c] += ds * qi[c];
              }
            }
          }
        }
      }
      if (wants(0)) add_into(slot(0), gq);
      if (wants(1)) add_into(slot(1), gk);
      if (wants(2)) add_into(slot(2), gv);
      break;
    }
    case Primitive::kDropout: {
      Tensor ga = g;
      if (!node.saved.empty()) {
        const Tensor& keep = node.saved[0];
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= keep[i];
      }
      add_into(slot(0), ga);
      break;
    }
    case Primitive::kMeanReduce:
    case Primitive::kSumReduce: {
      const Tensor& a = in(0);
      double v = g.item();
      if (node.kind == Primitive::kMeanReduce) v /= static_cast<double>(a.size());
      add_into(slot(0), Tensor(a.shape(), v));
      break;
    }
    default:
      throw Error("unknown_primitive", "cannot differentiate unknown primitive");
  }
}

namespace ops {

namespace {
Tape& tape_of(Var v) {
  if (!v.valid()) throw Error("invalid_var", "operation on a detached Var");
  return *v.tape();
}
}  // namespace

Var add(Var a, Var b) { return tape_of(a).apply(Primitive::kAdd, {a, b}); }
Var sub(Var a, Var b) { return tape_of(a).apply(Primitive::kSubtract, {a, b}); }
Var mul(Var a, Var b) { return tape_of(a).apply(Primitive::kMultiply, {a, b}); }

Var scale(Var a, double factor) {
  PrimitiveAttrs attrs;
  attrs.factor = factor;
  return tape_of(a).apply(Primitive::kScale, {a}, attrs);
}

Var matmul(Var a, Var b) { return tape_of(a).apply(Primitive::kMatmul, {a, b}); }
Var transpose(Var a) { return tape_of(a).apply(Primitive::kTranspose, {a}); }
Var exp(Var a) { return tape_of(a).apply(Primitive::kExp, {a}); }
Var log(Var a) { return tape_of(a).apply(Primitive::kLog, {a}); }
Var sigmoid(Var a) { return tape_of(a).apply(Primitive::kSigmoid, {a}); }
Var relu(Var a) { return tape_of(a).apply(Primitive::kRelu, {a}); }

Var clamp(Var a, double lower, double upper) {
  PrimitiveAttrs attrs;
  attrs.lower = lower;
  attrs.upper = upper;
  return tape_of(a).apply(Primitive::kClamp, {a}, attrs);
}

Var softmax_rows(Var a) { return tape_of(a).apply(Primitive::kRowSoftmax, {a}); }
Var l2_normalize_rows(Var a) { return tape_of(a).apply(Primitive::kRowL2Normalize, {a}); }
Var layer_norm_rows(Var a) { return tape_of(a).apply(Primitive::kRowLayerNorm, {a}); }

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat needs at least one input");
  PrimitiveAttrs attrs;
  attrs.axis = axis;
  return tape_of(parts.front()).apply(Primitive::kConcat, parts, attrs);
}

Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end) {
  PrimitiveAttrs attrs;
  attrs.axis = axis;
  attrs.begin = begin;
  attrs.end = end;
  return tape_of(a).apply(Primitive::kSlice, {a}, attrs);
}

Var masked_mean_pool(Var a, const Tensor& mask, std::size_t stride) {
  PrimitiveAttrs attrs;
  attrs.stride = stride;
  attrs.mask = mask;
  return tape_of(a).apply(Primitive::kMaskedMeanPool1d, {a}, attrs);
}

Var upsample_linear(Var a, std::size_t length) {
  PrimitiveAttrs attrs;
  attrs.length = length;
  return tape_of(a).apply(Primitive::kLinearUpsample1d, {a}, attrs);
}

Var attention(Var q, Var k, Var v, std::size_t heads) {
  PrimitiveAttrs attrs;
  attrs.heads = heads;
  return tape_of(q).apply(Primitive::kScaledDotAttention, {q, k, v}, attrs);
}

Var dropout(Var a, double rate, Rng* rng, bool train) {
  PrimitiveAttrs attrs;
  attrs.rate = rate;
  attrs.rng = rng;
  attrs.train = train;
  return tape_of(a).apply(Primitive::kDropout, {a}, attrs);
}

Var mean(Var a) { return tape_of(a).apply(Primitive::kMeanReduce, {a}); }
Var sum(Var a) { return tape_of(a).apply(Primitive::kSumReduce, {a}); }

Var constant_like(Var like, Tensor value) { return tape_of(like).constant(std::move(value)); }

}  // namespace ops

GradientCheckReport check_gradients(const ScalarFunction& f, const std::vector<Tensor>& points,
                                    double step, double tolerance) {
  constexpr double kFloor = 1e-6;
  auto evaluate = [&](const std::vector<Tensor>& at) {
    Tape tape(false);
    std::vector<Var> vars;
    for (const Tensor& t : at) vars.push_back(tape.constant(t));
    return f(tape, vars).value().item();
  };

  Tape tape;
  std::vector<Var> vars;
  for (const Tensor& t : points) vars.push_back(tape.leaf(t, true));
  const Var loss = f(tape, vars);
  const Gradients grads = tape.backward(loss);

  GradientCheckReport report;
  std::vector<Tensor> probe = points;
  for (std::size_t p = 0; p < points.size(); ++p) {
    GradientCheckReport::Entry entry;
    const Tensor analytic = grads.has(vars[p]) ? grads[vars[p]] : Tensor(points[p].shape());
    for (std::size_t i = 0; i < points[p].size(); ++i) {
      const double x = points[p][i];
      probe[p][i] = x + step;
      const double up = evaluate(probe);
      probe[p][i] = x - step;
      const double down = evaluate(probe);
      probe[p][i] = x;
      const double numeric = (up - down) / (2.0 * step);
      const double abs_err = std::abs(analytic[i] - numeric);
      const double rel_err = abs_err / std::max({std::abs(analytic[i]), std::abs(numeric), kFloor});
      entry.max_abs_error = std::max(entry.max_abs_error, abs_err);
      entry.max_rel_error = std::max(entry.max_rel_error, rel_err);
    }
    report.max_abs_error = std::max(report.max_abs_error, entry.max_abs_error);
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.inputs.push_back(entry);
  }
  report.passed = report.max_rel_error <= tolerance;
  return report;
}

}  // namespace tripcon

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

#include "tripcon/losses.hpp"

#include <cmath>
#include <numeric>

#include "tripcon/errors.hpp"

namespace tripcon {

void LossConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (!(alpha_input > 0.0) || !(alpha_feat > 0.0)) throw ConfigError("mixup alphas must be positive");
  if (hard_label_weight < 0.0) throw ConfigError("hard_label_weight must be non-negative");
}

namespace {

Var constant(Var like, Tensor value) { return ops::constant_like(like, std::move(value)); }

void check_tau(double tau) {
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
}

// Per-row dot products of two equally shaped matrices, as an n x 1 column.
Var row_dot(Var a, Var b) {
  return ops::matmul(ops::mul(a, b), constant(a, Tensor({a.value().cols(), 1}, 1.0)));
}

}  // namespace

Var supcon_stage_loss(Var z, std::span<const MultiLabel> labels, const TripletVocabulary& vocab, Stage stage,
                      double tau) {
  check_tau(tau);
  const std::size_t b = z.value().rows();
  if (z.value().rank() != 2 || labels.size() != b) throw ShapeError("supcon: embeddings and labels disagree");

  const auto pools = candidate_pools(labels, vocab, stage);
  Tensor others({b, b}, 1.0);   // A(i)
  Tensor weights({b, b}, 0.0);  // 1/|P(i)| on positives of valid anchors
  Tensor valid({b, 1}, 0.0);
  std::size_t n_valid = 0;
  for (std::size_t i = 0; i < b; ++i) {
    others.at(i, i) = 0.0;
    if (!pools[i].anchor_eligible || pools[i].positives.empty()) continue;
    ++n_valid;
    valid.at(i, 0) = 1.0;
    for (std::size_t p : pools[i].positives) weights.at(i, p) = 1.0 / static_cast<double>(pools[i].positives.size());
  }
  if (n_valid == 0) throw EmptyBatchError("no anchor in the batch has a positive at stage " + stage.name());

  const double inv_tau = 1.0 / tau;
  const Var s = ops::scale(ops::matmul(z, ops::transpose(z)), inv_tau);
  // Shift by the largest possible logit (1/tau) before exponentiating.
  const Var shifted = ops::exp(ops::sub(s, constant(z, Tensor::scalar(inv_tau))));
  const Var denom = ops::matmul(ops::mul(shifted, constant(z, others)), constant(z, Tensor({b, 1}, 1.0)));
  const Var log_denom = ops::add(ops::log(denom), constant(z, Tensor::scalar(inv_tau)));
  const Var total = ops::sub(ops::sum(ops::mul(log_denom, constant(z, valid))),
                             ops::sum(ops::mul(s, constant(z, weights))));
  return ops::scale(total, 1.0 / static_cast<double>(n_valid));
}

Var supcon_mix_loss(Var anchor, Var positive, std::optional<Var> synthetic, double tau) {
  check_tau(tau);
  if (anchor.shape().size() != 2 || anchor.shape()[0] != 1 || positive.shape() != anchor.shape()) {
    throw ShapeError("mix loss: anchor and positive must be 1 x d rows of equal width");
  }
  const std::size_t d = anchor.shape()[1];
  if (!synthetic || synthetic->value().size() == 0) return constant(anchor, Tensor::scalar(0.0));
  if (synthetic->value().cols() != d) throw ShapeError("mix loss: synthetic negatives differ in dimension");

  const Var a = anchor;
  const Var p = positive;
  const Var v = ops::l2_normalize_rows(*synthetic);
  const Var neg_sim = ops::matmul(v, ops::transpose(a));  // S x 1
  const Var pos_sim = ops::matmul(p, ops::transpose(a));  // 1 x 1
  const Var e = ops::exp(ops::scale(ops::sub(neg_sim, pos_sim), 1.0 / tau));
  return ops::log(ops::add(ops::sum(e), constant(anchor, Tensor::scalar(1.0))));
}

Var supcon_mix_loss(Var z, const PairSet& pairs, double tau) {
  check_tau(tau);
  const std::size_t b = z.value().rows();
  if (z.value().rank() != 2 || pairs.anchors.size() != b) throw ShapeError("mix loss: pair set does not match z");

  std::vector<std::size_t> active;
  std::size_t q_total = 0;
  for (std::size_t i = 0; i < b; ++i) {
    if (!pairs.anchors[i].active) continue;
    active.push_back(i);
    q_total += pairs.anchors[i].synthetic.size();
  }
  if (active.empty()) throw EmptyBatchError("no active anchor in the pair set");
  const std::size_t n = active.size();
  if (q_total == 0) return constant(z, Tensor::scalar(0.0));

  // Constant selection matrices turn the gathers into matmuls.
  Tensor pick_pos({n, b}, 0.0);     // row a -> positive of anchor a
  Tensor pick_anchor({q_total, b}, 0.0);  // row q -> anchor owning negative q
  Tensor mix({q_total, b}, 0.0);    // row q -> lambda e_first + (1 - lambda) e_second
  Tensor repeat({q_total, n}, 0.0);  // row q -> owning anchor slot
  Tensor gather({n, q_total}, 0.0);  // transpose of repeat
  std::size_t q = 0;
  for (std::size_t a = 0; a < n; ++a) {
    const AnchorPairs& ap = pairs.anchors[active[a]];
    pick_pos.at(a, ap.positive) = 1.0;
    for (const SyntheticMix& m : ap.synthetic) {
      pick_anchor.at(q, active[a]) = 1.0;
      mix.at(q, m.first) += m.lambda;
      mix.at(q, m.second) += 1.0 - m.lambda;
      repeat.at(q, a) = 1.0;
      gather.at(a, q) = 1.0;
      ++q;
    }
  }
  Tensor pick_active({n, b}, 0.0);
  for (std::size_t a = 0; a < n; ++a) pick_active.at(a, active[a]) = 1.0;

  const Var za = ops::matmul(constant(z, pick_active), z);
  const Var zp = ops::matmul(constant(z, pick_pos), z);
  const Var pos_sim = row_dot(za, zp);  // n x 1
  const Var v = ops::l2_normalize_rows(ops::matmul(constant(z, mix), z));
  const Var neg_sim = row_dot(ops::matmul(constant(z, pick_anchor), z), v);  // Q x 1
  const Var diff = ops::sub(neg_sim, ops::matmul(constant(z, repeat), pos_sim));
  const Var per_anchor = ops::matmul(constant(z, gather), ops::exp(ops::scale(diff, 1.0 / tau)));
  const Var losses = ops::log(ops::add(per_anchor, constant(z, Tensor::scalar(1.0))));
  return ops::mean(losses);
}

Var bce_multilabel(Var pred, const Tensor& target, const std::optional<Tensor>& row_weights) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("bce: prediction " + shape_string(pred.shape()) + " vs target " + shape_string(target.shape()));
  }
  const std::size_t rows = target.rows();
  const std::size_t classes = target.cols();
  for (double y : target.data()) {
    if (!(y >= 0.0 && y <= 1.0)) throw DomainError("bce targets must lie in [0, 1]");
  }
  Tensor coef(target.shape(), 1.0 / static_cast<double>(rows * classes));
  if (row_weights) {
    if (row_weights->size() != rows) throw ShapeError("bce: one weight per row expected");
    double total = 0.0;
    for (double w : row_weights->data()) total += w;
    if (!(total > 0.0)) throw DomainError("bce: row weights sum to zero");
    for (std::size_t r = 0; r < rows; ++r) {
      const double w = (*row_weights)[r] / (total * static_cast<double>(classes));
      for (std::size_t c = 0; c < classes; ++c) coef[r * classes + c] = w;
    }
  }
  Tensor pos_coef = coef;
  Tensor neg_coef = coef;
  for (std::size_t i = 0; i < target.size(); ++i) {
    pos_coef[i] *= target[i];
    neg_coef[i] *= 1.0 - target[i];
  }
  const Var p = ops::clamp(pred, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
  const Var one_minus = ops::sub(constant(pred, Tensor::scalar(1.0)), p);
  const Var ll = ops::add(ops::sum(ops::mul(ops::log(p), constant(pred, pos_coef))),
                          ops::sum(ops::mul(ops::log(one_minus), constant(pred, neg_coef))));
  return ops::scale(ll, -1.0);
}

Var soft_distill_loss(Var student_pred, const Tensor& teacher_pred, const std::optional<Tensor>& row_weights) {
  return bce_multilabel(student_pred, teacher_pred, row_weights);
}

MixedBatch input_mixup_with(const Tensor& x, const Tensor& y, double lambda, std::vector<std::size_t> partner) {
  if (x.rows() != y.rows() || partner.size() != x.rows()) throw ShapeError("mixup: batch sizes disagree");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw DomainError("mixup lambda outside [0, 1]");
  MixedBatch out{x, y, lambda, std::move(partner)};
  if (lambda == 1.0) return out;
  auto blend = [&](const Tensor& src, Tensor& dst) {
    const std::size_t cols = src.cols();
    for (std::size_t r = 0; r < src.rows(); ++r) {
      const auto a = src.row(r);
      const auto b = src.row(out.partner[r]);
      auto o = dst.row(r);
      for (std::size_t c = 0; c < cols; ++c) o[c] = lambda * a[c] + (1.0 - lambda) * b[c];
    }
  };
  blend(x, out.x);
  blend(y, out.y);
  return out;
}

MixedBatch input_mixup(const Tensor& x, const Tensor& y, double alpha, Rng& rng) {
  if (!(alpha > 0.0)) throw ConfigError("mixup alpha must be positive");
  const double lambda = rng.beta(alpha, alpha);
  return input_mixup_with(x, y, lambda, rng.permutation(x.rows()));
}

}  // namespace tripcon

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

// Training objectives: stage-wise supervised contrastive loss, the hard-pair
// mix loss, multi-label BCE (hard and soft targets) and input mixup.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "tripcon/autodiff.hpp"
#include "tripcon/rng.hpp"
#include "tripcon/sampler.hpp"
#include "tripcon/schema.hpp"

namespace tripcon {

struct LossConfig {
  double tau = 0.1;
  double alpha_input = 0.4;
  double alpha_feat = 0.4;
  double hard_label_weight = 0.0;  // student auxiliary term on hard labels
  bool sum_contrastive = false;    // add the full-batch loss to the mix loss

  void validate() const;
};

inline constexpr double kProbabilityEpsilon = 1e-7;

// Mean over valid anchors of
//   -(1/|P(i)|) sum_{p in P(i)} log(exp(z_i.z_p/tau) / sum_{a != i} exp(z_i.z_a/tau)).
// z must hold unit rows. Throws EmptyBatchError when no anchor has a positive.
Var supcon_stage_loss(Var z, std::span<const MultiLabel> labels, const TripletVocabulary& vocab, Stage stage,
                      double tau);

// Single anchor (1 x d rows): log(1 + sum_s exp((z.v_s - z.z_p)/tau)) with every v_s
// re-normalized. `synthetic` is S x d; S = 0 gives 0.
Var supcon_mix_loss(Var anchor, Var positive, std::optional<Var> synthetic, double tau);

// Batched form over the active anchors of `pairs`; synthetic negatives are
// built from rows of z by the recorded mixes. Throws EmptyBatchError when no
// anchor is active.
Var supcon_mix_loss(Var z, const PairSet& pairs, double tau);

// -(1/C) sum_c [y log p + (1 - y) log(1 - p)], p clamped to [eps, 1 - eps],
// averaged over rows. Optional per-row weights (e.g. a padding mask) turn the
// average into a weighted one.
Var bce_multilabel(Var pred, const Tensor& target, const std::optional<Tensor>& row_weights = std::nullopt);

// BCE against the teacher's probabilities; the teacher side is a constant.
Var soft_distill_loss(Var student_pred, const Tensor& teacher_pred,
                      const std::optional<Tensor>& row_weights = std::nullopt);

struct MixedBatch {
  Tensor x;
  Tensor y;
  double lambda = 1.0;
  std::vector<std::size_t> partner;
};

// x~ = lambda x + (1 - lambda) x[partner], likewise for y, with one
// lambda ~ Beta(alpha, alpha) per batch and partner a random permutation.
MixedBatch input_mixup(const Tensor& x, const Tensor& y, double alpha, Rng& rng);
MixedBatch input_mixup_with(const Tensor& x, const Tensor& y, double lambda, std::vector<std::size_t> partner);

}  // namespace tripcon

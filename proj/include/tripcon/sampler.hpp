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

// Progressive hard-pair selection for one contrastive batch at one
// curriculum stage, plus Beta-mixed synthetic negatives.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tripcon/rng.hpp"
#include "tripcon/schema.hpp"
#include "tripcon/tensor.hpp"

namespace tripcon {

struct SamplerConfig {
  std::size_t hard_positives = 8;   // K
  std::size_t hard_negatives = 32;  // N
  std::size_t sampled_negatives = 8;  // M
  std::size_t synthetic_negatives = 4;  // S
  double alpha = 0.4;               // Beta parameter for feature mixup
};

// B x B cosine similarities of the rows of `features`. Throws DomainError on
// a zero-norm row.
Tensor cosine_similarity_matrix(const Tensor& features);

struct CandidatePools {
  std::vector<std::size_t> positives;  // j != i with equal stage labels
  std::vector<std::size_t> negatives;  // j with different stage labels
  bool anchor_eligible = true;         // false for frames without any triplet
};

std::vector<CandidatePools> candidate_pools(std::span<const MultiLabel> labels, const TripletVocabulary& vocab,
                                            Stage stage);

struct HardPools {
  std::vector<std::size_t> positives;  // BottomK by similarity
  std::vector<std::size_t> negatives;  // TopN by similarity
};

// Ties in similarity break by ascending index.
std::vector<HardPools> hard_pools(const Tensor& similarity, std::span<const CandidatePools> pools, std::size_t k,
                                  std::size_t n);

// One synthetic negative: lambda * row(first) + (1 - lambda) * row(second).
struct SyntheticMix {
  std::size_t first = 0;
  std::size_t second = 0;
  double lambda = 0.0;
};

struct AnchorPairs {
  bool active = false;
  std::size_t positive = 0;
  std::vector<std::size_t> negatives;      // R_neg
  std::vector<SyntheticMix> synthetic;     // indices refer to batch rows
  bool synthetic_degenerate = false;       // fewer than two negatives
};

struct PairSet {
  std::vector<AnchorPairs> anchors;
  std::size_t active_count() const;
};

// Uniform draw of the positive and a uniform subset of at most M negatives.
// Anchor i draws from its own stream derive_seed(seed, i); ineligible anchors
// and anchors with no hard positive are inactive.
PairSet sample_pairs(std::span<const HardPools> pools, std::span<const CandidatePools> candidates, std::size_t m,
                     std::uint64_t seed);

struct SyntheticRecipe {
  std::vector<SyntheticMix> mixes;
  bool degenerate = false;
};

// Draws S pairs of distinct members of `negatives` and a Beta(alpha, alpha)
// weight for each. Fewer than two negatives gives an empty, degenerate recipe.
SyntheticRecipe synthesize_recipe(std::span<const std::size_t> negatives, std::size_t s, double alpha, Rng& rng);

// Applies mixes to the rows of `rows`; the result has one row per mix.
Tensor mix_rows(const Tensor& rows, std::span<const SyntheticMix> mixes);

struct SyntheticNegatives {
  Tensor vectors;  // S x d
  std::vector<SyntheticMix> mixes;
  bool degenerate = false;
};

// Synthetic negatives from explicit negative vectors (rows of `negatives`).
SyntheticNegatives synthesize_negatives(const Tensor& negatives, std::size_t s, double alpha, Rng& rng);

// Full per-batch selection: similarity on `embeddings`, pools, hard pools,
// pairs and synthetic recipes, all a pure function of the arguments.
PairSet select_pairs(const Tensor& embeddings, std::span<const MultiLabel> labels, const TripletVocabulary& vocab,
                     Stage stage, const SamplerConfig& config, std::uint64_t seed);

}  // namespace tripcon

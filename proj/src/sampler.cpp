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

#include "tripcon/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tripcon/errors.hpp"
#include "tripcon/kernels.hpp"

namespace tripcon {

Tensor cosine_similarity_matrix(const Tensor& features) {
  if (features.rank() != 2) throw ShapeError("cosine_similarity_matrix expects a B x d matrix");
  const std::size_t b = features.rows();
  const std::size_t d = features.cols();
  for (std::size_t i = 0; i < b; ++i) {
    const auto row = features.row(i);
    if (std::all_of(row.begin(), row.end(), [](double v) { return v == 0.0; })) {
      throw DomainError("zero-norm feature row " + std::to_string(i));
    }
  }
  Tensor out({b, b});
  kernels::pairwise_cosine(features.data(), b, d, out.data());
  return out;
}

std::vector<CandidatePools> candidate_pools(std::span<const MultiLabel> labels, const TripletVocabulary& vocab,
                                            Stage stage) {
  const std::size_t b = labels.size();
  std::vector<StageLabel> projected;
  projected.reserve(b);
  for (const MultiLabel& l : labels) projected.push_back(project_to_stage(l, vocab, stage));
  std::vector<CandidatePools> pools(b);
  for (std::size_t i = 0; i < b; ++i) {
    pools[i].anchor_eligible = !projected[i].keys.empty();
    for (std::size_t j = 0; j < b; ++j) {
      if (j == i) continue;
      (projected[i].keys == projected[j].keys ? pools[i].positives : pools[i].negatives).push_back(j);
    }
  }
  return pools;
}

std::vector<HardPools> hard_pools(const Tensor& similarity, std::span<const CandidatePools> pools, std::size_t k,
                                  std::size_t n) {
  if (k == 0 || n == 0) throw ConfigError("hard pool caps must be at least 1");
  if (similarity.rank() != 2 || similarity.rows() != pools.size() || similarity.cols() != pools.size()) {
    throw ShapeError("similarity matrix does not match the batch");
  }
  std::vector<HardPools> out(pools.size());
  for (std::size_t i = 0; i < pools.size(); ++i) {
    auto pick = [&](std::vector<std::size_t> members, std::size_t cap, bool lowest) {
      auto before = [&](std::size_t a, std::size_t b) {
        const double sa = similarity.at(i, a);
        const double sb = similarity.at(i, b);
        if (sa != sb) return lowest ? sa < sb : sa > sb;
        return a < b;
      };
      const std::size_t keep = std::min(cap, members.size());
      std::partial_sort(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(keep), members.end(), before);
      members.resize(keep);
      return members;
    };
    out[i].positives = pick(pools[i].positives, k, true);
    out[i].negatives = pick(pools[i].negatives, n, false);
  }
  return out;
}

std::size_t PairSet::active_count() const {
  return static_cast<std::size_t>(
      std::count_if(anchors.begin(), anchors.end(), [](const AnchorPairs& a) { return a.active; }));
}

namespace {

// Uniform subset of size min(m, |pool|) without replacement, in draw order.
std::vector<std::size_t> draw_subset(std::vector<std::size_t> pool, std::size_t m, Rng& rng) {
  const std::size_t take = std::min(m, pool.size());
  for (std::size_t i = 0; i < take; ++i) {
    std::swap(pool[i], pool[i + rng.index(pool.size() - i)]);
  }
  pool.resize(take);
  return pool;
}

AnchorPairs sample_anchor(const HardPools& pools, bool eligible, std::size_t m, Rng& rng) {
  AnchorPairs a;
  if (!eligible || pools.positives.empty()) return a;
  a.active = true;
  a.positive = pools.positives[rng.index(pools.positives.size())];
  a.negatives = draw_subset(pools.negatives, m, rng);
  return a;
}

}  // namespace

PairSet sample_pairs(std::span<const HardPools> pools, std::span<const CandidatePools> candidates, std::size_t m,
                     std::uint64_t seed) {
  if (m == 0) throw ConfigError("sampled negative cap must be at least 1");
  if (candidates.size() != pools.size()) throw ShapeError("pool lists differ in length");
  PairSet out;
  out.anchors.resize(pools.size());
  const auto count = static_cast<std::ptrdiff_t>(pools.size());
#pragma omp parallel for schedule(static) if (count > 64)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, i));
    out.anchors[i] = sample_anchor(pools[i], candidates[i].anchor_eligible, m, rng);
  }
  return out;
}

SyntheticRecipe synthesize_recipe(std::span<const std::size_t> negatives, std::size_t s, double alpha, Rng& rng) {
  if (!(alpha > 0.0)) throw ConfigError("mixup alpha must be positive");
  SyntheticRecipe recipe;
  if (negatives.size() < 2) {
    recipe.degenerate = true;
    return recipe;
  }
  for (std::size_t q = 0; q < s; ++q) {
    const std::size_t a = rng.index(negatives.size());
    std::size_t b = rng.index(negatives.size() - 1);
    if (b >= a) ++b;
    recipe.mixes.push_back({negatives[a], negatives[b], rng.beta(alpha, alpha)});
  }
  return recipe;
}

Tensor mix_rows(const Tensor& rows, std::span<const SyntheticMix> mixes) {
  const std::size_t d = rows.cols();
  Tensor out({mixes.size(), d});
  for (std::size_t q = 0; q < mixes.size(); ++q) {
    const auto& mix = mixes[q];
    if (mix.first >= rows.rows() || mix.second >= rows.rows()) throw ShapeError("mix index out of range");
    const auto u = rows.row(mix.first);
    const auto v = rows.row(mix.second);
    auto o = out.row(q);
    for (std::size_t c = 0; c < d; ++c) o[c] = mix.lambda * u[c] + (1.0 - mix.lambda) * v[c];
  }
  return out;
}

SyntheticNegatives synthesize_negatives(const Tensor& negatives, std::size_t s, double alpha, Rng& rng) {
  std::vector<std::size_t> ids(negatives.rank() == 0 ? 0 : negatives.rows());
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  SyntheticRecipe recipe = synthesize_recipe(ids, s, alpha, rng);
  SyntheticNegatives out;
  out.degenerate = recipe.degenerate;
  out.vectors = recipe.mixes.empty() ? Tensor({0, negatives.cols()}) : mix_rows(negatives, recipe.mixes);
  out.mixes = std::move(recipe.mixes);
  return out;
}

PairSet select_pairs(const Tensor& embeddings, std::span<const MultiLabel> labels, const TripletVocabulary& vocab,
                     Stage stage, const SamplerConfig& config, std::uint64_t seed) {
  if (embeddings.rank() != 2 || embeddings.rows() != labels.size()) {
    throw ShapeError("embeddings and labels disagree on batch size");
  }
  const Tensor sim = cosine_similarity_matrix(embeddings);
  const auto candidates = candidate_pools(labels, vocab, stage);
  const auto hard = hard_pools(sim, candidates, config.hard_positives, config.hard_negatives);
  PairSet pairs = sample_pairs(hard, candidates, config.sampled_negatives, seed);
  // Recipes use a second stream per anchor so that changing S leaves the
  // pair draws untouched.
  const std::uint64_t mix_seed = derive_seed(seed, 0x6d6978ULL);
  for (std::size_t i = 0; i < pairs.anchors.size(); ++i) {
    AnchorPairs& a = pairs.anchors[i];
    if (!a.active) continue;
    Rng rng(derive_seed(mix_seed, i));
    SyntheticRecipe recipe = synthesize_recipe(a.negatives, config.synthetic_negatives, config.alpha, rng);
    a.synthetic = std::move(recipe.mixes);
    a.synthetic_degenerate = recipe.degenerate;
  }
  return pairs;
}

}  // namespace tripcon

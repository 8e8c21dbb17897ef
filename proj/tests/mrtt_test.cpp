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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "test_support.hpp"
#include "tripcon/errors.hpp"

namespace tripcon {
namespace {

MrttConfig toy_config() {
  MrttConfig c;
  c.embed_dim = 8;
  c.classes = 3;
  c.pathway.strides = {2, 3, 4};
  c.pathway.layers = 2;
  c.pathway.heads = 2;
  c.pathway.ff_width = 6;
  c.pathway.dropout = 0.0;
  return c;
}

Tensor ones_mask(std::size_t b, std::size_t t) { return Tensor({b, t}, 1.0); }

TEST(MrttTest, PositionalEncodingExamples) {
  const Tensor pe = sinusoidal_pe(5, 4);
  EXPECT_EQ(pe.at(0, 0), 0.0);
  EXPECT_EQ(pe.at(0, 1), 1.0);
  EXPECT_EQ(pe.at(0, 2), 0.0);
  EXPECT_EQ(pe.at(0, 3), 1.0);
  for (double v : pe.data()) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_NEAR(pe.at(1, 0), std::sin(1.0), 1e-15);
  EXPECT_NEAR(pe.at(1, 1), std::cos(1.0), 1e-15);
  EXPECT_NEAR(pe.at(1, 2), std::sin(1.0 / 100.0), 1e-15);
  EXPECT_NEAR(pe.at(1, 3), std::cos(1.0 / 100.0), 1e-15);
  EXPECT_THROW(sinusoidal_pe(3, 5), ShapeError);
}

TEST(MrttTest, ConfigValidation) {
  MrttConfig c = toy_config();
  c.pathway.heads = 3;
  EXPECT_THROW(MrttModel(c, 1), ConfigError);
  c = toy_config();
  c.pathway.strides = {2, 2};
  EXPECT_THROW(MrttModel(c, 1), ConfigError);
}

TEST(MrttTest, PathwayShapesAndShortSequences) {
  MrttModel model(toy_config(), 1);
  Rng rng(2);
  Tape tape(false);
  const Bindings b(tape, model.params(), false);
  const Var e = tape.constant(testing::random_tensor(rng, {2, 12, 8}));
  const Var z = model.pathway_forward(b, 2, e, ones_mask(2, 12), nullptr, false);
  EXPECT_EQ(z.shape(), (Shape{2, 12, 3}));
  const Var short_e = tape.constant(testing::random_tensor(rng, {2, 3, 8}));
  EXPECT_THROW(model.pathway_forward(b, 2, short_e, ones_mask(2, 3), nullptr, false), ShapeError);
}

TEST(MrttTest, ShapeContractAcrossWindowLengths) {
  MrttConfig c = toy_config();
  c.pathway.strides = {4, 5, 6};
  MrttModel model(c, 3);
  Rng rng(4);
  for (std::size_t t = 6; t <= 64; ++t) {
    Tape tape(false);
    const Bindings b(tape, model.params(), false);
    const auto out = model.forward(b, tape.constant(testing::random_tensor(rng, {2, t, 8})), ones_mask(2, t),
                                   nullptr, false);
    ASSERT_EQ(out.final_logits.shape(), (Shape{2, t, 3})) << t;
  }
}

TEST(MrttTest, ZeroedEncoderGivesConstantLogitsOnConstantInput) {
  MrttModel model(toy_config(), 5);
  for (auto& [name, t] : model.params().entries()) {
    if (name.rfind("path", 0) == 0 && name.find(".head.") == std::string::npos) t = Tensor(t.shape(), 0.0);
  }
  Tensor e({1, 13, 8});
  for (std::size_t t = 0; t < 13; ++t)
    for (std::size_t c = 0; c < 8; ++c) e[t * 8 + c] = 0.1 * static_cast<double>(c) - 0.2;
  Tape tape(false);
  const Bindings b(tape, model.params(), false);
  for (std::size_t p = 0; p < 3; ++p) {
    const Tensor z = model.pathway_forward(b, p, tape.constant(e), ones_mask(1, 13), nullptr, false).value();
    for (std::size_t t = 1; t < 13; ++t) {
      for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(z.at(t, c), z.at(0, c));
    }
  }
}

TEST(MrttTest, FusionExamples) {
  Rng rng(6);
  Tape tape(false);
  std::vector<Var> zs;
  for (int k = 0; k < 3; ++k) zs.push_back(tape.constant(testing::random_tensor(rng, {2, 4, 3})));
  const Tensor uniform = fuse_multires(zs, tape.constant(Tensor({1, 3}, 0.7))).value();
  const Tensor saturated = fuse_multires(zs, tape.constant(Tensor::matrix(1, 3, {100, -100, -100}))).value();
  const Tensor wv = Tensor::matrix(1, 3, {0.3, -1.2, 0.5});
  const Tensor weighted = fuse_multires(zs, tape.constant(wv)).value();
  double norm = 0;
  for (double w : wv.data()) norm += std::exp(w);
  for (std::size_t i = 0; i < uniform.size(); ++i) {
    const double a = zs[0].value()[i];
    const double b = zs[1].value()[i];
    const double c = zs[2].value()[i];
    EXPECT_NEAR(uniform[i], (a + b + c) / 3.0, 1e-15);
    EXPECT_NEAR(saturated[i], a, 1e-10);
    EXPECT_NEAR(weighted[i], (std::exp(0.3) * a + std::exp(-1.2) * b + std::exp(0.5) * c) / norm, 1e-12);
  }
  EXPECT_THROW(fuse_multires(zs, tape.constant(Tensor({1, 2}, 0.0))), ShapeError);
}

TEST(MrttTest, SpatiotemporalFusionExamples) {
  Rng rng(7);
  Tape tape(false);
  const Var s = tape.constant(testing::random_tensor(rng, {2, 5, 3}));
  const Var t = tape.constant(testing::random_tensor(rng, {2, 5, 3}));
  const Tensor sat = fuse_spatiotemporal(s, t, tape.constant(Tensor::scalar(50.0))).value();
  const Tensor mid = fuse_spatiotemporal(s, t, tape.constant(Tensor::scalar(0.0))).value();
  const Tensor same = fuse_spatiotemporal(s, s, tape.constant(Tensor::scalar(-0.8))).value();
  for (std::size_t i = 0; i < sat.size(); ++i) {
    EXPECT_NEAR(sat[i], s.value()[i], 1e-10);
    EXPECT_NEAR(mid[i], 0.5 * (s.value()[i] + t.value()[i]), 1e-15);
    EXPECT_NEAR(same[i], s.value()[i], 1e-15);
  }
  EXPECT_THROW(fuse_spatiotemporal(s, tape.constant(Tensor({2, 5, 2})), tape.constant(Tensor::scalar(0.0))),
               ShapeError);
}

TEST(MrttTest, SpatialHeadIsPerFrame) {
  MrttModel model(toy_config(), 8);
  Rng rng(9);
  const Tensor e = testing::random_tensor(rng, {6, 8});
  Tape tape(false);
  const Bindings b(tape, model.params(), false);
  const Tensor z = model.spatial_head(b, tape.constant(e)).value();
  std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
  Tensor ep({6, 8});
  for (std::size_t t = 0; t < 6; ++t)
    for (std::size_t c = 0; c < 8; ++c) ep.at(t, c) = e.at(perm[t], c);
  const Tensor zp = model.spatial_head(b, tape.constant(ep)).value();
  for (std::size_t t = 0; t < 6; ++t)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(zp.at(t, c), z.at(perm[t], c));

  for (auto name : {"spatial.weight"}) model.params().get(name) = Tensor(model.params().get(name).shape(), 0.0);
  const Bindings b0(tape, model.params(), false);
  const Tensor zb = model.spatial_head(b0, tape.constant(e)).value();
  for (std::size_t t = 0; t < 6; ++t)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(zb.at(t, c), model.params().get("spatial.bias")[c]);
}

TEST(MrttTest, GammaAndBetaRespectToggles) {
  MrttConfig c = toy_config();
  MrttModel on(c, 1);
  const auto g = on.gamma();
  EXPECT_NEAR(std::accumulate(g.begin(), g.end(), 0.0), 1.0, 1e-12);
  EXPECT_EQ(on.beta(), 0.5);
  c.learn_gamma = false;
  c.use_beta = false;
  MrttModel off(c, 1);
  EXPECT_EQ(off.beta(), 0.0);
  EXPECT_EQ(off.frozen_names().size(), 4u);
  Rng rng(2);
  Tape tape(false);
  const Bindings b(tape, off.params(), false);
  const auto out = off.forward(b, tape.constant(testing::random_tensor(rng, {1, 8, 8})), ones_mask(1, 8), nullptr,
                               false);
  EXPECT_EQ(out.final_logits.value(), out.temporal.value());
}

TEST(MrttTest, ForwardIsDeterministic) {
  MrttModel a(toy_config(), 10);
  MrttModel b(toy_config(), 10);
  Rng rng(11);
  const Tensor e = testing::random_tensor(rng, {2, 9, 8});
  EXPECT_EQ(a.probabilities(e, ones_mask(2, 9)), b.probabilities(e, ones_mask(2, 9)));
}

TEST(MrttTest, MaskedTailDoesNotLeakIntoValidFrames) {
  MrttModel model(toy_config(), 12);
  Rng rng(13);
  Tensor e = testing::random_tensor(rng, {1, 12, 8});
  Tensor mask = ones_mask(1, 12);
  for (std::size_t t = 8; t < 12; ++t) mask[t] = 0.0;
  const Tensor p1 = model.probabilities(e, mask);
  for (std::size_t i = 8 * 8; i < e.size(); ++i) e[i] = 100.0;
  const Tensor p2 = model.probabilities(e, mask);
  // Every pooled window of the valid prefix only sees valid frames, so
  // the valid outputs of the spatial head and the pathways are unchanged.
  for (std::size_t t = 0; t < 8; ++t)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(p1.at(t, c), p2.at(t, c), 1e-12);
}

TEST(MrttTest, EndToEndGradientCheck) {
  MrttConfig c = toy_config();
  MrttModel model(c, 14);
  Rng rng(15);
  // Move gamma and beta away from their symmetric initial values.
  model.params().get("fusion.w") = Tensor::matrix(1, 3, {0.2, -0.4, 0.1});
  model.params().get("fusion.b_beta") = Tensor::scalar(0.3);
  std::vector<Tensor> points{testing::random_tensor(rng, {2, 8, 8})};
  for (const auto& [name, t] : model.params().entries()) points.push_back(t);
  const Tensor mask = ones_mask(2, 8);
  const ScalarFunction f = [&](Tape&, std::span<const Var> in) {
    const Bindings b(model.params(), in.subspan(1));
    return ops::mean(model.forward(b, in[0], mask, nullptr, false).final_logits);
  };
  const auto report = check_gradients(f, points);
  EXPECT_TRUE(report.passed) << report.max_rel_error;
}

}  // namespace
}  // namespace tripcon

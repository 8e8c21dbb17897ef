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

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "tripcon/errors.hpp"

namespace tripcon {
namespace {

Tensor random_tensor(Rng& rng, Shape shape, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = scale * rng.normal();
  return t;
}

Tensor positive_tensor(Rng& rng, Shape shape) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = 0.5 + rng.uniform();
  return t;
}

// Weighted sum makes every output coordinate matter to the scalar.
Var weighted_sum(Var y, std::uint64_t seed) {
  Rng rng(seed);
  Tensor w(y.shape());
  for (double& v : w.data()) v = rng.normal();
  return ops::sum(ops::mul(y, ops::constant_like(y, w)));
}

TEST(AutodiffTest, RowL2NormalizeOfThreeFour) {
  Tape tape(false);
  const Var y = ops::l2_normalize_rows(tape.constant(Tensor::matrix(1, 2, {3, 4})));
  EXPECT_DOUBLE_EQ(y.value()[0], 0.6);
  EXPECT_DOUBLE_EQ(y.value()[1], 0.8);
}

TEST(AutodiffTest, RowSoftmaxOfZerosIsUniform) {
  Tape tape(false);
  const Var y = ops::softmax_rows(tape.constant(Tensor::vector({0, 0, 0})));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(y.value()[i], 1.0 / 3.0);
}

TEST(AutodiffTest, MaskedMeanPoolComputesWindowMeans) {
  Tape tape(false);
  Tensor x(Shape{1, 12, 1});
  for (std::size_t t = 0; t < 12; ++t) x[t] = static_cast<double>(t);
  const Var y = ops::masked_mean_pool(tape.constant(x), Tensor(Shape{1, 12}, 1.0), 4);
  ASSERT_EQ(y.shape(), (Shape{1, 3, 1}));
  EXPECT_DOUBLE_EQ(y.value()[0], 1.5);
  EXPECT_DOUBLE_EQ(y.value()[1], 5.5);
  EXPECT_DOUBLE_EQ(y.value()[2], 9.5);

  const Var c = ops::masked_mean_pool(tape.constant(Tensor(Shape{1, 12, 2}, 0.1)),
                                      Tensor(Shape{1, 12}, 1.0), 4);
  for (double v : c.value().data()) EXPECT_EQ(v, 0.1);
}

TEST(AutodiffTest, PoolFinalWindowIsShorterAndEmptyWindowsCopyLeft) {
  Tape tape(false);
  Tensor x(Shape{1, 7, 1});
  for (std::size_t t = 0; t < 7; ++t) x[t] = static_cast<double>(t);
  Tensor mask(Shape{1, 7}, 1.0);
  const Var y = ops::masked_mean_pool(tape.constant(x), mask, 3);
  ASSERT_EQ(y.shape(), (Shape{1, 3, 1}));
  EXPECT_DOUBLE_EQ(y.value()[2], 6.0);

  // Frames 3..6 are padding: window 1 and 2 have no valid frame.
  for (std::size_t t = 3; t < 7; ++t) mask[t] = 0.0;
  const Var z = ops::masked_mean_pool(tape.constant(x), mask, 3);
  EXPECT_DOUBLE_EQ(z.value()[0], 1.0);
  EXPECT_DOUBLE_EQ(z.value()[1], 1.0);
  EXPECT_DOUBLE_EQ(z.value()[2], 1.0);
}

TEST(AutodiffTest, PoolThenUpsamplePreservesConstantsExactly) {
  Rng rng(3);
  Tape tape(false);
  for (std::size_t length = 6; length <= 64; ++length) {
    for (std::size_t stride : {4u, 5u, 6u}) {
      const double c = rng.normal();
      const Var x = tape.constant(Tensor(Shape{2, length, 3}, c));
      const Var y = ops::upsample_linear(ops::masked_mean_pool(x, Tensor(Shape{2, length}, 1.0), stride), length);
      ASSERT_EQ(y.shape(), x.shape());
      for (double v : y.value().data()) ASSERT_EQ(v, c);
    }
  }
}

TEST(AutodiffTest, UpsampleIsEndpointAligned) {
  Tape tape(false);
  const Var y = ops::upsample_linear(tape.constant(Tensor::matrix(2, 1, {0.0, 1.0})), 5);
  const std::vector<double> expected{0.0, 0.25, 0.5, 0.75, 1.0};
  for (std::size_t i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(y.value()[i], expected[i]);
}

TEST(AutodiffTest, SumGradientIsAllOnes) {
  Rng rng(1);
  Tape tape;
  const Var x = tape.leaf(random_tensor(rng, {2, 3, 4}));
  const Gradients g = tape.backward(ops::sum(x));
  for (double v : g[x].data()) EXPECT_EQ(v, 1.0);
}

TEST(AutodiffTest, SquareGradientIsTwoX) {
  Tape tape;
  const Var x = tape.leaf(Tensor::vector({1, 2}));
  const Gradients g = tape.backward(ops::sum(ops::mul(x, x)));
  EXPECT_DOUBLE_EQ(g[x][0], 2.0);
  EXPECT_DOUBLE_EQ(g[x][1], 4.0);
}

TEST(AutodiffTest, SharedInputAccumulatesAcrossUses) {
  Tape tape;
  const Var x = tape.leaf(Tensor::scalar(3.0));
  const Var y = ops::add(ops::mul(x, x), ops::scale(x, 5.0));
  const Gradients g = tape.backward(y);
  EXPECT_DOUBLE_EQ(g[x].item(), 11.0);
}

TEST(AutodiffTest, BackwardRejectsNonScalarAndForeignLoss) {
  Tape tape, other;
  const Var x = tape.leaf(Tensor::vector({1, 2}));
  EXPECT_THROW(tape.backward(x), ShapeError);
  const Var y = other.leaf(Tensor::scalar(1.0));
  EXPECT_THROW(tape.backward(y), Error);
}

TEST(AutodiffTest, ErrorsForShapesDomainsAndUnknownPrimitives) {
  Tape tape;
  const Var a = tape.leaf(Tensor(Shape{2, 3}, 1.0));
  const Var b = tape.leaf(Tensor(Shape{2, 2}, 1.0));
  EXPECT_THROW(ops::matmul(a, a), ShapeError);
  EXPECT_THROW(ops::add(a, b), ShapeError);
  EXPECT_THROW(ops::log(tape.leaf(Tensor::vector({1.0, 0.0}))), DomainError);
  EXPECT_THROW(ops::l2_normalize_rows(tape.leaf(Tensor::matrix(1, 2, {0, 0}))), DomainError);
  EXPECT_THROW(ops::exp(tape.leaf(Tensor::scalar(1000.0))), DomainError);
  try {
    tape.apply(static_cast<Primitive>(999), {a});
    FAIL() << "expected an unknown primitive error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), "unknown_primitive");
  }
}

TEST(AutodiffTest, BroadcastAddsBiasAndScalar) {
  Tape tape;
  const Var x = tape.leaf(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  const Var bias = tape.leaf(Tensor::vector({10, 20}));
  const Var s = tape.leaf(Tensor::scalar(2.0));
  const Var y = ops::mul(ops::add(x, bias), s);
  EXPECT_EQ(y.value(), Tensor::matrix(2, 2, {22, 44, 26, 48}));
  const Gradients g = tape.backward(ops::sum(y));
  EXPECT_EQ(g[bias], Tensor::vector({4, 4}));
  EXPECT_DOUBLE_EQ(g[s].item(), 1 + 2 + 3 + 4 + 10 * 2 + 20 * 2);
}

TEST(AutodiffTest, GradientCheckOfSumHasZeroError) {
  Rng rng(5);
  const auto report = check_gradients([](Tape&, std::span<const Var> in) { return ops::sum(in[0]); },
                                      {random_tensor(rng, {3, 4})});
  EXPECT_TRUE(report.passed);
  EXPECT_LT(report.max_abs_error, 1e-9);
}

TEST(AutodiffTest, GradientCheckOfSoftmaxFirstElement) {
  const auto report = check_gradients(
      [](Tape&, std::span<const Var> in) { return ops::sum(ops::slice(ops::softmax_rows(in[0]), 0, 0, 1)); },
      {Tensor::vector({1, 2, 3})});
  EXPECT_LT(report.max_rel_error, 1e-6);
}

TEST(AutodiffTest, GradientCheckFlagsNonDifferentiablePointWithoutThrowing) {
  const auto report = check_gradients(
      [](Tape&, std::span<const Var> in) { return ops::sum(ops::relu(in[0])); }, {Tensor::vector({0.0})});
  EXPECT_FALSE(report.passed);
}

struct PrimitiveCase {
  const char* name;
  std::function<std::vector<Tensor>(Rng&)> inputs;
  std::function<Var(std::span<const Var>)> apply;
};

void PrintTo(const PrimitiveCase& c, std::ostream* os) { *os << c.name; }

class PrimitiveGradientTest : public ::testing::TestWithParam<PrimitiveCase> {};

// 100 random points per primitive, central differences, relative 1e-4.
TEST_P(PrimitiveGradientTest, MatchesFiniteDifferences) {
  const PrimitiveCase& c = GetParam();
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const auto points = c.inputs(rng);
    const std::uint64_t weights_seed = rng.next_u64();
    const auto report = check_gradients(
        [&](Tape&, std::span<const Var> in) { return weighted_sum(c.apply(in), weights_seed); }, points);
    ASSERT_TRUE(report.passed) << c.name << " trial " << trial << " rel " << report.max_rel_error;
  }
}

Tensor pool_mask() {
  Tensor m(Shape{2, 9}, 1.0);
  m[7] = 0.0;
  m[8] = 0.0;
  for (std::size_t t = 12; t < 18; ++t) m[t] = 0.0;
  return m;
}

INSTANTIATE_TEST_SUITE_P(
    Catalog, PrimitiveGradientTest,
    ::testing::Values(
        PrimitiveCase{"add", [](Rng& r) { return std::vector{random_tensor(r, {3, 4}), random_tensor(r, {4})}; },
                      [](std::span<const Var> v) { return ops::add(v[0], v[1]); }},
        PrimitiveCase{"subtract", [](Rng& r) { return std::vector{random_tensor(r, {3, 4}), random_tensor(r, {3, 4})}; },
                      [](std::span<const Var> v) { return ops::sub(v[0], v[1]); }},
        PrimitiveCase{"multiply", [](Rng& r) { return std::vector{random_tensor(r, {2, 3, 2}), random_tensor(r, {})}; },
                      [](std::span<const Var> v) { return ops::mul(v[0], v[1]); }},
        PrimitiveCase{"scale", [](Rng& r) { return std::vector{random_tensor(r, {5})}; },
                      [](std::span<const Var> v) { return ops::scale(v[0], -2.5); }},
        PrimitiveCase{"matmul", [](Rng& r) { return std::vector{random_tensor(r, {2, 3, 4}), random_tensor(r, {4, 5})}; },
                      [](std::span<const Var> v) { return ops::matmul(v[0], v[1]); }},
        PrimitiveCase{"transpose", [](Rng& r) { return std::vector{random_tensor(r, {3, 5})}; },
                      [](std::span<const Var> v) { return ops::transpose(v[0]); }},
        PrimitiveCase{"exp", [](Rng& r) { return std::vector{random_tensor(r, {6})}; },
                      [](std::span<const Var> v) { return ops::exp(v[0]); }},
        PrimitiveCase{"log", [](Rng& r) { return std::vector{positive_tensor(r, {6})}; },
                      [](std::span<const Var> v) { return ops::log(v[0]); }},
        PrimitiveCase{"sigmoid", [](Rng& r) { return std::vector{random_tensor(r, {6}, 3.0)}; },
                      [](std::span<const Var> v) { return ops::sigmoid(v[0]); }},
        PrimitiveCase{"relu", [](Rng& r) { return std::vector{random_tensor(r, {8})}; },
                      [](std::span<const Var> v) { return ops::relu(v[0]); }},
        PrimitiveCase{"clamp", [](Rng& r) { return std::vector{random_tensor(r, {8})}; },
                      [](std::span<const Var> v) { return ops::clamp(v[0], -0.5, 0.7); }},
        PrimitiveCase{"row-softmax", [](Rng& r) { return std::vector{random_tensor(r, {3, 5})}; },
                      [](std::span<const Var> v) { return ops::softmax_rows(v[0]); }},
        PrimitiveCase{"row-l2-normalize", [](Rng& r) { return std::vector{random_tensor(r, {3, 5})}; },
                      [](std::span<const Var> v) { return ops::l2_normalize_rows(v[0]); }},
        PrimitiveCase{"row-layer-norm", [](Rng& r) { return std::vector{random_tensor(r, {3, 6})}; },
                      [](std::span<const Var> v) { return ops::layer_norm_rows(v[0]); }},
        PrimitiveCase{"concat", [](Rng& r) { return std::vector{random_tensor(r, {2, 3}), random_tensor(r, {2, 2})}; },
                      [](std::span<const Var> v) { return ops::concat(v, 1); }},
        PrimitiveCase{"slice", [](Rng& r) { return std::vector{random_tensor(r, {2, 5, 3})}; },
                      [](std::span<const Var> v) { return ops::slice(v[0], 1, 1, 4); }},
        PrimitiveCase{"masked-mean-pool-1d", [](Rng& r) { return std::vector{random_tensor(r, {2, 9, 3})}; },
                      [](std::span<const Var> v) { return ops::masked_mean_pool(v[0], pool_mask(), 4); }},
        PrimitiveCase{"linear-interp-upsample-1d", [](Rng& r) { return std::vector{random_tensor(r, {2, 3, 2})}; },
                      [](std::span<const Var> v) { return ops::upsample_linear(v[0], 8); }},
        PrimitiveCase{"scaled-dot-attention",
                      [](Rng& r) {
                        return std::vector{random_tensor(r, {2, 4, 6}), random_tensor(r, {2, 4, 6}),
                                           random_tensor(r, {2, 4, 6})};
                      },
                      [](std::span<const Var> v) { return ops::attention(v[0], v[1], v[2], 2); }},
        PrimitiveCase{"dropout", [](Rng& r) { return std::vector{random_tensor(r, {10})}; },
                      [](std::span<const Var> v) {
                        // Fresh generator per evaluation keeps the mask fixed across probes.
                        Rng mask_rng(99);
                        return ops::dropout(v[0], 0.3, &mask_rng, true);
                      }},
        PrimitiveCase{"mean-reduce", [](Rng& r) { return std::vector{random_tensor(r, {3, 3})}; },
                      [](std::span<const Var> v) { return ops::mean(v[0]); }},
        PrimitiveCase{"sum-reduce", [](Rng& r) { return std::vector{random_tensor(r, {3, 3})}; },
                      [](std::span<const Var> v) { return ops::sum(v[0]); }}),
    [](const auto& info) {
      std::string n = info.param.name;
      for (char& ch : n) if (ch == '-') ch = '_';
      return n;
    });

TEST(AutodiffTest, SoftmaxRowsAreOnTheSimplex) {
  Rng rng(17);
  Tape tape(false);
  for (int trial = 0; trial < 50; ++trial) {
    const Var y = ops::softmax_rows(tape.constant(random_tensor(rng, {4, 7}, 10.0)));
    for (std::size_t r = 0; r < 4; ++r) {
      double s = 0.0;
      for (double v : y.value().row(r)) {
        EXPECT_GE(v, 0.0);
        s += v;
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(AutodiffTest, ForwardIsDeterministicUnderSeed) {
  auto run = [] {
    Rng rng(42);
    Tape tape;
    const Var x = tape.leaf(random_tensor(rng, {3, 8}));
    Rng drop(43);
    return ops::dropout(ops::softmax_rows(x), 0.5, &drop, true).value();
  };
  EXPECT_EQ(run(), run());
}

TEST(AutodiffTest, EvalDropoutIsIdentity) {
  Tape tape(false);
  const Tensor x = Tensor::vector({1, 2, 3});
  EXPECT_EQ(ops::dropout(tape.constant(x), 0.5, nullptr, false).value(), x);
}

}  // namespace
}  // namespace tripcon

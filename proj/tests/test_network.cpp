// Copyright 2026 The ndl Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ndl/eval.hpp"
#include "ndl/network.hpp"

namespace ndl {
namespace {

TEST(ParamCount, TenBandArchitectures) {
  const struct {
    Arch arch;
    int depth;
    std::size_t expected;
  } table[] = {
      {Arch::nd, 2, 136},     {Arch::nd, 3, 2206},    {Arch::nd, 4, 4276},
      {Arch::mlp, 2, 541},    {Arch::mlp, 3, 2611},   {Arch::mlp, 4, 4681},
      {Arch::attnd, 2, 631},  {Arch::attnd, 3, 2701}, {Arch::attnd, 4, 4771},
  };
  for (const auto& row : table) {
    EXPECT_EQ(count_params(build_model(row.arch, row.depth, 10, 0)), row.expected)
        << to_string(row.arch) << " depth " << row.depth;
  }
}

TEST(ParamCount, ClosedFormForOtherBandCounts) {
  for (std::size_t n : {2u, 3u, 7u}) {
    const std::size_t p = pair_count(n);
    EXPECT_EQ(count_params(build_model(Arch::nd, 2, n, 0)), 2 * p + p + 1);
    EXPECT_EQ(count_params(build_model(Arch::mlp, 3, n, 0)), n * p + p + p * p + p + p + 1);
    EXPECT_EQ(count_params(build_model(Arch::attnd, 2, n, 0)), 2 * p + p * n + p + p + 1);
  }
}

TEST(BuildModel, Validation) {
  EXPECT_THROW(build_model(Arch::nd, 1, 10, 0), UsageError);
  EXPECT_THROW(build_model(Arch::nd, 5, 10, 0), UsageError);
  EXPECT_THROW(build_model(Arch::mlp, 2, 1, 0), UsageError);
  EXPECT_THROW(build_model(Arch::nd, 2, 3, 0, EpsilonConfig{}, {"a", "b"}), UsageError);
  EXPECT_THROW(parse_arch("cnn"), UsageError);
  EXPECT_EQ(parse_arch("attnd"), Arch::attnd);
}

TEST(BuildModel, DeterministicBySeed) {
  EXPECT_EQ(build_model(Arch::attnd, 3, 6, 9), build_model(Arch::attnd, 3, 6, 9));
  EXPECT_NE(build_model(Arch::attnd, 3, 6, 9), build_model(Arch::attnd, 3, 6, 10));
}

TEST(BuildModel, InitialisationRanges) {
  const Model m = build_model(Arch::attnd, 4, 10, 3);
  for (double a : m.params.nd.alpha) EXPECT_EQ(a, 0.0);
  for (double b : m.params.nd.beta) EXPECT_EQ(b, 0.0);
  for (double w : m.params.gate.weights.values()) EXPECT_LE(std::abs(w), 0.1);
  for (double c : m.params.gate.bias) EXPECT_EQ(c, 0.0);
  for (const auto& layer : m.params.dense) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in_features()));
    for (double w : layer.weights.values()) EXPECT_LE(std::abs(w), bound);
  }
  EXPECT_EQ(m.params.dense.back().activation, Activation::identity);
  EXPECT_EQ(m.params.dense.front().activation, Activation::relu);
  EXPECT_EQ(hidden_width(10), 45u);
}

TEST(ParameterSet, BlockOrder) {
  const Model m = build_model(Arch::attnd, 3, 4, 0);
  const auto blocks = m.params.blocks();
  ASSERT_EQ(blocks.size(), 8u);
  EXPECT_EQ(blocks[0].family, ParamFamily::alpha);
  EXPECT_EQ(blocks[1].family, ParamFamily::beta);
  EXPECT_EQ(blocks[2].family, ParamFamily::attention);
  EXPECT_EQ(blocks[3].family, ParamFamily::attention);
  for (std::size_t k = 4; k < 8; ++k) EXPECT_EQ(blocks[k].family, ParamFamily::dense);
  EXPECT_EQ(m.params.zeros_like().count(), m.params.count());
}

TEST(Dense, ForwardAndReluGradientAtZero) {
  const DenseLayer layer{Matrix(2, 2, Vector{1.0, -1.0, 2.0, 1.0}), Vector{0.0, -0.5}, Activation::relu};
  const auto f = dense_forward(layer, Vector{0.5, 0.5});
  EXPECT_DOUBLE_EQ(f.outputs[0], 0.0);  // preactivation exactly 0
  EXPECT_DOUBLE_EQ(f.outputs[1], 1.0);
  const auto g = dense_backward(layer, f.cache, Vector{1.0, 1.0});
  EXPECT_EQ(g.d_bias[0], 0.0);
  EXPECT_EQ(g.d_bias[1], 1.0);
  EXPECT_DOUBLE_EQ(g.d_input[0], 2.0);
  EXPECT_DOUBLE_EQ(g.d_input[1], 1.0);
  EXPECT_THROW(dense_forward(layer, Vector{1.0}), UsageError);
}

TEST(Loss, BceWithLogits) {
  EXPECT_DOUBLE_EQ(bce_with_logits(0.0, 1).loss, std::log(2.0));
  EXPECT_DOUBLE_EQ(bce_with_logits(0.0, 0).d_logit, 0.5);
  EXPECT_NEAR(bce_with_logits(2.0, 1).loss, -std::log(sigmoid(2.0)), 1e-15);
  EXPECT_NEAR(bce_with_logits(2.0, 0).loss, -std::log(1.0 - sigmoid(2.0)), 1e-14);
  EXPECT_TRUE(std::isfinite(bce_with_logits(800.0, 0).loss));
  EXPECT_DOUBLE_EQ(bce_with_logits(800.0, 0).loss, 800.0);
  EXPECT_NEAR(bce_with_logits(-800.0, 0).loss, 0.0, 1e-300);
  EXPECT_THROW(bce_with_logits(0.0, 2), UsageError);
}

TEST(ModelForward, UntrainedNdUsesClassicalIndices) {
  Model m = build_model(Arch::nd, 2, 3, 1);
  // Read out pair 1 (bands 0 and 2) directly.
  auto& out = m.params.dense.back();
  std::fill(out.weights.values().begin(), out.weights.values().end(), 0.0);
  out.weights(0, 1) = 1.0;
  out.bias[0] = 0.0;
  const Vector b{0.2, 0.9, 0.6};
  EXPECT_NEAR(model_forward(m, b).logit, (0.2 - 0.6) / (0.2 + 0.6), 1e-7);
}

TEST(ModelForward, AutomaticModeSwitchesOnNegatives) {
  const Model m = build_model(Arch::nd, 3, 4, 2);
  const Vector pos{0.1, 0.2, 0.3, 0.4};
  const Vector neg{0.1, -0.2, 0.3, 0.4};
  EXPECT_EQ(model_forward(m, pos, NdInputMode::automatic).cache.mode, NdInputMode::unsigned_bands);
  EXPECT_EQ(model_forward(m, neg, NdInputMode::automatic).cache.mode, NdInputMode::signed_bands);
  EXPECT_THROW(model_forward(m, neg), ContractViolation);
  EXPECT_NO_THROW(model_forward(m, neg, NdInputMode::softplus_bands));
  EXPECT_THROW(model_forward(m, Vector{0.1, 0.2}), UsageError);
}

TEST(ModelBackward, AllArchitecturesMatchFiniteDifferences) {
  ModelGradcheckOptions opt;
  opt.trials = 5;
  opt.seed = 17;
  for (Arch a : {Arch::nd, Arch::mlp, Arch::attnd}) {
    for (int d : {2, 3, 4}) {
      const auto r = gradcheck_model(a, d, 6, opt);
      EXPECT_TRUE(r.passed()) << r.target << " worst " << r.worst();
      EXPECT_TRUE(r.families.count("input"));
    }
  }
}

TEST(ModelBackward, InputGradientDirectional) {
  const Model m = build_model(Arch::attnd, 3, 5, 4);
  const Vector b{0.3, 0.5, 0.2, 0.7, 0.4};
  const auto fwd = model_forward(m, b);
  const auto g = model_backward(m, fwd.cache, 1.0);
  const Vector dir{0.3, -0.2, 0.5, 0.1, -0.4};
  const double h = 1e-6;
  Vector bp = b, bm = b;
  for (std::size_t k = 0; k < b.size(); ++k) {
    bp[k] += h * dir[k];
    bm[k] -= h * dir[k];
  }
  const double numeric = (model_forward(m, bp).logit - model_forward(m, bm).logit) / (2 * h);
  double analytic = 0;
  for (std::size_t k = 0; k < b.size(); ++k) analytic += g.d_input[k] * dir[k];
  EXPECT_NEAR(analytic, numeric, 1e-8);
}

}  // namespace
}  // namespace ndl

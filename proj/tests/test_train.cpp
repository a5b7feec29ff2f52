// Copyright 2026 The ndl Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ndl/optim.hpp"
#include "ndl/train.hpp"

namespace ndl {
namespace {

TEST(Adam, FirstStepHandComputed) {
  Vector p{1.0, -2.0};
  const Vector g{0.5, -3.0};
  AdamState st;
  AdamConfig cfg;
  cfg.weight_decay = 0.0;
  const std::span<double> ps[] = {p};
  const std::span<const double> gs[] = {g};
  const double decay[] = {0.0};
  adam_update(ps, gs, decay, st, cfg);
  // m_hat = g, v_hat = g^2 after one step.
  EXPECT_NEAR(p[0], 1.0 - 0.01 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_NEAR(p[1], -2.0 + 0.01 * 3.0 / (3.0 + 1e-8), 1e-15);
  EXPECT_EQ(st.step, 1);
}

TEST(Adam, SecondStepHandComputed) {
  Vector p{0.0};
  AdamState st;
  AdamConfig cfg;
  const std::span<double> ps[] = {p};
  const double decay[] = {0.0};
  const Vector g1{1.0}, g2{-2.0};
  const std::span<const double> gs1[] = {g1};
  const std::span<const double> gs2[] = {g2};
  adam_update(ps, gs1, decay, st, cfg);
  const double after1 = p[0];
  adam_update(ps, gs2, decay, st, cfg);
  const double m = 0.9 * 0.1 * 1.0 + 0.1 * -2.0;
  const double v = 0.999 * 0.001 * 1.0 + 0.001 * 4.0;
  const double m_hat = m / (1 - 0.81);
  const double v_hat = v / (1 - 0.999 * 0.999);
  EXPECT_NEAR(p[0], after1 - 0.01 * m_hat / (std::sqrt(v_hat) + 1e-8), 1e-15);
}

TEST(Adam, CoupledDecayEntersGradient) {
  Vector p{2.0};
  const Vector g{0.0};
  AdamState st;
  AdamConfig cfg;
  cfg.weight_decay = 0.1;
  const std::span<double> ps[] = {p};
  const std::span<const double> gs[] = {g};
  const double decay[] = {0.1};
  adam_update(ps, gs, decay, st, cfg);
  // Effective gradient 0.2; first Adam step moves by lr * sign.
  EXPECT_NEAR(p[0], 2.0 - 0.01 * 0.2 / (0.2 + 1e-8), 1e-15);
}

TEST(Adam, DecoupledDecay) {
  Vector p{2.0};
  const Vector g{0.0};
  AdamState st;
  AdamConfig cfg;
  cfg.decoupled_weight_decay = true;
  const std::span<double> ps[] = {p};
  const std::span<const double> gs[] = {g};
  const double decay[] = {0.1};
  adam_update(ps, gs, decay, st, cfg);
  EXPECT_NEAR(p[0], 2.0 - 0.01 * 0.1 * 2.0, 1e-15);
}

TEST(Adam, NdDecayToggle) {
  Model m = build_model(Arch::nd, 2, 3, 0);
  std::fill(m.params.nd.alpha.begin(), m.params.nd.alpha.end(), 1.0);
  const ParameterSet zero = m.params.zeros_like();
  AdamConfig cfg;
  cfg.weight_decay = 0.1;
  {
    ParameterSet p = m.params;
    AdamState st;
    cfg.decay_nd_params = false;
    adam_step(p, zero, st, cfg);
    EXPECT_EQ(p.nd.alpha, m.params.nd.alpha);
  }
  {
    ParameterSet p = m.params;
    AdamState st;
    cfg.decay_nd_params = true;
    adam_step(p, zero, st, cfg);
    EXPECT_LT(p.nd.alpha[0], 1.0);
  }
}

TEST(Adam, ShapeMismatch) {
  const Model a = build_model(Arch::nd, 2, 3, 0);
  const Model b = build_model(Arch::mlp, 2, 3, 0);
  ParameterSet p = a.params;
  AdamState st;
  EXPECT_THROW(adam_step(p, b.params, st, AdamConfig{}), UsageError);
}

Dataset toy(std::size_t n, std::uint64_t seed, double gap) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> gain(0.5, 2.0);
  std::normal_distribution<double> z(0.0, 0.03);
  Dataset ds{{"a", "b", "c"}, {}, {}};
  for (std::size_t r = 0; r < n; ++r) {
    const int y = static_cast<int>(r % 2);
    const double g = gain(rng);
    ds.samples.push_back({g * (0.3 + z(rng)), g * (0.3 + (y ? gap : 0.0) + z(rng)), g * (0.2 + z(rng))});
    ds.labels.push_back(y);
  }
  return ds;
}

TEST(Train, LearnsSeparableProblem) {
  const Dataset tr = toy(200, 1, 0.2), va = toy(60, 2, 0.2);
  TrainConfig cfg;
  cfg.max_epochs = 40;
  cfg.patience = 40;
  cfg.seed = 3;
  const auto r = train(build_model(Arch::nd, 2, 3, 4), tr, va, cfg);
  EXPECT_GE(r.history.best_validation_accuracy, 0.95);
  EXPECT_LT(r.history.epochs.back().train_loss, r.history.epochs.front().train_loss);
}

TEST(Train, RestoresBestEpochParameters) {
  const Dataset tr = toy(120, 5, 0.03), va = toy(80, 6, 0.03);
  TrainConfig cfg;
  cfg.max_epochs = 30;
  cfg.patience = 5;
  cfg.seed = 7;
  const auto r = train(build_model(Arch::mlp, 3, 3, 8), tr, va, cfg);
  double best = 0.0;
  for (const auto& e : r.history.epochs) best = std::max(best, e.validation_accuracy);
  EXPECT_EQ(r.history.best_validation_accuracy, best);
  EXPECT_EQ(accuracy(r.model, va), best);
  EXPECT_EQ(r.history.epochs[static_cast<std::size_t>(r.history.best_epoch - 1)].validation_accuracy, best);
  // The best epoch is the first to reach the maximum.
  for (int e = 1; e < r.history.best_epoch; ++e) {
    EXPECT_LT(r.history.epochs[static_cast<std::size_t>(e - 1)].validation_accuracy, best);
  }
  if (r.history.early_stopped) {
    EXPECT_EQ(r.history.stop_epoch - r.history.best_epoch, cfg.patience);
  }
}

TEST(Train, Deterministic) {
  const Dataset tr = toy(100, 9, 0.1), va = toy(40, 10, 0.1);
  TrainConfig cfg;
  cfg.max_epochs = 10;
  cfg.patience = 10;
  cfg.seed = 11;
  const auto a = train(build_model(Arch::attnd, 2, 3, 12), tr, va, cfg);
  const auto b = train(build_model(Arch::attnd, 2, 3, 12), tr, va, cfg);
  EXPECT_EQ(a.history, b.history);
  EXPECT_EQ(a.model, b.model);
  cfg.seed = 12;
  const auto c = train(build_model(Arch::attnd, 2, 3, 12), tr, va, cfg);
  EXPECT_NE(a.history.epochs.back().train_loss, c.history.epochs.back().train_loss);
}

TEST(Train, ConfigValidation) {
  const Dataset tr = toy(10, 1, 0.1);
  const Model m = build_model(Arch::nd, 2, 3, 0);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  EXPECT_THROW(train(m, tr, tr, cfg), UsageError);
  cfg = {};
  cfg.batch_size = 0;
  EXPECT_THROW(train(m, tr, tr, cfg), UsageError);
  cfg = {};
  cfg.patience = 200;
  EXPECT_THROW(train(m, tr, tr, cfg), UsageError);
  cfg = {};
  EXPECT_THROW(train(m, tr, Dataset{tr.band_names, {}, {}}, cfg), UsageError);
  EXPECT_THROW(train(build_model(Arch::nd, 2, 4, 0), tr, tr, cfg), UsageError);
}

}  // namespace
}  // namespace ndl

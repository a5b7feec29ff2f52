// Copyright 2026 The ndl Authors.
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "ndl/checkpoint.hpp"
#include "ndl/eval.hpp"

namespace ndl {
namespace {

Model perturbed(Arch a, int depth, std::uint64_t seed) {
  Model m = build_model(a, depth, 5, seed, EpsilonConfig{1e-6}, {"u", "v", "w", "x", "y"});
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  for (auto& b : m.params.blocks()) {
    for (double& x : b.values) x += z(rng) / 3.0;
  }
  return m;
}

TEST(Checkpoint, RoundTripIsBitIdentical) {
  const auto dir = std::filesystem::temp_directory_path() / "ndl_ckpt_test";
  std::filesystem::create_directories(dir);
  for (Arch a : {Arch::nd, Arch::mlp, Arch::attnd}) {
    for (int d : {2, 3, 4}) {
      const Model m = perturbed(a, d, 31 + static_cast<std::uint64_t>(d));
      EXPECT_EQ(checkpoint_from_json(checkpoint_to_json(m)), m);
      const auto path = dir / "m.json";
      save_checkpoint(m, path, {{"fold", 3}});
      const Model back = load_checkpoint(path);
      EXPECT_EQ(back, m);
      if (m.has_nd_layer()) {
        EXPECT_EQ(coeff_ratios(back).ratios, coeff_ratios(m).ratios);
      }
      const Vector b{0.1, 0.4, 0.2, 0.3, 0.5};
      EXPECT_EQ(model_forward(back, b).logit, model_forward(m, b).logit);
    }
  }
  std::filesystem::remove_all(dir);
}

TEST(Checkpoint, RejectsMalformed) {
  auto j = checkpoint_to_json(build_model(Arch::nd, 2, 3, 0));
  auto bad = j;
  bad["format"] = "other";
  EXPECT_THROW(checkpoint_from_json(bad), CheckpointError);
  bad = j;
  bad["version"] = 99;
  EXPECT_THROW(checkpoint_from_json(bad), CheckpointError);
  bad = j;
  bad["arch"] = "cnn";
  EXPECT_THROW(checkpoint_from_json(bad), CheckpointError);
  bad = j;
  bad["nd"]["alpha"] = {1.0};
  EXPECT_THROW(checkpoint_from_json(bad), CheckpointError);
  bad = j;
  bad["dense"][0]["weights"] = {1.0};
  EXPECT_THROW(checkpoint_from_json(bad), CheckpointError);
  bad = j;
  bad.erase("dense");
  EXPECT_THROW(checkpoint_from_json(bad), CheckpointError);
  EXPECT_THROW(load_checkpoint("/nonexistent/ckpt.json"), CheckpointError);
}

}  // namespace
}  // namespace ndl

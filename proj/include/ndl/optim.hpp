// Copyright 2026 The ndl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ndl/math.hpp"
#include "ndl/network.hpp"

namespace ndl {

struct AdamConfig {
  double learning_rate = 0.01;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Coupled L2 (grad += wd * p) by default; true gives decoupled AdamW decay.
  bool decoupled_weight_decay = false;
  // Whether alpha/beta of the ND layer are decayed along with everything else.
  bool decay_nd_params = true;
};

struct AdamState {
  std::vector<Vector> m;
  std::vector<Vector> v;
  std::int64_t step = 0;
};

/// One Adam update over parallel lists of parameter and gradient blocks.
/// `decay[k]` is the weight-decay coefficient applied to block k.
inline void adam_update(std::span<const std::span<double>> params,
                        std::span<const std::span<const double>> grads,
                        std::span<const double> decay, AdamState& state, const AdamConfig& cfg) {
  if (params.size() != grads.size() || params.size() != decay.size()) {
    throw UsageError("adam_update: parameter/gradient block counts differ");
  }
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw UsageError("adam_update: state shape mismatch");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].size() != grads[k].size() || state.m[k].size() != params[k].size()) {
      throw UsageError("adam_update: block " + std::to_string(k) + " shape mismatch");
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);

  for (std::size_t k = 0; k < params.size(); ++k) {
    const double wd = decay[k];
    Vector& m = state.m[k];
    Vector& v = state.v[k];
    for (std::size_t e = 0; e < params[k].size(); ++e) {
      double& p = params[k][e];
      double g = grads[k][e];
      if (!cfg.decoupled_weight_decay) g += wd * p;
      m[e] = cfg.beta1 * m[e] + (1.0 - cfg.beta1) * g;
      v[e] = cfg.beta2 * v[e] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m[e] / correction1;
      const double v_hat = v[e] / correction2;
      if (cfg.decoupled_weight_decay) p -= cfg.learning_rate * wd * p;
      p -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

/// Adam step on a whole parameter set; `grads` must mirror `params`.
inline void adam_step(ParameterSet& params, const ParameterSet& grads, AdamState& state,
                      const AdamConfig& cfg) {
  auto p_blocks = params.blocks();
  auto g_blocks = grads.blocks();
  if (p_blocks.size() != g_blocks.size()) throw UsageError("adam_step: gradient layout mismatch");
  std::vector<std::span<double>> ps;
  std::vector<std::span<const double>> gs;
  Vector decay;
  for (std::size_t k = 0; k < p_blocks.size(); ++k) {
    if (p_blocks[k].family != g_blocks[k].family) throw UsageError("adam_step: gradient layout mismatch");
    ps.push_back(p_blocks[k].values);
    gs.push_back(g_blocks[k].values);
    const bool nd = p_blocks[k].family == ParamFamily::alpha || p_blocks[k].family == ParamFamily::beta;
    decay.push_back(nd && !cfg.decay_nd_params ? 0.0 : cfg.weight_decay);
  }
  adam_update(ps, gs, decay, state, cfg);
}

}  // namespace ndl

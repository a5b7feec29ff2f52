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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "ndl/data.hpp"
#include "ndl/metrics.hpp"
#include "ndl/network.hpp"
#include "ndl/optim.hpp"

namespace ndl {

struct TrainConfig {
  double learning_rate = 0.01;
  double weight_decay = 1e-4;
  std::size_t batch_size = 32;
  int max_epochs = 150;
  int patience = 25;
  std::uint64_t seed = 0;
  double eps = 1e-8;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  bool decoupled_weight_decay = false;
  bool decay_nd_params = true;

  void validate() const {
    if (!(learning_rate > 0.0)) throw UsageError("train config: learning rate must be positive");
    if (!(weight_decay >= 0.0)) throw UsageError("train config: weight decay must be >= 0");
    if (batch_size == 0) throw UsageError("train config: batch size must be positive");
    if (max_epochs <= 0) throw UsageError("train config: max epochs must be positive");
    if (patience <= 0 || patience > max_epochs) {
      throw UsageError("train config: patience must be in [1, max epochs]");
    }
    EpsilonConfig{eps}.validate();
  }

  AdamConfig adam() const {
    return AdamConfig{learning_rate, weight_decay,           adam_beta1,     adam_beta2,
                      adam_epsilon,  decoupled_weight_decay, decay_nd_params};
  }
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double validation_accuracy = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  int stop_epoch = 0;
  double best_validation_accuracy = 0.0;
  bool early_stopped = false;

  friend bool operator==(const TrainHistory&, const TrainHistory&) = default;
};

struct TrainResult {
  Model model;  // parameters from the best epoch
  TrainHistory history;
};

/// Mini-batch Adam on mean BCE with early stopping on validation accuracy.
///
/// The training order is reshuffled every epoch from an RNG seeded once with
/// `config.seed`; the last short batch is kept. A new best requires strictly
/// higher validation accuracy, and training stops once `patience` epochs pass
/// without one. The returned model holds the best epoch's parameters.
inline TrainResult train(Model model, const Dataset& train_set, const Dataset& validation_set,
                         const TrainConfig& config) {
  config.validate();
  if (train_set.empty()) throw UsageError("train: training set is empty");
  if (validation_set.empty()) throw UsageError("train: validation set is empty");
  check_compatible(model, train_set, "train");
  check_compatible(model, validation_set, "train");

  const AdamConfig adam = config.adam();
  AdamState state;
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result{model, {}};
  int since_best = 0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      ParameterSet grads = model.params.zeros_like();
      auto grad_blocks = grads.blocks();
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t idx = order[k];
        const ModelForward fwd = model_forward(model, train_set.samples[idx]);
        const LossAndGrad lg = bce_with_logits(fwd.logit, train_set.labels[idx]);
        loss_sum += lg.loss;
        const ModelGradients g = model_backward(model, fwd.cache, lg.d_logit * scale);
        const auto sample_blocks = g.params.blocks();
        for (std::size_t b = 0; b < grad_blocks.size(); ++b) {
          for (std::size_t e = 0; e < grad_blocks[b].values.size(); ++e) {
            grad_blocks[b].values[e] += sample_blocks[b].values[e];
          }
        }
      }
      adam_step(model.params, grads, state, adam);
    }

    const DatasetScore val = score(model, validation_set);
    result.history.epochs.push_back(
        {epoch, loss_sum / static_cast<double>(order.size()), val.loss, val.accuracy});
    result.history.stop_epoch = epoch;
    if (result.history.best_epoch == 0 || val.accuracy > result.history.best_validation_accuracy) {
      result.history.best_epoch = epoch;
      result.history.best_validation_accuracy = val.accuracy;
      result.model = model;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      result.history.early_stopped = true;
      break;
    }
  }
  return result;
}

}  // namespace ndl

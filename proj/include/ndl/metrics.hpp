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

#include <cstddef>
#include <string>

#include "ndl/data.hpp"
#include "ndl/network.hpp"

namespace ndl {

/// Class 1 iff sigmoid(logit) > 0.5, i.e. logit > 0. A tie predicts class 0.
inline int predict_label(double logit) noexcept { return logit > 0.0 ? 1 : 0; }

inline void check_compatible(const Model& m, const Dataset& ds, const char* who) {
  if (ds.n_bands() != m.n_bands) {
    throw UsageError(std::string(who) + ": dataset has " + std::to_string(ds.n_bands()) +
                     " bands, model expects " + std::to_string(m.n_bands));
  }
}

struct DatasetScore {
  double loss = 0.0;      // mean BCE
  double accuracy = 0.0;  // fraction in [0, 1]
};

/// Mean loss and accuracy. Samples with negative values go through the
/// signed ND variant.
inline DatasetScore score(const Model& m, const Dataset& ds) {
  if (ds.empty()) throw UsageError("score: dataset is empty");
  check_compatible(m, ds, "score");
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t r = 0; r < ds.size(); ++r) {
    const double logit = model_forward(m, ds.samples[r], NdInputMode::automatic).logit;
    loss += bce_with_logits(logit, ds.labels[r]).loss;
    if (predict_label(logit) == ds.labels[r]) ++correct;
  }
  const double n = static_cast<double>(ds.size());
  return {loss / n, static_cast<double>(correct) / n};
}

inline double accuracy(const Model& m, const Dataset& ds) { return score(m, ds).accuracy; }

}  // namespace ndl

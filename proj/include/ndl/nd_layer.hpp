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

// Normalized difference layer.
//
// For every band pair (i, j), i < j, the layer computes
//
//     N_ij = (sa * b_i - sb * b_j) / (sa * b_i + sb * b_j + eps),
//     sa = softplus(alpha_ij),  sb = softplus(beta_ij).
//
// Pairs are laid out in lexicographic order, so a layer over n bands has
// n(n-1)/2 outputs. Two variants accept signed inputs: one replaces |b| in
// the denominator with sqrt(b^2 + eps), the other feeds softplus(b) through
// the unsigned layer.

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ndl/math.hpp"

namespace ndl {

/// Raised when the unsigned layer sees a negative band value.
class ContractViolation : public UsageError {
 public:
  using UsageError::UsageError;
};

struct EpsilonConfig {
  double eps = 1e-8;

  void validate() const {
    if (!(eps > 0.0) || !std::isfinite(eps)) {
      throw UsageError("epsilon must be a positive finite number");
    }
  }

  friend bool operator==(const EpsilonConfig&, const EpsilonConfig&) = default;
};

constexpr std::size_t pair_count(std::size_t n_bands) noexcept {
  return n_bands < 2 ? 0 : n_bands * (n_bands - 1) / 2;
}

/// Lexicographic rank of (i, j) among all pairs i < j of n bands.
inline std::size_t pair_index(std::size_t i, std::size_t j, std::size_t n) {
  if (i >= j || j >= n) {
    throw UsageError("pair_index: need i < j < n, got (" + std::to_string(i) + ", " +
                     std::to_string(j) + ", " + std::to_string(n) + ")");
  }
  return i * n - i * (i + 1) / 2 + (j - i - 1);
}

struct BandPair {
  std::size_t i = 0;
  std::size_t j = 0;
  friend bool operator==(const BandPair&, const BandPair&) = default;
};

/// Enumerates band pairs in output order.
class PairIndexer {
 public:
  explicit PairIndexer(std::size_t n_bands) : n_bands_(n_bands) {
    if (n_bands < 2) throw UsageError("PairIndexer: need at least 2 bands");
    pairs_.reserve(pair_count(n_bands));
    for (std::size_t i = 0; i < n_bands; ++i) {
      for (std::size_t j = i + 1; j < n_bands; ++j) pairs_.push_back({i, j});
    }
  }

  std::size_t n_bands() const noexcept { return n_bands_; }
  std::size_t size() const noexcept { return pairs_.size(); }
  const std::vector<BandPair>& pairs() const noexcept { return pairs_; }
  const BandPair& operator[](std::size_t p) const { return pairs_.at(p); }
  std::size_t index_of(std::size_t i, std::size_t j) const { return pair_index(i, j, n_bands_); }

 private:
  std::size_t n_bands_;
  std::vector<BandPair> pairs_;
};

/// Learnable coupling coefficients, one (alpha, beta) per pair.
struct NdParams {
  std::size_t n_bands = 0;
  Vector alpha;
  Vector beta;

  /// alpha = beta = 0 reproduces the classical normalized difference.
  static NdParams zeros(std::size_t n_bands) {
    if (n_bands < 2) throw UsageError("NdParams: need at least 2 bands");
    const std::size_t p = pair_count(n_bands);
    return NdParams{n_bands, Vector(p, 0.0), Vector(p, 0.0)};
  }

  std::size_t size() const noexcept { return alpha.size(); }

  void validate() const {
    const std::size_t p = pair_count(n_bands);
    if (alpha.size() != p || beta.size() != p) {
      throw UsageError("NdParams: expected " + std::to_string(p) + " coefficients per side for " +
                       std::to_string(n_bands) + " bands");
    }
    if (!all_finite(alpha) || !all_finite(beta)) {
      throw UsageError("NdParams: coefficients must be finite");
    }
  }

  friend bool operator==(const NdParams&, const NdParams&) = default;
};

struct NdPairCache {
  double sigma_alpha = 0.0;
  double sigma_beta = 0.0;
  double b_i = 0.0;
  double b_j = 0.0;
  double denom = 0.0;  // sa * b_i + sb * b_j + eps
};

struct NdCache {
  std::size_t n_bands = 0;
  std::vector<NdPairCache> pairs;
};

struct NdGradients {
  Vector d_alpha;
  Vector d_beta;
  Vector d_input;
};

template <typename Cache>
struct LayerOutput {
  Vector outputs;
  Cache cache;
};

namespace detail {

inline void check_bands(std::span<const double> bands, const NdParams& params, const char* who) {
  params.validate();
  if (bands.size() != params.n_bands) {
    throw UsageError(std::string(who) + ": got " + std::to_string(bands.size()) +
                     " bands, parameters expect " + std::to_string(params.n_bands));
  }
  for (std::size_t k = 0; k < bands.size(); ++k) {
    if (std::isnan(bands[k]) || std::isinf(bands[k])) {
      throw UsageError(std::string(who) + ": band " + std::to_string(k) + " is not finite");
    }
  }
}

inline void check_upstream(std::size_t pairs, std::span<const double> upstream,
                           const NdParams& params, const char* who) {
  if (upstream.size() != pairs || params.size() != pairs) {
    throw UsageError(std::string(who) + ": cache has " + std::to_string(pairs) +
                     " pairs, upstream has " + std::to_string(upstream.size()) +
                     ", parameters have " + std::to_string(params.size()));
  }
}

}  // namespace detail

inline LayerOutput<NdCache> nd_forward(std::span<const double> bands, const NdParams& params,
                                       const EpsilonConfig& eps) {
  eps.validate();
  detail::check_bands(bands, params, "nd_forward");
  for (std::size_t k = 0; k < bands.size(); ++k) {
    if (bands[k] < 0.0) {
      throw ContractViolation("nd_forward: band " + std::to_string(k) +
                              " is negative; use a signed variant for signed inputs");
    }
  }

  const std::size_t n = params.n_bands;
  LayerOutput<NdCache> result;
  result.outputs.reserve(params.size());
  result.cache.n_bands = n;
  result.cache.pairs.reserve(params.size());

  std::size_t p = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j, ++p) {
      const double sa = softplus(params.alpha[p]);
      const double sb = softplus(params.beta[p]);
      const double numer = sa * bands[i] - sb * bands[j];
      const double denom = sa * bands[i] + sb * bands[j] + eps.eps;
      result.outputs.push_back(numer / denom);
      result.cache.pairs.push_back({sa, sb, bands[i], bands[j], denom});
    }
  }
  return result;
}

inline NdGradients nd_backward(const NdCache& cache, std::span<const double> upstream,
                               const NdParams& params, const EpsilonConfig& eps) {
  detail::check_upstream(cache.pairs.size(), upstream, params, "nd_backward");
  const double e = eps.eps;
  const std::size_t n = cache.n_bands;

  NdGradients g{Vector(cache.pairs.size(), 0.0), Vector(cache.pairs.size(), 0.0),
                Vector(n, 0.0)};
  std::size_t p = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j, ++p) {
      const NdPairCache& c = cache.pairs[p];
      const double delta = upstream[p];
      const double s_alpha = sigmoid(params.alpha[p]);
      const double s_beta = sigmoid(params.beta[p]);
      const double denom_sq = c.denom * c.denom;
      const double b_minus_a = 2.0 * c.sigma_beta * c.b_j + e;   // B - A
      const double b_plus_a = 2.0 * c.sigma_alpha * c.b_i + e;   // B + A

      g.d_alpha[p] = delta * (s_alpha * c.b_i * b_minus_a / denom_sq);
      g.d_beta[p] = delta * (-s_beta * c.b_j * b_plus_a / denom_sq);
      g.d_input[i] += delta * (c.sigma_alpha * b_minus_a / denom_sq);
      g.d_input[j] += delta * (-c.sigma_beta * b_plus_a / denom_sq);
    }
  }
  return g;
}

// Signed inputs: |b| in the denominator becomes sqrt(b^2 + eps).

struct SignedPairCache {
  double sigma_alpha = 0.0;
  double sigma_beta = 0.0;
  double b_i = 0.0;
  double b_j = 0.0;
  double root_i = 0.0;  // sqrt(b_i^2 + eps)
  double root_j = 0.0;
  double numer = 0.0;
  double denom = 0.0;
};

struct SignedNdCache {
  std::size_t n_bands = 0;
  std::vector<SignedPairCache> pairs;
};

inline LayerOutput<SignedNdCache> nd_forward_signed(std::span<const double> bands,
                                                    const NdParams& params,
                                                    const EpsilonConfig& eps) {
  eps.validate();
  detail::check_bands(bands, params, "nd_forward_signed");
  const std::size_t n = params.n_bands;
  const double e = eps.eps;

  Vector roots(n);
  for (std::size_t k = 0; k < n; ++k) roots[k] = std::sqrt(bands[k] * bands[k] + e);

  LayerOutput<SignedNdCache> result;
  result.outputs.reserve(params.size());
  result.cache.n_bands = n;
  result.cache.pairs.reserve(params.size());

  std::size_t p = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j, ++p) {
      const double sa = softplus(params.alpha[p]);
      const double sb = softplus(params.beta[p]);
      const double numer = sa * bands[i] - sb * bands[j];
      const double denom = sa * roots[i] + sb * roots[j] + e;
      result.outputs.push_back(numer / denom);
      result.cache.pairs.push_back({sa, sb, bands[i], bands[j], roots[i], roots[j], numer, denom});
    }
  }
  return result;
}

inline NdGradients nd_backward_signed(const SignedNdCache& cache, std::span<const double> upstream,
                                      const NdParams& params, const EpsilonConfig& eps) {
  eps.validate();
  detail::check_upstream(cache.pairs.size(), upstream, params, "nd_backward_signed");
  const std::size_t n = cache.n_bands;

  NdGradients g{Vector(cache.pairs.size(), 0.0), Vector(cache.pairs.size(), 0.0),
                Vector(n, 0.0)};
  std::size_t p = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j, ++p) {
      const SignedPairCache& c = cache.pairs[p];
      const double delta = upstream[p];
      const double s_alpha = sigmoid(params.alpha[p]);
      const double s_beta = sigmoid(params.beta[p]);
      const double d = c.denom;
      const double d_sq = d * d;
      // dN/dx = (D * dA/dx - A * dD/dx) / D^2
      g.d_alpha[p] = delta * (s_alpha * (c.b_i * d - c.numer * c.root_i) / d_sq);
      g.d_beta[p] = delta * (-s_beta * (c.b_j * d + c.numer * c.root_j) / d_sq);
      g.d_input[i] += delta * (c.sigma_alpha * (d - c.numer * c.b_i / c.root_i) / d_sq);
      g.d_input[j] += delta * (-c.sigma_beta * (d + c.numer * c.b_j / c.root_j) / d_sq);
    }
  }
  return g;
}

// Softplus-preactivated inputs: the unsigned layer applied to softplus(b).

struct SoftplusInputCache {
  Vector raw_bands;
  NdCache inner;
};

inline LayerOutput<SoftplusInputCache> nd_forward_softplus_inputs(std::span<const double> bands,
                                                                  const NdParams& params,
                                                                  const EpsilonConfig& eps) {
  detail::check_bands(bands, params, "nd_forward_softplus_inputs");
  Vector lifted(bands.size());
  for (std::size_t k = 0; k < bands.size(); ++k) lifted[k] = softplus(bands[k]);
  auto inner = nd_forward(lifted, params, eps);
  return {std::move(inner.outputs),
          SoftplusInputCache{Vector(bands.begin(), bands.end()), std::move(inner.cache)}};
}

inline NdGradients nd_backward_softplus_inputs(const SoftplusInputCache& cache,
                                               std::span<const double> upstream,
                                               const NdParams& params, const EpsilonConfig& eps) {
  NdGradients g = nd_backward(cache.inner, upstream, params, eps);
  for (std::size_t k = 0; k < g.d_input.size(); ++k) g.d_input[k] *= sigmoid(cache.raw_bands[k]);
  return g;
}

// Attention gate: outputs = sigmoid(W b + c) (elementwise *) nd_outputs.

struct AttentionGate {
  Matrix weights;  // pair_count x n_bands
  Vector bias;     // pair_count

  friend bool operator==(const AttentionGate&, const AttentionGate&) = default;
};

struct AttentionCache {
  Vector bands;
  Vector gates;
  Vector nd_outputs;
};

struct AttentionGradients {
  Matrix d_weights;
  Vector d_bias;
  Vector d_bands;
  Vector d_nd_outputs;
};

inline LayerOutput<AttentionCache> attention_gate(std::span<const double> bands,
                                                  const AttentionGate& gate,
                                                  std::span<const double> nd_outputs) {
  if (gate.weights.cols() != bands.size() || gate.weights.rows() != nd_outputs.size() ||
      gate.bias.size() != nd_outputs.size()) {
    throw UsageError("attention_gate: gate is " + std::to_string(gate.weights.rows()) + "x" +
                     std::to_string(gate.weights.cols()) + " with " +
                     std::to_string(gate.bias.size()) + " biases, inputs have " +
                     std::to_string(bands.size()) + " bands and " +
                     std::to_string(nd_outputs.size()) + " pair outputs");
  }
  Vector gates = matvec(gate.weights, bands);
  Vector out(nd_outputs.size());
  for (std::size_t p = 0; p < gates.size(); ++p) {
    gates[p] = sigmoid(gates[p] + gate.bias[p]);
    out[p] = gates[p] * nd_outputs[p];
  }
  return {std::move(out),
          AttentionCache{Vector(bands.begin(), bands.end()), std::move(gates),
                         Vector(nd_outputs.begin(), nd_outputs.end())}};
}

inline AttentionGradients attention_gate_backward(const AttentionCache& cache,
                                                  const AttentionGate& gate,
                                                  std::span<const double> upstream) {
  if (upstream.size() != cache.gates.size()) {
    throw UsageError("attention_gate_backward: upstream has " + std::to_string(upstream.size()) +
                     " entries, gate has " + std::to_string(cache.gates.size()));
  }
  const std::size_t pairs = cache.gates.size();
  const std::size_t n = cache.bands.size();
  AttentionGradients g{Matrix(pairs, n), Vector(pairs, 0.0), Vector(n, 0.0), Vector(pairs, 0.0)};
  Vector d_pre(pairs);
  for (std::size_t p = 0; p < pairs; ++p) {
    const double q = cache.gates[p];
    g.d_nd_outputs[p] = upstream[p] * q;
    d_pre[p] = upstream[p] * cache.nd_outputs[p] * q * (1.0 - q);
    g.d_bias[p] = d_pre[p];
    for (std::size_t k = 0; k < n; ++k) g.d_weights(p, k) = d_pre[p] * cache.bands[k];
  }
  g.d_bands = matvec_transposed(gate.weights, d_pre);
  return g;
}

}  // namespace ndl

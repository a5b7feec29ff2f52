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
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "ndl/math.hpp"
#include "ndl/nd_layer.hpp"

namespace ndl {

enum class Activation { relu, identity };

inline std::string_view to_string(Activation a) {
  return a == Activation::relu ? "relu" : "identity";
}

inline Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "identity") return Activation::identity;
  throw UsageError("unknown activation '" + std::string(s) + "'");
}

struct DenseLayer {
  Matrix weights;  // out x in
  Vector bias;     // out
  Activation activation = Activation::identity;

  std::size_t in_features() const noexcept { return weights.cols(); }
  std::size_t out_features() const noexcept { return weights.rows(); }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct DenseCache {
  Vector input;
  Vector preactivation;
};

struct DenseGradients {
  Matrix d_weights;
  Vector d_bias;
  Vector d_input;
};

inline LayerOutput<DenseCache> dense_forward(const DenseLayer& layer,
                                             std::span<const double> input) {
  if (layer.bias.size() != layer.weights.rows()) {
    throw UsageError("dense_forward: bias length does not match weight rows");
  }
  if (input.size() != layer.weights.cols()) {
    throw UsageError("dense_forward: layer expects " + std::to_string(layer.weights.cols()) +
                     " inputs, got " + std::to_string(input.size()));
  }
  Vector pre = matvec(layer.weights, input);
  for (std::size_t r = 0; r < pre.size(); ++r) pre[r] += layer.bias[r];
  Vector out = pre;
  if (layer.activation == Activation::relu) {
    for (double& x : out) x = x > 0.0 ? x : 0.0;
  }
  return {std::move(out), DenseCache{Vector(input.begin(), input.end()), std::move(pre)}};
}

// ReLU subgradient at exactly zero is taken as zero.
inline DenseGradients dense_backward(const DenseLayer& layer, const DenseCache& cache,
                                     std::span<const double> upstream) {
  if (upstream.size() != layer.weights.rows() || cache.preactivation.size() != upstream.size() ||
      cache.input.size() != layer.weights.cols()) {
    throw UsageError("dense_backward: cache/upstream shape does not match layer");
  }
  const std::size_t out = layer.weights.rows();
  const std::size_t in = layer.weights.cols();
  DenseGradients g{Matrix(out, in), Vector(out, 0.0), Vector()};
  for (std::size_t r = 0; r < out; ++r) {
    double d = upstream[r];
    if (layer.activation == Activation::relu && !(cache.preactivation[r] > 0.0)) d = 0.0;
    g.d_bias[r] = d;
    for (std::size_t c = 0; c < in; ++c) g.d_weights(r, c) = d * cache.input[c];
  }
  g.d_input = matvec_transposed(layer.weights, g.d_bias);
  return g;
}

struct LossAndGrad {
  double loss = 0.0;
  double d_logit = 0.0;
};

/// Binary cross-entropy on a logit: softplus(z) - y z, gradient sigmoid(z) - y.
inline LossAndGrad bce_with_logits(double logit, int label) {
  if (label != 0 && label != 1) throw UsageError("bce_with_logits: label must be 0 or 1");
  return {softplus(logit) - static_cast<double>(label) * logit,
          sigmoid(logit) - static_cast<double>(label)};
}

enum class Arch { nd, mlp, attnd };

inline std::string_view to_string(Arch a) {
  switch (a) {
    case Arch::nd: return "nd";
    case Arch::mlp: return "mlp";
    case Arch::attnd: return "attnd";
  }
  return "?";
}

inline Arch parse_arch(std::string_view s) {
  if (s == "nd") return Arch::nd;
  if (s == "mlp") return Arch::mlp;
  if (s == "attnd") return Arch::attnd;
  throw UsageError("unknown architecture '" + std::string(s) + "' (expected nd, mlp or attnd)");
}

/// Gradient families, also used to label parameter blocks.
enum class ParamFamily { alpha, beta, attention, dense };

inline std::string_view to_string(ParamFamily f) {
  switch (f) {
    case ParamFamily::alpha: return "alpha";
    case ParamFamily::beta: return "beta";
    case ParamFamily::attention: return "attention";
    case ParamFamily::dense: return "dense";
  }
  return "?";
}

template <typename T>
struct ParamBlock {
  ParamFamily family;
  std::span<T> values;
};

/// Every learnable array of a model, in declared order:
/// alpha, beta, attention weights, attention bias, then each dense layer's
/// weights and bias. Also used as the container for gradients.
struct ParameterSet {
  NdParams nd;
  AttentionGate gate;
  std::vector<DenseLayer> dense;

  std::vector<ParamBlock<double>> blocks() { return collect_blocks(*this); }
  std::vector<ParamBlock<const double>> blocks() const { return collect_blocks(*this); }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& b : blocks()) n += b.values.size();
    return n;
  }

  ParameterSet zeros_like() const {
    ParameterSet z = *this;
    for (auto& b : z.blocks()) std::fill(b.values.begin(), b.values.end(), 0.0);
    return z;
  }

  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;

 private:
  template <typename Self, typename T = std::conditional_t<std::is_const_v<Self>, const double, double>>
  static std::vector<ParamBlock<T>> collect_blocks(Self& self) {
    std::vector<ParamBlock<T>> out;
    if (!self.nd.alpha.empty()) {
      out.push_back({ParamFamily::alpha, std::span<T>(self.nd.alpha)});
      out.push_back({ParamFamily::beta, std::span<T>(self.nd.beta)});
    }
    if (!self.gate.weights.empty()) {
      out.push_back({ParamFamily::attention, self.gate.weights.values()});
      out.push_back({ParamFamily::attention, std::span<T>(self.gate.bias)});
    }
    for (auto& layer : self.dense) {
      out.push_back({ParamFamily::dense, layer.weights.values()});
      out.push_back({ParamFamily::dense, std::span<T>(layer.bias)});
    }
    return out;
  }
};

/// How the first ND layer treats its inputs for one forward pass.
enum class NdInputMode {
  unsigned_bands,  // plain layer; negative inputs are rejected
  signed_bands,    // sqrt(b^2 + eps) denominator
  softplus_bands,  // softplus applied to inputs first
  automatic,       // unsigned when all inputs are >= 0, signed otherwise
};

struct Model {
  Arch arch = Arch::nd;
  int depth = 2;  // total layers, counting input and output
  std::size_t n_bands = 0;
  EpsilonConfig eps;
  std::vector<std::string> band_names;
  ParameterSet params;

  bool has_nd_layer() const noexcept { return arch != Arch::mlp; }
  bool has_attention() const noexcept { return arch == Arch::attnd; }

  friend bool operator==(const Model&, const Model&) = default;
};

inline std::vector<std::string> default_band_names(std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t k = 0; k < n; ++k) names.push_back("band_" + std::to_string(k + 1));
  return names;
}

/// Width of every hidden layer: the pair count of the ND layer (45 for 10 bands).
inline std::size_t hidden_width(std::size_t n_bands) { return pair_count(n_bands); }

/// Builds ND, MLP or AttND at depth 2..4.
///
/// Depth 2 is input -> first layer -> Linear(1); each extra level inserts one
/// ReLU dense layer of the same width. The first layer is the ND layer (gated
/// for AttND) or a ReLU dense layer for MLP. Dense weights are uniform in
/// +-1/sqrt(fan_in), biases likewise; ND coefficients start at zero and the
/// attention gate at W in [-0.1, 0.1], c = 0.
inline Model build_model(Arch arch, int depth, std::size_t n_bands, std::uint64_t seed,
                         EpsilonConfig eps = {}, std::vector<std::string> band_names = {}) {
  if (depth < 2 || depth > 4) {
    throw UsageError("build_model: unsupported depth " + std::to_string(depth) +
                     " (expected 2, 3 or 4)");
  }
  if (n_bands < 2) throw UsageError("build_model: need at least 2 bands");
  eps.validate();
  if (band_names.empty()) band_names = default_band_names(n_bands);
  if (band_names.size() != n_bands) throw UsageError("build_model: band name count mismatch");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  auto make_dense = [&](std::size_t in, std::size_t out, Activation act) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    DenseLayer layer{Matrix(out, in), Vector(out), act};
    for (double& w : layer.weights.values()) w = bound * unit(rng);
    for (double& b : layer.bias) b = bound * unit(rng);
    return layer;
  };

  Model m;
  m.arch = arch;
  m.depth = depth;
  m.n_bands = n_bands;
  m.eps = eps;
  m.band_names = std::move(band_names);

  const std::size_t width = hidden_width(n_bands);
  if (arch == Arch::mlp) {
    m.params.dense.push_back(make_dense(n_bands, width, Activation::relu));
  } else {
    m.params.nd = NdParams::zeros(n_bands);
    if (arch == Arch::attnd) {
      m.params.gate.weights = Matrix(width, n_bands);
      for (double& w : m.params.gate.weights.values()) w = 0.1 * unit(rng);
      m.params.gate.bias = Vector(width, 0.0);
    }
  }
  for (int extra = 0; extra < depth - 2; ++extra) {
    m.params.dense.push_back(make_dense(width, width, Activation::relu));
  }
  m.params.dense.push_back(make_dense(width, 1, Activation::identity));
  return m;
}

inline std::size_t count_params(const Model& m) { return m.params.count(); }

struct ModelCache {
  Vector input;
  NdInputMode mode = NdInputMode::unsigned_bands;
  std::variant<std::monostate, NdCache, SignedNdCache, SoftplusInputCache> nd;
  AttentionCache gate;
  std::vector<DenseCache> dense;
  double logit = 0.0;
};

struct ModelForward {
  double logit = 0.0;
  ModelCache cache;
};

struct ModelGradients {
  ParameterSet params;
  Vector d_input;
};

inline NdInputMode resolve_mode(NdInputMode mode, std::span<const double> bands) {
  if (mode != NdInputMode::automatic) return mode;
  const bool any_negative = std::any_of(bands.begin(), bands.end(), [](double b) { return b < 0.0; });
  return any_negative ? NdInputMode::signed_bands : NdInputMode::unsigned_bands;
}

inline ModelForward model_forward(const Model& m, std::span<const double> bands,
                                  NdInputMode mode = NdInputMode::unsigned_bands) {
  if (bands.size() != m.n_bands) {
    throw UsageError("model_forward: model expects " + std::to_string(m.n_bands) +
                     " bands, got " + std::to_string(bands.size()));
  }
  ModelForward fwd;
  ModelCache& cache = fwd.cache;
  cache.input.assign(bands.begin(), bands.end());

  Vector h;
  if (m.has_nd_layer()) {
    cache.mode = resolve_mode(mode, bands);
    switch (cache.mode) {
      case NdInputMode::signed_bands: {
        auto r = nd_forward_signed(bands, m.params.nd, m.eps);
        h = std::move(r.outputs);
        cache.nd = std::move(r.cache);
        break;
      }
      case NdInputMode::softplus_bands: {
        auto r = nd_forward_softplus_inputs(bands, m.params.nd, m.eps);
        h = std::move(r.outputs);
        cache.nd = std::move(r.cache);
        break;
      }
      default: {
        auto r = nd_forward(bands, m.params.nd, m.eps);
        h = std::move(r.outputs);
        cache.nd = std::move(r.cache);
        break;
      }
    }
    if (m.has_attention()) {
      auto r = attention_gate(bands, m.params.gate, h);
      h = std::move(r.outputs);
      cache.gate = std::move(r.cache);
    }
  } else {
    h = cache.input;
  }

  cache.dense.reserve(m.params.dense.size());
  for (const auto& layer : m.params.dense) {
    auto r = dense_forward(layer, h);
    h = std::move(r.outputs);
    cache.dense.push_back(std::move(r.cache));
  }
  cache.logit = h.at(0);
  fwd.logit = cache.logit;
  return fwd;
}

/// Gradients of (d_logit * logit) with respect to every parameter and the input.
inline ModelGradients model_backward(const Model& m, const ModelCache& cache, double d_logit) {
  if (cache.dense.size() != m.params.dense.size()) {
    throw UsageError("model_backward: cache does not belong to this model");
  }
  ModelGradients g;
  g.params.dense.resize(m.params.dense.size());

  Vector upstream{d_logit};
  for (std::size_t k = m.params.dense.size(); k-- > 0;) {
    const DenseLayer& layer = m.params.dense[k];
    DenseGradients dg = dense_backward(layer, cache.dense[k], upstream);
    g.params.dense[k] = DenseLayer{std::move(dg.d_weights), std::move(dg.d_bias), layer.activation};
    upstream = std::move(dg.d_input);
  }

  if (!m.has_nd_layer()) {
    g.d_input = std::move(upstream);
    return g;
  }

  Vector d_bands(m.n_bands, 0.0);
  if (m.has_attention()) {
    AttentionGradients ag = attention_gate_backward(cache.gate, m.params.gate, upstream);
    g.params.gate = AttentionGate{std::move(ag.d_weights), std::move(ag.d_bias)};
    d_bands = std::move(ag.d_bands);
    upstream = std::move(ag.d_nd_outputs);
  }

  NdGradients ng;
  if (const auto* c = std::get_if<NdCache>(&cache.nd)) {
    ng = nd_backward(*c, upstream, m.params.nd, m.eps);
  } else if (const auto* s = std::get_if<SignedNdCache>(&cache.nd)) {
    ng = nd_backward_signed(*s, upstream, m.params.nd, m.eps);
  } else if (const auto* sp = std::get_if<SoftplusInputCache>(&cache.nd)) {
    ng = nd_backward_softplus_inputs(*sp, upstream, m.params.nd, m.eps);
  } else {
    throw UsageError("model_backward: missing ND cache");
  }
  g.params.nd = NdParams{m.n_bands, std::move(ng.d_alpha), std::move(ng.d_beta)};
  for (std::size_t k = 0; k < d_bands.size(); ++k) d_bands[k] += ng.d_input[k];
  g.d_input = std::move(d_bands);
  return g;
}

}  // namespace ndl

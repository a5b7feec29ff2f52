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
#include <array>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "ndl/data.hpp"
#include "ndl/metrics.hpp"
#include "ndl/nd_layer.hpp"
#include "ndl/network.hpp"
#include "ndl/train.hpp"

namespace ndl {

/// Accuracy percentage points per 100 parameters.
inline double efficiency(double accuracy_pct, std::size_t params) {
  if (params == 0) throw UsageError("efficiency: parameter count must be positive");
  return accuracy_pct / static_cast<double>(params) * 100.0;
}

// ---------------------------------------------------------------------------
// Noise robustness

/// Seed of the noise realization used for one (base seed, eta) pair.
inline std::uint64_t noise_seed(std::uint64_t seed, double eta) {
  return mix_seed(seed, std::bit_cast<std::uint64_t>(eta));
}

struct NoisePoint {
  double eta = 0.0;
  double accuracy = 0.0;  // fraction

  friend bool operator==(const NoisePoint&, const NoisePoint&) = default;
};

inline void check_etas(const Vector& etas) {
  for (std::size_t k = 0; k < etas.size(); ++k) {
    if (!(etas[k] >= 0.0) || etas[k] > 0.5) throw UsageError("noise levels must lie in [0, 0.5]");
    if (k > 0 && !(etas[k] > etas[k - 1])) throw UsageError("noise levels must be strictly increasing");
  }
}

/// Accuracy on noisy copies of `test`, one fixed realization per eta.
inline std::vector<NoisePoint> noise_sweep(const Model& m, const Dataset& test, const Vector& etas,
                                           std::uint64_t seed) {
  check_etas(etas);
  std::vector<NoisePoint> out;
  out.reserve(etas.size());
  for (double eta : etas) {
    const Dataset noisy = inject_noise(test, eta, noise_seed(seed, eta));
    out.push_back({eta, accuracy(m, noisy)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Coefficient interpretability

/// n x n matrix: (i, j) = softplus(alpha_ij) / softplus(beta_ij) for i < j,
/// (j, i) its reciprocal, diagonal 1.
struct CoeffRatioMatrix {
  std::vector<std::string> band_names;
  Matrix ratios;
};

struct AsymmetricPair {
  std::size_t pair = 0;
  std::size_t i = 0;
  std::size_t j = 0;
  double ratio = 1.0;
  double asymmetry = 1.0;  // max(ratio, 1 / ratio)

  friend bool operator==(const AsymmetricPair&, const AsymmetricPair&) = default;
};

inline Vector pair_ratios(const NdParams& nd) {
  Vector r(nd.size());
  for (std::size_t p = 0; p < nd.size(); ++p) r[p] = softplus(nd.alpha[p]) / softplus(nd.beta[p]);
  return r;
}

inline void require_nd_layer(const Model& m) {
  if (!m.has_nd_layer()) {
    throw UsageError("model '" + std::string(to_string(m.arch)) +
                     "' has no normalized difference layer");
  }
}

inline CoeffRatioMatrix coeff_ratios(const Model& m) {
  require_nd_layer(m);
  const Vector r = pair_ratios(m.params.nd);
  CoeffRatioMatrix out{m.band_names, Matrix(m.n_bands, m.n_bands, 1.0)};
  const PairIndexer pairs(m.n_bands);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    out.ratios(pairs[p].i, pairs[p].j) = r[p];
    out.ratios(pairs[p].j, pairs[p].i) = 1.0 / r[p];
  }
  return out;
}

/// Ranks pairs by max(r, 1/r), descending; equal asymmetry keeps pair order.
inline std::vector<AsymmetricPair> rank_asymmetric(const Vector& ratios, std::size_t n_bands,
                                                   std::size_t k) {
  const PairIndexer pairs(n_bands);
  if (ratios.size() != pairs.size()) throw UsageError("rank_asymmetric: ratio count mismatch");
  std::vector<AsymmetricPair> all;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    all.push_back({p, pairs[p].i, pairs[p].j, ratios[p], std::max(ratios[p], 1.0 / ratios[p])});
  }
  std::stable_sort(all.begin(), all.end(), [](const AsymmetricPair& a, const AsymmetricPair& b) {
    return a.asymmetry > b.asymmetry;
  });
  all.resize(std::min(k, all.size()));
  return all;
}

inline std::vector<AsymmetricPair> top_asymmetric(const Model& m, std::size_t k) {
  require_nd_layer(m);
  return rank_asymmetric(pair_ratios(m.params.nd), m.n_bands, k);
}

// ---------------------------------------------------------------------------
// Gradient checks

inline double relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

struct FamilyError {
  double max_relative_error = 0.0;
  std::size_t checked = 0;

  void add(double err) {
    max_relative_error = std::max(max_relative_error, err);
    ++checked;
  }
};

struct GradcheckReport {
  std::string target;  // e.g. "layer/signed" or "model/nd/3"
  double tolerance = 0.0;
  std::size_t trials = 0;
  std::map<std::string, FamilyError> families;

  double worst() const {
    double w = 0.0;
    for (const auto& [_, f] : families) w = std::max(w, f.max_relative_error);
    return w;
  }
  // Strict: a zero tolerance can never pass.
  bool passed() const {
    for (const auto& [_, f] : families) {
      if (!(f.max_relative_error < tolerance)) return false;
    }
    return !families.empty();
  }
};

enum class LayerVariant { unsigned_bands, signed_bands, softplus_bands };

inline std::string_view to_string(LayerVariant v) {
  switch (v) {
    case LayerVariant::unsigned_bands: return "unsigned";
    case LayerVariant::signed_bands: return "signed";
    case LayerVariant::softplus_bands: return "softplus";
  }
  return "?";
}

struct GradcheckOptions {
  std::size_t trials = 1000;
  double tolerance = 1e-5;
  double step = 1e-5;
  std::uint64_t seed = 0;
  // Each trial draws eps from this list in turn.
  Vector eps_values{1e-8, 1e-4};
  // Magnitudes below this are compared absolutely.
  double floor = 1e-8;
};

namespace detail {

struct LayerEval {
  Vector outputs;
  NdGradients grads;
};

inline LayerEval run_layer(LayerVariant v, std::span<const double> bands, const NdParams& params,
                           const EpsilonConfig& eps, std::span<const double> upstream) {
  switch (v) {
    case LayerVariant::signed_bands: {
      auto f = nd_forward_signed(bands, params, eps);
      return {f.outputs, upstream.empty() ? NdGradients{} : nd_backward_signed(f.cache, upstream, params, eps)};
    }
    case LayerVariant::softplus_bands: {
      auto f = nd_forward_softplus_inputs(bands, params, eps);
      return {f.outputs,
              upstream.empty() ? NdGradients{} : nd_backward_softplus_inputs(f.cache, upstream, params, eps)};
    }
    default: {
      auto f = nd_forward(bands, params, eps);
      return {f.outputs, upstream.empty() ? NdGradients{} : nd_backward(f.cache, upstream, params, eps)};
    }
  }
}

/// Magnitudes of the quotient-rule terms behind d_alpha, d_beta, d_b_i and
/// d_b_j of pair `p`, i.e. |u'|/v + |u||v'|/v^2 for N = u/v. With signed
/// bands the two terms can cancel, so a gradient may vanish while the finite
/// difference still carries round-off at the scale of the terms. For the
/// other variants the terms share a sign and this is just |gradient|.
inline std::array<double, 4> term_scales(LayerVariant v, std::span<const double> bands,
                                         const NdParams& params, const EpsilonConfig& eps,
                                         std::size_t p, const NdGradients& unit_grads,
                                         const BandPair& pair) {
  if (v != LayerVariant::signed_bands) {
    return {std::abs(unit_grads.d_alpha[p]), std::abs(unit_grads.d_beta[p]),
            std::abs(unit_grads.d_input[pair.i]), std::abs(unit_grads.d_input[pair.j])};
  }
  const double sa = softplus(params.alpha[p]);
  const double sb = softplus(params.beta[p]);
  const double bi = bands[pair.i];
  const double bj = bands[pair.j];
  const double ri = std::sqrt(bi * bi + eps.eps);
  const double rj = std::sqrt(bj * bj + eps.eps);
  const double u = std::abs(sa * bi - sb * bj);
  const double d = sa * ri + sb * rj + eps.eps;
  const double d2 = d * d;
  return {sigmoid(params.alpha[p]) * (std::abs(bi) * d + u * ri) / d2,
          sigmoid(params.beta[p]) * (std::abs(bj) * d + u * rj) / d2,
          sa * (d + u * std::abs(bi) / ri) / d2, sb * (d + u * std::abs(bj) / rj) / d2};
}

inline double weighted_sum(const Vector& outputs, std::span<const double> weights) {
  double s = 0.0;
  for (std::size_t p = 0; p < outputs.size(); ++p) s += weights[p] * outputs[p];
  return s;
}

}  // namespace detail

/// Checks one ND layer variant against central finite differences.
///
/// Every trial draws 2..6 bands, alpha/beta in [-2, 2] and eps from
/// `eps_values`. Unsigned bands lie in [0.01, 1]; signed bands have
/// magnitude in [0.01, 1] and random sign; softplus-variant inputs are
/// uniform in [-2, 2]. Each output pair is checked with a unit upstream
/// gradient (the four per-pair partials), and the accumulated input gradient
/// is checked with a random upstream vector. Errors are relative to the
/// larger of |analytic|, |numeric| and the quotient-rule term scale.
inline GradcheckReport gradcheck_nd_layer(LayerVariant variant, const GradcheckOptions& opt) {
  GradcheckReport report{"layer/" + std::string(to_string(variant)), opt.tolerance, opt.trials, {}};
  auto& fa = report.families["alpha"];
  auto& fb = report.families["beta"];
  auto& fi = report.families["input"];
  auto& facc = report.families["input_accumulated"];

  std::mt19937_64 rng(opt.seed);
  std::uniform_int_distribution<std::size_t> band_count(2, 6);
  std::uniform_real_distribution<double> coeff(-2.0, 2.0);
  std::uniform_real_distribution<double> magnitude(0.01, 1.0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::bernoulli_distribution coin(0.5);

  for (std::size_t t = 0; t < opt.trials; ++t) {
    const std::size_t n = band_count(rng);
    const EpsilonConfig eps{opt.eps_values[t % opt.eps_values.size()]};
    NdParams params = NdParams::zeros(n);
    for (auto& a : params.alpha) a = coeff(rng);
    for (auto& b : params.beta) b = coeff(rng);
    Vector bands(n);
    for (auto& b : bands) {
      switch (variant) {
        case LayerVariant::unsigned_bands: b = magnitude(rng); break;
        case LayerVariant::signed_bands: b = coin(rng) ? magnitude(rng) : -magnitude(rng); break;
        case LayerVariant::softplus_bands: b = 2.0 * unit(rng); break;
      }
    }
    const std::size_t pairs = params.size();
    const PairIndexer indexer(n);
    const double h = opt.step;

    for (std::size_t p = 0; p < pairs; ++p) {
      Vector e(pairs, 0.0);
      e[p] = 1.0;
      const auto base = detail::run_layer(variant, bands, params, eps, e);
      auto fd = [&](auto&& perturb) {
        double plus = 0.0;
        double minus = 0.0;
        {
          NdParams q = params;
          Vector b = bands;
          perturb(q, b, +h);
          plus = detail::run_layer(variant, b, q, eps, {}).outputs[p];
        }
        {
          NdParams q = params;
          Vector b = bands;
          perturb(q, b, -h);
          minus = detail::run_layer(variant, b, q, eps, {}).outputs[p];
        }
        return (plus - minus) / (2.0 * h);
      };
      const auto ts = detail::term_scales(variant, bands, params, eps, p, base.grads, indexer[p]);
      fa.add(relative_error(base.grads.d_alpha[p],
                            fd([&](NdParams& q, Vector&, double d) { q.alpha[p] += d; }),
                            std::max(opt.floor, ts[0])));
      fb.add(relative_error(base.grads.d_beta[p],
                            fd([&](NdParams& q, Vector&, double d) { q.beta[p] += d; }),
                            std::max(opt.floor, ts[1])));
      for (std::size_t side = 0; side < 2; ++side) {
        const std::size_t k = side == 0 ? indexer[p].i : indexer[p].j;
        fi.add(relative_error(base.grads.d_input[k],
                              fd([&](NdParams&, Vector& b, double d) { b[k] += d; }),
                              std::max(opt.floor, ts[2 + side])));
      }
    }

    // Accumulation across pairs: L = sum_p w_p N_p.
    Vector w(pairs);
    for (auto& x : w) x = unit(rng);
    const auto base = detail::run_layer(variant, bands, params, eps, w);
    for (std::size_t k = 0; k < n; ++k) {
      Vector bp = bands;
      Vector bm = bands;
      bp[k] += h;
      bm[k] -= h;
      const double numeric =
          (detail::weighted_sum(detail::run_layer(variant, bp, params, eps, {}).outputs, w) -
           detail::weighted_sum(detail::run_layer(variant, bm, params, eps, {}).outputs, w)) /
          (2.0 * h);
      // Scale by the summed magnitude of the per-pair terms, which is what
      // the finite difference resolves.
      double term_scale = 0.0;
      for (std::size_t p = 0; p < pairs; ++p) {
        if (indexer[p].i != k && indexer[p].j != k) continue;
        Vector e(pairs, 0.0);
        e[p] = 1.0;
        const auto unit = detail::run_layer(variant, bands, params, eps, e).grads;
        const auto ts = detail::term_scales(variant, bands, params, eps, p, unit, indexer[p]);
        term_scale += std::abs(w[p]) * (indexer[p].i == k ? ts[2] : ts[3]);
      }
      facc.add(relative_error(base.grads.d_input[k], numeric, std::max(opt.floor, term_scale)));
    }
  }
  return report;
}

struct ModelGradcheckOptions {
  std::size_t trials = 20;
  double tolerance = 1e-4;
  double step = 1e-5;
  std::uint64_t seed = 0;
  double eps = 1e-8;
  double floor = 1e-6;
  // Inputs whose ReLU preactivations come closer than this to zero are redrawn.
  double kink_margin = 1e-3;
};

namespace detail {

inline double model_loss(const Model& m, std::span<const double> bands, int label) {
  return bce_with_logits(model_forward(m, bands).logit, label).loss;
}

inline bool near_kink(const ModelCache& cache, const Model& m, double margin) {
  for (std::size_t k = 0; k < cache.dense.size(); ++k) {
    if (m.params.dense[k].activation != Activation::relu) continue;
    for (double z : cache.dense[k].preactivation) {
      if (std::abs(z) < margin) return true;
    }
  }
  return false;
}

}  // namespace detail

/// Whole-model check of the BCE loss gradient for every learnable scalar
/// and every input band. Each trial builds a fresh model, randomizes alpha
/// and beta in [-2, 2] and the attention gate in [-1, 1], and draws bands in
/// [0.01, 1] with a random label.
inline GradcheckReport gradcheck_model(Arch arch, int depth, std::size_t n_bands,
                                       const ModelGradcheckOptions& opt) {
  GradcheckReport report{"model/" + std::string(to_string(arch)) + "/" + std::to_string(depth),
                         opt.tolerance, opt.trials, {}};
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> coeff(-2.0, 2.0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> band(0.01, 1.0);
  std::bernoulli_distribution coin(0.5);

  for (std::size_t t = 0; t < opt.trials; ++t) {
    Model m = build_model(arch, depth, n_bands, rng(), EpsilonConfig{opt.eps});
    for (auto& a : m.params.nd.alpha) a = coeff(rng);
    for (auto& b : m.params.nd.beta) b = coeff(rng);
    for (auto& w : m.params.gate.weights.values()) w = unit(rng);
    for (auto& c : m.params.gate.bias) c = unit(rng);

    Vector bands(n_bands);
    ModelForward fwd;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      for (auto& b : bands) b = band(rng);
      fwd = model_forward(m, bands);
      if (!detail::near_kink(fwd.cache, m, opt.kink_margin)) break;
    }
    const int label = coin(rng) ? 1 : 0;
    const LossAndGrad lg = bce_with_logits(fwd.logit, label);
    const ModelGradients g = model_backward(m, fwd.cache, lg.d_logit);
    const double h = opt.step;

    auto params = m.params.blocks();
    const auto grads = g.params.blocks();
    for (std::size_t b = 0; b < params.size(); ++b) {
      auto& family = report.families[std::string(to_string(params[b].family))];
      for (std::size_t e = 0; e < params[b].values.size(); ++e) {
        double& x = params[b].values[e];
        const double saved = x;
        x = saved + h;
        const double plus = detail::model_loss(m, bands, label);
        x = saved - h;
        const double minus = detail::model_loss(m, bands, label);
        x = saved;
        family.add(relative_error(grads[b].values[e], (plus - minus) / (2.0 * h), opt.floor));
      }
    }
    auto& input = report.families["input"];
    for (std::size_t k = 0; k < n_bands; ++k) {
      Vector bp = bands;
      Vector bm = bands;
      bp[k] += h;
      bm[k] -= h;
      const double numeric = (detail::model_loss(m, bp, label) - detail::model_loss(m, bm, label)) / (2.0 * h);
      input.add(relative_error(g.d_input[k], numeric, opt.floor));
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Cross-validation

struct CrossvalConfig {
  TrainConfig train;
  SplitSpec split;
  Vector etas{0.0, 0.02, 0.04, 0.06, 0.08, 0.10};
  double degradation_eta = 0.10;
  std::uint64_t noise_seed = 0;
  std::size_t threads = 1;
};

struct FoldResult {
  std::size_t fold = 0;
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
  std::size_t test_size = 0;
  double test_accuracy = 0.0;                  // fraction
  double best_validation_accuracy = 0.0;       // from the history
  double restored_validation_accuracy = 0.0;   // recomputed on the returned model
  int best_epoch = 0;
  int stop_epoch = 0;
  std::vector<NoisePoint> noise;
  std::optional<double> degradation_pp;        // acc(0) - acc(degradation_eta), in points

  friend bool operator==(const FoldResult&, const FoldResult&) = default;
};

struct EvalReport {
  Arch arch = Arch::nd;
  int depth = 2;
  std::size_t n_bands = 0;
  std::size_t param_count = 0;
  std::vector<FoldResult> folds;
  double mean_accuracy_pct = 0.0;
  double std_accuracy_pct = 0.0;  // sample std over folds (n - 1)
  double efficiency = 0.0;
  std::vector<NoisePoint> mean_noise;  // per-eta accuracy averaged over folds
  std::optional<double> mean_degradation_pp;
  double degradation_eta = 0.10;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

struct CrossvalResult {
  EvalReport report;
  std::vector<Model> models;  // best model per fold
  std::vector<TrainHistory> histories;
};

inline double mean_of(const Vector& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double sample_std(const Vector& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

/// Seeds for fold `fold`: model init, shuffling and noise are independent streams.
inline std::uint64_t fold_seed(std::uint64_t base, std::size_t fold, std::uint64_t stream) {
  return mix_seed(mix_seed(base, fold), stream);
}

/// Fills the aggregate fields of `report` from its folds.
inline void aggregate(EvalReport& report) {
  Vector acc;
  for (const auto& f : report.folds) acc.push_back(100.0 * f.test_accuracy);
  report.mean_accuracy_pct = mean_of(acc);
  report.std_accuracy_pct = sample_std(acc);
  report.efficiency = efficiency(report.mean_accuracy_pct, report.param_count);
  report.mean_noise.clear();
  report.mean_degradation_pp.reset();
  if (report.folds.empty()) return;
  for (std::size_t e = 0; e < report.folds.front().noise.size(); ++e) {
    Vector at;
    for (const auto& f : report.folds) at.push_back(f.noise[e].accuracy);
    report.mean_noise.push_back({report.folds.front().noise[e].eta, mean_of(at)});
  }
  Vector deg;
  for (const auto& f : report.folds) {
    if (f.degradation_pp) deg.push_back(*f.degradation_pp);
  }
  if (!deg.empty() && deg.size() == report.folds.size()) report.mean_degradation_pp = mean_of(deg);
}

/// Trains and evaluates one fold. Split, model init, shuffling and noise are
/// all derived from the configured seeds and the fold index.
inline FoldResult run_fold(Arch arch, int depth, const Dataset& ds, const CrossvalConfig& cfg,
                           std::size_t fold, Model* best_model = nullptr,
                           TrainHistory* history = nullptr) {
  const Split split = stratified_split(ds, cfg.split, fold);
  Model model = build_model(arch, depth, ds.n_bands(), fold_seed(cfg.train.seed, fold, 1),
                            EpsilonConfig{cfg.train.eps}, ds.band_names);
  TrainConfig tc = cfg.train;
  tc.seed = fold_seed(cfg.train.seed, fold, 2);
  TrainResult trained = train(std::move(model), split.train, split.validation, tc);

  FoldResult r;
  r.fold = fold;
  r.train_size = split.train.size();
  r.validation_size = split.validation.size();
  r.test_size = split.test.size();
  r.test_accuracy = accuracy(trained.model, split.test);
  r.best_validation_accuracy = trained.history.best_validation_accuracy;
  r.restored_validation_accuracy = accuracy(trained.model, split.validation);
  r.best_epoch = trained.history.best_epoch;
  r.stop_epoch = trained.history.stop_epoch;
  r.noise = noise_sweep(trained.model, split.test, cfg.etas, mix_seed(cfg.noise_seed, fold));
  const auto clean = std::find_if(r.noise.begin(), r.noise.end(), [](const NoisePoint& p) { return p.eta == 0.0; });
  const auto ref = std::find_if(r.noise.begin(), r.noise.end(),
                                [&](const NoisePoint& p) { return p.eta == cfg.degradation_eta; });
  if (clean != r.noise.end() && ref != r.noise.end()) {
    r.degradation_pp = 100.0 * (clean->accuracy - ref->accuracy);
  }
  if (best_model) *best_model = std::move(trained.model);
  if (history) *history = std::move(trained.history);
  return r;
}

/// Stratified k-fold protocol: per fold, train on the training part with
/// early stopping on the validation part, then score the held-out test part
/// clean and under each noise level. Folds run on up to `cfg.threads` threads;
/// results do not depend on the thread count.
inline CrossvalResult run_crossval(Arch arch, int depth, const Dataset& ds, const CrossvalConfig& cfg) {
  ds.validate();
  cfg.split.validate();
  cfg.train.validate();
  check_etas(cfg.etas);

  const std::size_t k = cfg.split.folds;
  CrossvalResult result;
  result.report.arch = arch;
  result.report.depth = depth;
  result.report.n_bands = ds.n_bands();
  result.report.degradation_eta = cfg.degradation_eta;
  result.report.param_count = count_params(build_model(arch, depth, ds.n_bands(), 0));
  result.report.folds.resize(k);
  result.models.resize(k);
  result.histories.resize(k);

  // Validate stratification before spawning workers.
  (void)stratified_split_indices(ds, cfg.split, 0);

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (std::size_t f = next++; f < k; f = next++) {
      try {
        result.report.folds[f] = run_fold(arch, depth, ds, cfg, f, &result.models[f], &result.histories[f]);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(cfg.threads, 1, k);
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);

  aggregate(result.report);
  return result;
}

}  // namespace ndl

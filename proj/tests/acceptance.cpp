// Copyright 2026 The ndl Authors.
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.
//
// Criteria 4-7 share one cross-validation of ND and MLP at depth 2 on the
// shipped synthetic spec (data/synth_default.json), single-threaded.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "ndl/ndl.hpp"

namespace {

using namespace ndl;
using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kSeed = 1;

int g_failures = 0;

void report(int id, const char* name, bool ok, double seconds, const std::string& detail) {
  std::printf("[%s] %d %s: %s (%.2f s)\n", ok ? "PASS" : "FAIL", id, name, detail.c_str(), seconds);
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void criterion_gradients() {
  const auto t0 = Clock::now();
  bool ok = true;
  double worst_layer = 0.0;
  double worst_model = 0.0;
  GradcheckOptions lo;
  lo.trials = 1000;
  lo.tolerance = 1e-5;
  lo.step = 1e-5;
  lo.seed = kSeed;
  for (auto v : {LayerVariant::unsigned_bands, LayerVariant::signed_bands, LayerVariant::softplus_bands}) {
    const auto r = gradcheck_nd_layer(v, lo);
    ok = ok && r.passed() && r.families.size() == 4;
    worst_layer = std::max(worst_layer, r.worst());
  }
  ModelGradcheckOptions mo;
  mo.tolerance = 1e-4;
  mo.seed = kSeed;
  for (Arch a : {Arch::nd, Arch::mlp, Arch::attnd}) {
    for (int d : {2, 3, 4}) {
      const auto r = gradcheck_model(a, d, 10, mo);
      ok = ok && r.passed();
      worst_model = std::max(worst_model, r.worst());
    }
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 30.0;
  report(1, "gradient fidelity", ok, secs,
         fmt("layer max rel err %.3g (< 1e-5, 3 variants x 1000 trials), model max rel err %.3g (<= 1e-4, 9 archs)",
             worst_layer, worst_model));
}

void criterion_param_counts() {
  const auto t0 = Clock::now();
  const struct {
    Arch arch;
    int depth;
    std::size_t expected;
  } table[] = {
      {Arch::nd, 2, 136},    {Arch::nd, 3, 2206},    {Arch::nd, 4, 4276},
      {Arch::mlp, 2, 541},   {Arch::mlp, 3, 2611},   {Arch::mlp, 4, 4681},
      {Arch::attnd, 2, 631}, {Arch::attnd, 3, 2701}, {Arch::attnd, 4, 4771},
  };
  int matched = 0;
  for (const auto& row : table) matched += count_params(build_model(row.arch, row.depth, 10, 0)) == row.expected;
  const double e1 = efficiency(96.50, 136);
  const double e2 = efficiency(97.20, 541);
  const bool eff_ok = std::abs(e1 - 70.96) <= 0.01 && std::abs(e2 - 17.97) <= 0.01;
  const double secs = seconds_since(t0);
  report(2, "parameter counts", matched == 9 && eff_ok && secs < 1.0, secs,
         fmt("%d/9 counts exact, efficiency %.4f and %.4f", matched, e1, e2));
}

void criterion_invariance() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(kSeed);
  std::uniform_real_distribution<double> coeff(-2.0, 2.0);
  std::uniform_real_distribution<double> band(0.0, 1.0);
  std::uniform_real_distribution<double> band_min(0.01, 1.0);
  const std::size_t n = 10;
  auto random_params = [&] {
    NdParams p = NdParams::zeros(n);
    for (auto& a : p.alpha) a = coeff(rng);
    for (auto& b : p.beta) b = coeff(rng);
    return p;
  };
  const PairIndexer idx(n);

  std::size_t out_of_bounds = 0;
  double worst_scale = 0.0;
  double worst_classical = 0.0;
  for (int t = 0; t < 100000; ++t) {
    Vector b(n);
    for (auto& x : b) x = band(rng);
    const NdParams p = random_params();
    const Vector y = nd_forward(b, p, EpsilonConfig{}).outputs;
    for (double v : y) out_of_bounds += !(v >= -1.0 && v <= 1.0);

    if (t % 10 == 0) {
      const Vector base = nd_forward(b, p, EpsilonConfig{1e-12}).outputs;
      for (double k : {0.5, 2.0, 10.0}) {
        Vector s = b;
        for (auto& x : s) x *= k;
        const Vector ys = nd_forward(s, p, EpsilonConfig{1e-12}).outputs;
        for (std::size_t q = 0; q < ys.size(); ++q) worst_scale = std::max(worst_scale, std::abs(ys[q] - base[q]));
      }
      Vector c(n);
      for (auto& x : c) x = band_min(rng);
      NdParams tied = p;
      tied.beta = tied.alpha;
      const Vector yc = nd_forward(c, tied, EpsilonConfig{1e-12}).outputs;
      for (std::size_t q = 0; q < yc.size(); ++q) {
        const double bi = c[idx[q].i], bj = c[idx[q].j];
        worst_classical = std::max(worst_classical, std::abs(yc[q] - (bi - bj) / (bi + bj)));
      }
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = out_of_bounds == 0 && worst_scale < 1e-6 && worst_classical < 1e-9 && secs < 10.0;
  report(3, "invariance and bounds", ok, secs,
         fmt("%zu outputs outside [-1,1] over 1e5 inputs, max scale change %.3g (< 1e-6), "
             "max classical deviation %.3g (< 1e-9)",
             out_of_bounds, worst_scale, worst_classical));
}

struct SharedRun {
  Dataset data;
  CrossvalConfig config;
  CrossvalResult nd;
  CrossvalResult mlp;
  double seconds_nd = 0.0;
  double seconds_mlp = 0.0;
};

SharedRun run_experiment() {
  SharedRun run;
  const SynthSpec spec = load_synth_spec(std::filesystem::path(NDL_SOURCE_DIR) / "data" / "synth_default.json");
  run.data = synth_generate(spec);
  run.config.train.seed = kSeed;
  run.config.split.seed = kSeed;
  run.config.noise_seed = kSeed;
  run.config.threads = 1;
  auto t0 = Clock::now();
  run.nd = run_crossval(Arch::nd, 2, run.data, run.config);
  run.seconds_nd = seconds_since(t0);
  t0 = Clock::now();
  run.mlp = run_crossval(Arch::mlp, 2, run.data, run.config);
  run.seconds_mlp = seconds_since(t0);
  return run;
}

void criterion_accuracy(const SharedRun& run) {
  const double nd = run.nd.report.mean_accuracy_pct;
  const double mlp = run.mlp.report.mean_accuracy_pct;
  const double secs = run.seconds_nd + run.seconds_mlp;
  const bool ok = run.data.size() == 2000 && run.data.n_bands() == 10 && nd >= 90.0 &&
                  std::abs(nd - mlp) <= 3.0 && secs < 600.0;
  report(4, "synthetic accuracy", ok, secs,
         fmt("ND-2 %.2f%% (>= 90), MLP-2 %.2f%%, gap %.2f pp (<= 3)", nd, mlp, std::abs(nd - mlp)));
}

void criterion_noise(const SharedRun& run) {
  int nd_not_worse = 0;
  for (std::size_t f = 0; f < run.nd.report.folds.size(); ++f) {
    nd_not_worse += *run.nd.report.folds[f].degradation_pp <= *run.mlp.report.folds[f].degradation_pp;
  }
  const double nd = *run.nd.report.mean_degradation_pp;
  const double mlp = *run.mlp.report.mean_degradation_pp;
  const double secs = run.seconds_nd + run.seconds_mlp;
  const bool ok = nd_not_worse >= 8 && nd < mlp && secs < 600.0;
  report(5, "noise robustness direction", ok, secs,
         fmt("ND <= MLP degradation in %d/10 folds (>= 8), mean ND %.2f pp vs MLP %.2f pp at eta 0.10",
             nd_not_worse, nd, mlp));
}

void criterion_protocol(const SharedRun& run) {
  const auto t0 = Clock::now();
  int restored = 0;
  int clean_match = 0;
  std::size_t folds = 0;
  for (const auto* res : {&run.nd, &run.mlp}) {
    for (std::size_t f = 0; f < res->report.folds.size(); ++f) {
      const auto& fr = res->report.folds[f];
      double history_max = 0.0;
      for (const auto& e : res->histories[f].epochs) history_max = std::max(history_max, e.validation_accuracy);
      const Split split = stratified_split(run.data, run.config.split, f);
      restored += history_max == fr.best_validation_accuracy &&
                  accuracy(res->models[f], split.validation) == history_max;
      clean_match += fr.noise.front().eta == 0.0 && fr.noise.front().accuracy == accuracy(res->models[f], split.test);
      ++folds;
    }
  }
  const CrossvalResult again = run_crossval(Arch::nd, 2, run.data, run.config);
  const bool identical = again.report == run.nd.report &&
                         report_to_json(again.report).dump() == report_to_json(run.nd.report).dump();
  const double secs = seconds_since(t0);
  report(6, "training protocol", restored == static_cast<int>(folds) &&
                                     clean_match == static_cast<int>(folds) && identical,
         secs,
         fmt("best-epoch restore %d/%zu, eta=0 equals clean %d/%zu, rerun bit-identical: %s", restored, folds,
             clean_match, folds, identical ? "yes" : "no"));
}

void criterion_interpretability(const SharedRun& run) {
  const auto t0 = Clock::now();
  const auto dir = std::filesystem::temp_directory_path() / "ndl_acceptance";
  std::filesystem::create_directories(dir);

  const Model untrained = build_model(Arch::nd, 2, 10, kSeed, EpsilonConfig{}, run.data.band_names);
  save_checkpoint(untrained, dir / "untrained.json");
  bool all_ones = true;
  const CoeffRatioMatrix initial = coeff_ratios(load_checkpoint(dir / "untrained.json"));
  for (double r : initial.ratios.values()) all_ones = all_ones && r == 1.0;

  const Model& trained = run.nd.models.front();
  save_checkpoint(trained, dir / "trained.json");
  const Model back = load_checkpoint(dir / "trained.json");
  const CoeffRatioMatrix ratios = coeff_ratios(back);
  bool valid = ratios.ratios.rows() == 10 && ratios.ratios.cols() == 10 && ratios.band_names == run.data.band_names;
  for (double r : ratios.ratios.values()) valid = valid && std::isfinite(r) && r > 0.0;
  std::ostringstream csv;
  write_ratio_csv(csv, ratios);
  std::size_t lines = 0;
  for (char c : csv.str()) lines += c == '\n';
  valid = valid && lines == 11;

  const bool bit_identical = ratios.ratios == coeff_ratios(trained).ratios;
  const auto top = top_asymmetric(back, 15);
  const bool deterministic = top == top_asymmetric(trained, 15) && top == top_asymmetric(back, 15);
  const bool moved = !top.empty() && top.front().asymmetry > 1.0;
  std::filesystem::remove_all(dir);

  const double secs = seconds_since(t0);
  const bool ok = all_ones && valid && bit_identical && deterministic && moved;
  report(7, "interpretability pipeline", ok, secs,
         fmt("untrained all ones: %s, trained 10x10 positive: %s, round-trip bit-identical: %s, "
             "top-15 deterministic: %s, top pair %s/%s asymmetry %.3f",
             all_ones ? "yes" : "no", valid ? "yes" : "no", bit_identical ? "yes" : "no",
             deterministic ? "yes" : "no", top.empty() ? "-" : back.band_names[top.front().i].c_str(),
             top.empty() ? "-" : back.band_names[top.front().j].c_str(), top.empty() ? 0.0 : top.front().asymmetry));
}

}  // namespace

int main() {
  try {
    criterion_gradients();
    criterion_param_counts();
    criterion_invariance();
    const SharedRun run = run_experiment();
    criterion_accuracy(run);
    criterion_noise(run);
    criterion_protocol(run);
    criterion_interpretability(run);
  } catch (const std::exception& e) {
    std::printf("[FAIL] acceptance run aborted: %s\n", e.what());
    return 2;
  }
  std::printf("%d criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}

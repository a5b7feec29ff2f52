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

// ndl: gradient checks, synthetic data, cross-validation, noise sweeps and
// coefficient exports.
//
// Exit status: 0 success, 1 a checked contract failed (gradcheck over
// tolerance), 2 bad usage, 3 input/data/IO error. Failures print exactly one
// line `ndl: error[<kind>]: <message>` on stderr.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ndl/ndl.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum ExitCode : int { kOk = 0, kFailed = 1, kUsage = 2, kInput = 3 };

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

int fail(const char* kind, const std::string& message, int code) {
  std::cerr << "ndl: error[" << kind << "]: " << one_line(message) << '\n';
  return code;
}

struct Options {
  std::vector<std::string> archs;
  std::vector<int> depths;
  std::string data;
  std::string synth;
  std::uint64_t seed = 1;
  std::optional<double> eps;
  double lr = 0.01;
  double wd = 1e-4;
  std::size_t batch = 32;
  int epochs = 150;
  int patience = 25;
  std::string etas = "0,0.02,0.04,0.06,0.08,0.10";
  std::string out = "ndl_out";
  std::optional<double> tol;
  std::size_t trials = 1000;
  std::size_t model_trials = 20;
  std::size_t topk = 15;
  std::vector<std::string> checkpoints;
  std::optional<std::size_t> fold;
  std::size_t bands = 10;
};

std::string command_line(int argc, char** argv) {
  std::string s;
  for (int k = 0; k < argc; ++k) {
    if (k) s += ' ';
    s += argv[k];
  }
  return s;
}

json base_meta(const std::string& command, const std::string& argv, std::uint64_t seed) {
  return {{"tool", ndl::kToolVersion}, {"command", command}, {"argv", argv}, {"seed", seed}};
}

ndl::Vector parse_etas(const std::string& text) {
  ndl::Vector etas;
  for (auto cell : ndl::detail::split_commas(text)) {
    double v = 0.0;
    if (!ndl::detail::parse_double(cell, v)) {
      throw ndl::UsageError("--etas: '" + std::string(cell) + "' is not a number");
    }
    etas.push_back(v);
  }
  if (etas.empty()) throw ndl::UsageError("--etas: empty list");
  ndl::check_etas(etas);
  return etas;
}

std::vector<ndl::Arch> parse_archs(const std::vector<std::string>& names) {
  std::vector<ndl::Arch> out;
  for (const auto& n : names) out.push_back(ndl::parse_arch(n));
  return out;
}

void check_depths(const std::vector<int>& depths) {
  for (int d : depths) {
    if (d < 2 || d > 4) throw ndl::UsageError("--depth must be 2, 3 or 4 (got " + std::to_string(d) + ")");
  }
}

std::size_t thread_cap() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("ND_THREADS"); env && *env) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1) throw ndl::UsageError("ND_THREADS must be a positive integer");
    n = std::min<std::size_t>(n, static_cast<std::size_t>(v));
  }
  return n;
}

struct LoadedData {
  ndl::Dataset dataset;
  json source;
};

LoadedData load_data(const Options& o) {
  if (o.data.empty() == o.synth.empty()) {
    throw ndl::UsageError("exactly one of --data or --synth is required");
  }
  try {
    if (!o.data.empty()) {
      ndl::Dataset ds = ndl::load_csv(o.data);
      return {std::move(ds), {{"data", o.data}}};
    }
    const ndl::SynthSpec spec = ndl::load_synth_spec(o.synth);
    return {ndl::synth_generate(spec), {{"synth", o.synth}, {"synth_seed", spec.seed}}};
  } catch (const ndl::DataError& e) {
    throw InputError(e.what());
  } catch (const ndl::UsageError& e) {
    throw InputError(e.what());
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  return out;
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create directory '" + dir.string() + "': " + ec.message());
}

ndl::TrainConfig train_config(const Options& o) {
  ndl::TrainConfig tc;
  tc.learning_rate = o.lr;
  tc.weight_decay = o.wd;
  tc.batch_size = o.batch;
  tc.max_epochs = o.epochs;
  tc.patience = std::min(o.patience, o.epochs);
  tc.seed = o.seed;
  if (o.eps) tc.eps = *o.eps;
  tc.validate();
  return tc;
}

// ---------------------------------------------------------------------------

int cmd_gradcheck(const Options& o, const std::string& argv) {
  const auto archs = parse_archs(o.archs.empty() ? std::vector<std::string>{"nd", "mlp", "attnd"} : o.archs);
  const std::vector<int> depths = o.depths.empty() ? std::vector<int>{2, 3, 4} : o.depths;
  check_depths(depths);
  if (o.trials == 0) throw ndl::UsageError("--trials must be positive");
  if (o.tol && !(*o.tol >= 0.0)) throw ndl::UsageError("--tol must be >= 0");
  if (o.bands < 2) throw ndl::UsageError("--bands must be at least 2");

  std::vector<ndl::GradcheckReport> reports;
  ndl::GradcheckOptions lo;
  lo.trials = o.trials;
  lo.seed = o.seed;
  if (o.tol) lo.tolerance = *o.tol;
  if (o.eps) {
    ndl::EpsilonConfig{*o.eps}.validate();
    lo.eps_values = {*o.eps};
  }
  for (auto v : {ndl::LayerVariant::unsigned_bands, ndl::LayerVariant::signed_bands,
                 ndl::LayerVariant::softplus_bands}) {
    reports.push_back(ndl::gradcheck_nd_layer(v, lo));
  }
  ndl::ModelGradcheckOptions mo;
  mo.trials = o.model_trials;
  mo.seed = o.seed;
  if (o.tol) mo.tolerance = *o.tol;
  if (o.eps) mo.eps = *o.eps;
  for (auto a : archs) {
    for (int d : depths) reports.push_back(ndl::gradcheck_model(a, d, o.bands, mo));
  }

  bool ok = true;
  for (const auto& r : reports) {
    std::cout << (r.passed() ? "PASS " : "FAIL ") << r.target << "  max rel err " << r.worst()
              << "  tol " << r.tolerance << '\n';
    ok = ok && r.passed();
  }
  make_dir(o.out);
  json doc = {{"meta", base_meta("gradcheck", argv, o.seed)},
              {"passed", ok},
              {"reports", ndl::gradcheck_to_json(reports)}};
  open_out(fs::path(o.out) / "gradcheck.json") << doc.dump(1) << '\n';
  return ok ? kOk : kFailed;
}

int cmd_synth(const Options& o, const std::string& argv, bool seed_given) {
  if (o.synth.empty()) throw ndl::UsageError("synth needs --synth SPEC");
  ndl::SynthSpec spec;
  try {
    spec = ndl::load_synth_spec(o.synth);
  } catch (const ndl::UsageError& e) {
    throw InputError(e.what());
  }
  if (seed_given) spec.seed = o.seed;
  const ndl::Dataset ds = ndl::synth_generate(spec);
  make_dir(o.out);
  const fs::path csv = fs::path(o.out) / ("synth_s" + std::to_string(spec.seed) + ".csv");
  {
    auto out = open_out(csv);
    ndl::write_csv(out, ds);
  }
  json meta = base_meta("synth", argv, spec.seed);
  meta["spec"] = spec;
  meta["rows"] = ds.size();
  meta["class0"] = ds.count_label(0);
  meta["class1"] = ds.count_label(1);
  meta["fingerprint"] = ndl::fingerprint(ds);
  open_out(fs::path(csv.string() + ".meta.json")) << meta.dump(1) << '\n';
  std::cout << csv.string() << ": " << ds.size() << " rows, class 0: " << ds.count_label(0)
            << ", class 1: " << ds.count_label(1) << '\n';
  return kOk;
}

int cmd_crossval(const Options& o, const std::string& argv) {
  const auto archs = parse_archs(o.archs.empty() ? std::vector<std::string>{"nd"} : o.archs);
  const std::vector<int> depths = o.depths.empty() ? std::vector<int>{2} : o.depths;
  check_depths(depths);
  ndl::CrossvalConfig cfg;
  cfg.train = train_config(o);
  cfg.split.seed = o.seed;
  cfg.noise_seed = o.seed;
  cfg.etas = parse_etas(o.etas);
  cfg.threads = thread_cap();
  if (o.fold && *o.fold >= cfg.split.folds) throw ndl::UsageError("--fold out of range");

  LoadedData data = load_data(o);
  const ndl::Dataset& ds = data.dataset;
  try {
    ds.validate();
    (void)ndl::stratified_split_indices(ds, cfg.split, 0);
  } catch (const std::exception& e) {
    throw InputError(e.what());
  }

  for (auto arch : archs) {
    for (int depth : depths) {
      ndl::CrossvalResult res;
      std::vector<std::size_t> fold_ids;
      if (o.fold) {
        res.report.arch = arch;
        res.report.depth = depth;
        res.report.n_bands = ds.n_bands();
        res.report.degradation_eta = cfg.degradation_eta;
        res.report.param_count = ndl::count_params(ndl::build_model(arch, depth, ds.n_bands(), 0));
        res.models.resize(1);
        res.histories.resize(1);
        res.report.folds.push_back(
            ndl::run_fold(arch, depth, ds, cfg, *o.fold, &res.models[0], &res.histories[0]));
        ndl::aggregate(res.report);
        fold_ids.push_back(*o.fold);
      } else {
        res = ndl::run_crossval(arch, depth, ds, cfg);
        for (std::size_t f = 0; f < cfg.split.folds; ++f) fold_ids.push_back(f);
      }

      json meta = base_meta("crossval", argv, o.seed);
      meta["arch"] = std::string(ndl::to_string(arch));
      meta["depth"] = depth;
      meta["source"] = data.source;
      meta["fingerprint"] = ndl::fingerprint(ds);
      meta["lr"] = o.lr;
      meta["wd"] = o.wd;
      meta["batch"] = o.batch;
      meta["epochs"] = o.epochs;
      meta["patience"] = cfg.train.patience;
      meta["eps"] = cfg.train.eps;
      meta["split_seed"] = cfg.split.seed;
      meta["noise_seed"] = cfg.noise_seed;

      const fs::path dir = fs::path(o.out) / (std::string(ndl::to_string(arch)) + "_d" +
                                             std::to_string(depth) + "_s" + std::to_string(o.seed));
      make_dir(dir);
      open_out(dir / "report.json") << ndl::report_to_json(res.report, meta).dump(1) << '\n';
      {
        std::string header;
        for (const auto& [k, v] : meta.items()) {
          header += "# " + k + ": " + (v.is_string() ? v.get<std::string>() : v.dump()) + "\n";
        }
        open_out(dir / "report.txt") << ndl::report_to_text(res.report, header + "\n");
      }
      {
        auto out = open_out(dir / "history.csv");
        out << ndl::csv_meta_header(meta);
        ndl::write_history_csv(out, res.histories, arch, depth);
      }
      {
        auto out = open_out(dir / "noise.csv");
        out << ndl::csv_meta_header(meta);
        std::vector<std::vector<ndl::NoisePoint>> per_fold;
        for (const auto& f : res.report.folds) per_fold.push_back(f.noise);
        ndl::write_sweep_csv(out, per_fold, fold_ids, arch, depth);
      }
      for (std::size_t k = 0; k < res.models.size(); ++k) {
        json cm = meta;
        cm["fold"] = fold_ids[k];
        cm["test_accuracy"] = res.report.folds[k].test_accuracy;
        ndl::save_checkpoint(res.models[k], dir / ("fold" + std::to_string(fold_ids[k]) + ".ckpt.json"), cm);
      }
      std::cout << dir.string() << ": params " << res.report.param_count << ", accuracy "
                << ndl::detail::fixed(res.report.mean_accuracy_pct, 2) << " +- "
                << ndl::detail::fixed(res.report.std_accuracy_pct, 2) << " %";
      if (res.report.mean_degradation_pp) {
        std::cout << ", degradation " << ndl::detail::fixed(*res.report.mean_degradation_pp, 2) << " pp";
      }
      std::cout << '\n';
    }
  }
  return kOk;
}

int cmd_noise(const Options& o, const std::string& argv, bool seed_given) {
  if (o.checkpoints.empty()) throw ndl::UsageError("noise needs at least one --checkpoint");
  const ndl::Vector etas = parse_etas(o.etas);
  LoadedData data = load_data(o);
  const ndl::Dataset& ds = data.dataset;

  std::vector<std::vector<ndl::NoisePoint>> per_ckpt;
  std::vector<std::size_t> folds;
  std::vector<ndl::Model> models;
  for (const auto& path : o.checkpoints) {
    if (!fs::exists(path)) throw InputError("missing checkpoint '" + path + "'");
    json ck;
    {
      std::ifstream in(path);
      try {
        in >> ck;
      } catch (const json::exception& e) {
        throw InputError("checkpoint '" + path + "': " + e.what());
      }
    }
    ndl::Model m;
    try {
      m = ndl::checkpoint_from_json(ck);
    } catch (const ndl::CheckpointError& e) {
      throw InputError(e.what());
    }
    const json cm = ck.value("meta", json::object());
    std::size_t fold = o.fold.value_or(cm.value("fold", std::size_t{0}));
    std::uint64_t seed = seed_given ? o.seed : cm.value("split_seed", o.seed);
    std::uint64_t nseed = seed_given ? o.seed : cm.value("noise_seed", o.seed);
    if (cm.contains("fingerprint") && cm["fingerprint"].get<std::uint64_t>() != ndl::fingerprint(ds)) {
      std::cerr << "ndl: warning: dataset differs from the one '" << path << "' was trained on\n";
    }
    ndl::SplitSpec sp;
    sp.seed = seed;
    if (fold >= sp.folds) throw ndl::UsageError("--fold out of range");
    ndl::Split split;
    try {
      ndl::check_compatible(m, ds, "noise");
      split = ndl::stratified_split(ds, sp, fold);
    } catch (const std::exception& e) {
      throw InputError(e.what());
    }
    per_ckpt.push_back(ndl::noise_sweep(m, split.test, etas, ndl::mix_seed(nseed, fold)));
    folds.push_back(fold);
    models.push_back(std::move(m));
  }

  make_dir(o.out);
  json meta = base_meta("noise", argv, o.seed);
  meta["source"] = data.source;
  meta["checkpoints"] = o.checkpoints;
  auto out = open_out(fs::path(o.out) / "noise_sweep.csv");
  out << ndl::csv_meta_header(meta);
  out << "eta,value,fold,arch,depth,checkpoint\n";
  for (std::size_t k = 0; k < per_ckpt.size(); ++k) {
    for (const auto& p : per_ckpt[k]) {
      out << ndl::format_double(p.eta) << ',' << ndl::format_double(p.accuracy) << ',' << folds[k] << ','
          << ndl::to_string(models[k].arch) << ',' << models[k].depth << ',' << o.checkpoints[k] << '\n';
      std::cout << o.checkpoints[k] << "  eta " << ndl::detail::fixed(p.eta, 2) << "  accuracy "
                << ndl::detail::fixed(100.0 * p.accuracy, 2) << " %\n";
    }
  }
  return kOk;
}

int cmd_coeffs(const Options& o, const std::string& argv) {
  if (o.checkpoints.size() != 1) throw ndl::UsageError("coeffs needs exactly one --checkpoint");
  const std::string& path = o.checkpoints.front();
  ndl::Model m;
  try {
    m = ndl::load_checkpoint(path);
  } catch (const ndl::CheckpointError& e) {
    throw InputError(e.what());
  }
  if (!m.has_nd_layer()) {
    throw InputError("checkpoint '" + path + "' has no ND first layer (arch " +
                     std::string(ndl::to_string(m.arch)) + ")");
  }
  const ndl::CoeffRatioMatrix ratios = ndl::coeff_ratios(m);
  const auto top = ndl::top_asymmetric(m, o.topk);

  make_dir(o.out);
  json meta = base_meta("coeffs", argv, o.seed);
  meta["checkpoint"] = path;
  {
    auto out = open_out(fs::path(o.out) / "ratios.csv");
    out << ndl::csv_meta_header(meta);
    ndl::write_ratio_csv(out, ratios);
  }
  {
    auto out = open_out(fs::path(o.out) / "topk.csv");
    out << ndl::csv_meta_header(meta);
    ndl::write_topk_csv(out, top, m.band_names);
  }
  std::cout << "rank  pair           ratio  asymmetry\n";
  for (std::size_t k = 0; k < top.size(); ++k) {
    const std::string name = m.band_names[top[k].i] + "/" + m.band_names[top[k].j];
    std::cout << ndl::detail::pad(std::to_string(k + 1), 4) << "  " << name
              << std::string(name.size() < 12 ? 12 - name.size() : 1, ' ')
              << ndl::detail::pad(ndl::detail::fixed(top[k].ratio, 4), 8)
              << ndl::detail::pad(ndl::detail::fixed(top[k].asymmetry, 4), 11) << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Normalized-difference layer experiments"};
  app.require_subcommand(1);
  Options o;
  const std::string argv_text = command_line(argc, argv);

  auto add_arch = [&](CLI::App* c) {
    c->add_option("--arch", o.archs, "Architectures: nd, mlp, attnd (comma list)")->delimiter(',');
    c->add_option("--depth", o.depths, "Depths 2..4 (comma list)")->delimiter(',');
  };
  auto add_data = [&](CLI::App* c) {
    c->add_option("--data", o.data, "Dataset CSV");
    c->add_option("--synth", o.synth, "Synthetic spec JSON");
  };
  auto add_out = [&](CLI::App* c) { c->add_option("--out", o.out, "Output directory")->capture_default_str(); };

  auto* gc = app.add_subcommand("gradcheck", "Compare analytic gradients with central differences");
  add_arch(gc);
  add_out(gc);
  gc->add_option("--trials", o.trials, "Random layer configurations per variant")->capture_default_str();
  gc->add_option("--model-trials", o.model_trials, "Random points per architecture")->capture_default_str();
  gc->add_option("--tol", o.tol, "Relative error tolerance (default 1e-5 layer, 1e-4 model)");
  gc->add_option("--eps", o.eps, "Single epsilon to check (default 1e-8 and 1e-4)");
  gc->add_option("--bands", o.bands, "Band count for whole-model checks")->capture_default_str();
  gc->add_option("--seed", o.seed, "Seed")->capture_default_str();

  auto* sy = app.add_subcommand("synth", "Generate a synthetic dataset CSV");
  sy->add_option("--synth", o.synth, "Synthetic spec JSON")->required();
  add_out(sy);
  auto* sy_seed = sy->add_option("--seed", o.seed, "Override the spec seed");

  auto* cv = app.add_subcommand("crossval", "Stratified k-fold training and evaluation");
  add_arch(cv);
  add_data(cv);
  add_out(cv);
  cv->add_option("--seed", o.seed, "Seed")->capture_default_str();
  cv->add_option("--eps", o.eps, "ND epsilon");
  cv->add_option("--lr", o.lr, "Learning rate")->capture_default_str();
  cv->add_option("--wd", o.wd, "Weight decay")->capture_default_str();
  cv->add_option("--batch", o.batch, "Batch size")->capture_default_str();
  cv->add_option("--epochs", o.epochs, "Maximum epochs")->capture_default_str();
  cv->add_option("--patience", o.patience, "Early stopping patience")->capture_default_str();
  cv->add_option("--etas", o.etas, "Noise levels (comma list)")->capture_default_str();
  cv->add_option("--fold", o.fold, "Run a single fold");

  auto* nz = app.add_subcommand("noise", "Noise sweep of trained checkpoints");
  add_data(nz);
  add_out(nz);
  nz->add_option("--checkpoint", o.checkpoints, "Checkpoint JSON (repeatable)")->delimiter(',');
  nz->add_option("--etas", o.etas, "Noise levels (comma list)")->capture_default_str();
  nz->add_option("--fold", o.fold, "Test fold (default: from checkpoint)");
  auto* nz_seed = nz->add_option("--seed", o.seed, "Split and noise seed (default: from checkpoint)");

  auto* co = app.add_subcommand("coeffs", "Export learned coefficient ratios");
  co->add_option("--checkpoint", o.checkpoints, "Checkpoint JSON");
  co->add_option("--topk", o.topk, "Number of most asymmetric pairs")->capture_default_str();
  add_out(co);
  co->add_option("--seed", o.seed, "Recorded in metadata");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), kUsage);
  }

  try {
    if (*gc) return cmd_gradcheck(o, argv_text);
    if (*sy) return cmd_synth(o, argv_text, sy_seed->count() > 0);
    if (*cv) return cmd_crossval(o, argv_text);
    if (*nz) return cmd_noise(o, argv_text, nz_seed->count() > 0);
    if (*co) return cmd_coeffs(o, argv_text);
  } catch (const InputError& e) {
    return fail("input", e.what(), kInput);
  } catch (const ndl::CheckpointError& e) {
    return fail("input", e.what(), kInput);
  } catch (const ndl::DataError& e) {
    return fail("input", e.what(), kInput);
  } catch (const ndl::UsageError& e) {
    return fail("usage", e.what(), kUsage);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), kInput);
  }
  return fail("usage", "no subcommand", kUsage);
}

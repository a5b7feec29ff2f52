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

// Serialization of evaluation results: JSON for machines, aligned text for
// people, long-format CSV for plotting.

#pragma once

#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "ndl/data.hpp"
#include "ndl/eval.hpp"

namespace ndl {

inline constexpr const char* kToolVersion = "ndl 0.1.0";

inline nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json noise_json(const std::vector<NoisePoint>& points) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : points) out.push_back({{"eta", p.eta}, {"accuracy_pct", 100.0 * p.accuracy}});
  return out;
}

inline nlohmann::json report_to_json(const EvalReport& r, const nlohmann::json& meta = nlohmann::json::object()) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : r.folds) {
    folds.push_back({{"fold", f.fold},
                     {"train_size", f.train_size},
                     {"validation_size", f.validation_size},
                     {"test_size", f.test_size},
                     {"test_accuracy_pct", 100.0 * f.test_accuracy},
                     {"best_validation_accuracy_pct", 100.0 * f.best_validation_accuracy},
                     {"restored_validation_accuracy_pct", 100.0 * f.restored_validation_accuracy},
                     {"best_epoch", f.best_epoch},
                     {"stop_epoch", f.stop_epoch},
                     {"noise", noise_json(f.noise)},
                     {"degradation_pp", optional_json(f.degradation_pp)}});
  }
  return {{"meta", meta},
          {"arch", std::string(to_string(r.arch))},
          {"depth", r.depth},
          {"n_bands", r.n_bands},
          {"param_count", r.param_count},
          {"mean_accuracy_pct", r.mean_accuracy_pct},
          {"std_accuracy_pct", r.std_accuracy_pct},
          {"efficiency", r.efficiency},
          {"degradation_eta", r.degradation_eta},
          {"mean_degradation_pp", optional_json(r.mean_degradation_pp)},
          {"mean_noise", noise_json(r.mean_noise)},
          {"folds", std::move(folds)}};
}

namespace detail {

inline std::string fixed(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

inline std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

}  // namespace detail

inline std::string report_to_text(const EvalReport& r, const std::string& header = {}) {
  using detail::fixed;
  using detail::pad;
  std::ostringstream out;
  if (!header.empty()) out << header;
  out << "architecture " << to_string(r.arch) << ", depth " << r.depth << ", " << r.n_bands
      << " bands\n";
  out << "parameters   " << r.param_count << "\n";
  out << "accuracy     " << fixed(r.mean_accuracy_pct, 2) << " +- " << fixed(r.std_accuracy_pct, 2)
      << " %\n";
  out << "efficiency   " << fixed(r.efficiency, 2) << " %/100 params\n";
  if (r.mean_degradation_pp) {
    out << "degradation  " << fixed(*r.mean_degradation_pp, 2) << " points at eta "
        << fixed(r.degradation_eta, 2) << "\n";
  }
  out << "\n"
      << pad("fold", 5) << pad("train", 7) << pad("val", 6) << pad("test", 6) << pad("best", 6)
      << pad("stop", 6) << pad("val %", 9) << pad("test %", 9) << pad("drop", 8) << "\n";
  for (const auto& f : r.folds) {
    out << pad(std::to_string(f.fold), 5) << pad(std::to_string(f.train_size), 7)
        << pad(std::to_string(f.validation_size), 6) << pad(std::to_string(f.test_size), 6)
        << pad(std::to_string(f.best_epoch), 6) << pad(std::to_string(f.stop_epoch), 6)
        << pad(fixed(100.0 * f.best_validation_accuracy, 2), 9)
        << pad(fixed(100.0 * f.test_accuracy, 2), 9)
        << pad(f.degradation_pp ? fixed(*f.degradation_pp, 2) : "-", 8) << "\n";
  }
  if (!r.mean_noise.empty()) {
    out << "\n" << pad("eta", 6) << pad("acc %", 9) << "\n";
    for (const auto& p : r.mean_noise) {
      out << pad(fixed(p.eta, 2), 6) << pad(fixed(100.0 * p.accuracy, 2), 9) << "\n";
    }
  }
  return out.str();
}

/// `# key: value` provenance lines for CSV outputs.
inline std::string csv_meta_header(const nlohmann::json& meta) {
  std::string s;
  for (const auto& [key, value] : meta.items()) {
    s += "# " + key + ": " + (value.is_string() ? value.get<std::string>() : value.dump()) + "\n";
  }
  return s;
}

/// Long format: epoch, metric, value, fold, arch, depth.
inline void write_history_csv(std::ostream& out, const std::vector<TrainHistory>& histories, Arch arch,
                              int depth) {
  out << "epoch,metric,value,fold,arch,depth\n";
  for (std::size_t f = 0; f < histories.size(); ++f) {
    for (const auto& e : histories[f].epochs) {
      const std::pair<const char*, double> rows[] = {{"train_loss", e.train_loss},
                                                     {"validation_loss", e.validation_loss},
                                                     {"validation_accuracy", e.validation_accuracy}};
      for (const auto& [name, value] : rows) {
        out << e.epoch << ',' << name << ',' << format_double(value) << ',' << f << ','
            << to_string(arch) << ',' << depth << '\n';
      }
    }
  }
}

/// Long format: eta, value (accuracy fraction), fold, arch, depth.
inline void write_sweep_csv(std::ostream& out, const std::vector<std::vector<NoisePoint>>& per_fold,
                            const std::vector<std::size_t>& folds, Arch arch, int depth,
                            bool with_header = true) {
  if (with_header) out << "eta,value,fold,arch,depth\n";
  for (std::size_t k = 0; k < per_fold.size(); ++k) {
    for (const auto& p : per_fold[k]) {
      out << format_double(p.eta) << ',' << format_double(p.accuracy) << ',' << folds[k] << ','
          << to_string(arch) << ',' << depth << '\n';
    }
  }
}

inline void write_ratio_csv(std::ostream& out, const CoeffRatioMatrix& m) {
  out << "band";
  for (const auto& name : m.band_names) out << ',' << name;
  out << '\n';
  for (std::size_t r = 0; r < m.ratios.rows(); ++r) {
    out << m.band_names[r];
    for (std::size_t c = 0; c < m.ratios.cols(); ++c) out << ',' << format_double(m.ratios(r, c));
    out << '\n';
  }
}

inline void write_topk_csv(std::ostream& out, const std::vector<AsymmetricPair>& top,
                           const std::vector<std::string>& band_names) {
  out << "rank,pair,band_i,band_j,ratio,asymmetry\n";
  for (std::size_t k = 0; k < top.size(); ++k) {
    out << k + 1 << ',' << top[k].pair << ',' << band_names[top[k].i] << ',' << band_names[top[k].j]
        << ',' << format_double(top[k].ratio) << ',' << format_double(top[k].asymmetry) << '\n';
  }
}

inline nlohmann::json gradcheck_to_json(const std::vector<GradcheckReport>& reports) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json fams = nlohmann::json::object();
    for (const auto& [name, f] : r.families) {
      fams[name] = {{"max_relative_error", f.max_relative_error}, {"checked", f.checked}};
    }
    out.push_back({{"target", r.target},
                   {"trials", r.trials},
                   {"tolerance", r.tolerance},
                   {"passed", r.passed()},
                   {"families", std::move(fams)}});
  }
  return out;
}

}  // namespace ndl

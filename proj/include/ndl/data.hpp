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

// Tabular band datasets: CSV I/O, stratified k-fold splits, a synthetic
// spectral generator and the multiplicative noise injector.

#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "ndl/math.hpp"

namespace ndl {

/// Malformed or invalid input data. Carries 1-based row/column when known.
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& what, std::size_t row = 0, std::size_t column = 0)
      : std::runtime_error(format(what, row, column)), row_(row), column_(column) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  static std::string format(const std::string& what, std::size_t row, std::size_t column) {
    std::string s = what;
    if (row > 0) s += " (row " + std::to_string(row);
    if (row > 0 && column > 0) s += ", column " + std::to_string(column);
    if (row > 0) s += ")";
    return s;
  }

  std::size_t row_;
  std::size_t column_;
};

struct Dataset {
  std::vector<std::string> band_names;
  std::vector<Vector> samples;
  std::vector<int> labels;

  std::size_t size() const noexcept { return samples.size(); }
  std::size_t n_bands() const noexcept { return band_names.size(); }
  bool empty() const noexcept { return samples.empty(); }

  std::size_t count_label(int label) const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
  }

  /// Checks shape, labels and finiteness; reflectances must be >= 0 unless
  /// `allow_negative` (noisy copies may dip below zero).
  void validate(bool allow_negative = false) const {
    if (band_names.empty()) throw DataError("dataset has no bands");
    if (samples.size() != labels.size()) throw DataError("sample/label count mismatch");
    for (std::size_t r = 0; r < samples.size(); ++r) {
      if (samples[r].size() != band_names.size()) {
        throw DataError("row has " + std::to_string(samples[r].size()) + " values, expected " +
                            std::to_string(band_names.size()),
                        r + 1);
      }
      for (std::size_t c = 0; c < samples[r].size(); ++c) {
        const double v = samples[r][c];
        if (!std::isfinite(v)) throw DataError("non-finite reflectance", r + 1, c + 1);
        if (!allow_negative && v < 0.0) throw DataError("negative reflectance", r + 1, c + 1);
      }
      if (labels[r] != 0 && labels[r] != 1) {
        throw DataError("label must be 0 or 1, got " + std::to_string(labels[r]), r + 1,
                        band_names.size() + 1);
      }
    }
  }

  Dataset subset(const std::vector<std::size_t>& indices) const {
    Dataset out{band_names, {}, {}};
    out.samples.reserve(indices.size());
    out.labels.reserve(indices.size());
    for (std::size_t idx : indices) {
      out.samples.push_back(samples.at(idx));
      out.labels.push_back(labels.at(idx));
    }
    return out;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// FNV-1a over band names, raw value bits and labels.
inline std::uint64_t fingerprint(const Dataset& ds) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t k = 0; k < n; ++k) {
      h ^= p[k];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& name : ds.band_names) mix(name.data(), name.size());
  for (std::size_t r = 0; r < ds.size(); ++r) {
    mix(ds.samples[r].data(), ds.samples[r].size() * sizeof(double));
    mix(&ds.labels[r], sizeof(int));
  }
  return h;
}

/// Shortest decimal string that parses back to the same double.
inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf.data(), end);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

inline bool parse_double(std::string_view cell, double& out) {
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  if (cell.empty()) return false;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  return ec == std::errc() && ptr == cell.data() + cell.size();
}

}  // namespace detail

/// Parses `band_1,...,band_n,label` CSV. Lines starting with '#' are skipped.
inline Dataset parse_csv(std::istream& in) {
  Dataset ds;
  std::string line;
  std::size_t row = 0;  // data row number, 1-based
  bool have_header = false;
  while (std::getline(in, line)) {
    const std::string_view view = detail::trim(line);
    if (view.empty() || view.front() == '#') continue;
    auto cells = detail::split_commas(view);
    if (!have_header) {
      if (cells.size() < 2 || cells.back() != "label") {
        throw DataError("missing header: expected band names followed by 'label'");
      }
      for (std::size_t c = 0; c + 1 < cells.size(); ++c) {
        if (cells[c].empty()) throw DataError("empty band name in header", 0, c + 1);
        ds.band_names.emplace_back(cells[c]);
      }
      have_header = true;
      continue;
    }
    ++row;
    if (cells.size() != ds.band_names.size() + 1) {
      throw DataError("expected " + std::to_string(ds.band_names.size() + 1) + " cells, got " +
                          std::to_string(cells.size()),
                      row);
    }
    Vector values(ds.band_names.size());
    for (std::size_t c = 0; c < values.size(); ++c) {
      if (!detail::parse_double(cells[c], values[c])) {
        throw DataError("non-numeric cell '" + std::string(cells[c]) + "'", row, c + 1);
      }
      if (!std::isfinite(values[c])) throw DataError("non-finite reflectance", row, c + 1);
      if (values[c] < 0.0) throw DataError("negative reflectance", row, c + 1);
    }
    double label_value = 0.0;
    if (!detail::parse_double(cells.back(), label_value)) {
      throw DataError("non-numeric label '" + std::string(cells.back()) + "'", row, cells.size());
    }
    if (label_value != 0.0 && label_value != 1.0) {
      throw DataError("label must be 0 or 1, got " + std::string(cells.back()), row, cells.size());
    }
    ds.samples.push_back(std::move(values));
    ds.labels.push_back(static_cast<int>(label_value));
  }
  if (!have_header) throw DataError("missing header: file is empty");
  return ds;
}

inline Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path.string() + "'");
  try {
    return parse_csv(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

inline void write_csv(std::ostream& out, const Dataset& ds) {
  for (std::size_t c = 0; c < ds.band_names.size(); ++c) out << ds.band_names[c] << ',';
  out << "label\n";
  for (std::size_t r = 0; r < ds.size(); ++r) {
    for (double v : ds.samples[r]) out << format_double(v) << ',';
    out << ds.labels[r] << '\n';
  }
}

inline void save_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write dataset '" + path.string() + "'");
  write_csv(out, ds);
}

/// splitmix64 finalizer, used to derive independent seeds.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

struct SplitSpec {
  double train_fraction = 0.70;
  double validation_fraction = 0.20;
  double test_fraction = 0.10;
  std::size_t folds = 10;
  std::uint64_t seed = 0;

  void validate() const {
    if (folds < 2) throw UsageError("SplitSpec: need at least 2 folds");
    if (!(train_fraction > 0.0) || !(validation_fraction > 0.0) || !(test_fraction > 0.0)) {
      throw UsageError("SplitSpec: fractions must be positive");
    }
    if (std::abs(train_fraction + validation_fraction + test_fraction - 1.0) > 1e-9) {
      throw UsageError("SplitSpec: fractions must sum to 1");
    }
    if (std::abs(test_fraction - 1.0 / static_cast<double>(folds)) > 1e-9) {
      throw UsageError("SplitSpec: test fraction must equal 1/folds");
    }
  }
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

struct Split {
  Dataset train;
  Dataset validation;
  Dataset test;
};

/// Stratified fold assignment.
///
/// Each class is shuffled on its own (seeded) and dealt round-robin into the
/// folds; fold `fold` is the test set. The remaining members are taken in
/// dealt order starting just after the test fold, and the first share goes to
/// training. The class-1 count of the training part is chosen so that both
/// training and validation stay within one sample of the global proportion.
inline SplitIndices stratified_split_indices(const Dataset& ds, const SplitSpec& spec,
                                             std::size_t fold) {
  spec.validate();
  if (fold >= spec.folds) {
    throw UsageError("stratified_split: fold " + std::to_string(fold) + " out of range");
  }
  std::array<std::vector<std::size_t>, 2> members;
  for (std::size_t r = 0; r < ds.size(); ++r) members.at(static_cast<std::size_t>(ds.labels[r])).push_back(r);
  for (int c = 0; c < 2; ++c) {
    if (members[c].size() < spec.folds) {
      throw DataError("class " + std::to_string(c) + " has " + std::to_string(members[c].size()) +
                      " samples, fewer than the " + std::to_string(spec.folds) + " folds");
    }
  }

  SplitIndices out;
  std::array<std::vector<std::size_t>, 2> rest;
  for (std::size_t c = 0; c < 2; ++c) {
    auto order = members[c];
    std::mt19937_64 rng(mix_seed(spec.seed, c));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      if (pos % spec.folds == fold) out.test.push_back(order[pos]);
    }
    // Remaining members ordered by fold distance after the test fold.
    for (std::size_t step = 1; step < spec.folds; ++step) {
      const std::size_t f = (fold + step) % spec.folds;
      for (std::size_t pos = f; pos < order.size(); pos += spec.folds) rest[c].push_back(order[pos]);
    }
  }

  const double p1 = static_cast<double>(members[1].size()) / static_cast<double>(ds.size());
  const std::size_t rest_total = rest[0].size() + rest[1].size();
  const double train_share = spec.train_fraction / (spec.train_fraction + spec.validation_fraction);
  const auto train_total = static_cast<std::size_t>(std::llround(train_share * static_cast<double>(rest_total)));
  // Offset halfway toward the remainder's own imbalance so neither part drifts.
  const double imbalance = static_cast<double>(rest[1].size()) - p1 * static_cast<double>(rest_total);
  long long train1 = std::llround(p1 * static_cast<double>(train_total) + 0.5 * imbalance);
  const long long lo = std::max(0LL, static_cast<long long>(train_total) - static_cast<long long>(rest[0].size()));
  const long long hi = std::min(static_cast<long long>(train_total), static_cast<long long>(rest[1].size()));
  train1 = std::clamp(train1, lo, hi);
  const std::array<std::size_t, 2> take{train_total - static_cast<std::size_t>(train1),
                                        static_cast<std::size_t>(train1)};
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t k = 0; k < rest[c].size(); ++k) {
      (k < take[c] ? out.train : out.validation).push_back(rest[c][k]);
    }
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.validation.begin(), out.validation.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

inline Split stratified_split(const Dataset& ds, const SplitSpec& spec, std::size_t fold) {
  const SplitIndices idx = stratified_split_indices(ds, spec, fold);
  return {ds.subset(idx.train), ds.subset(idx.validation), ds.subset(idx.test)};
}

/// Parameters of the synthetic two-class spectral generator.
///
/// Each sample is gain * (mean[label] + within_class_scale * mean[label] * z),
/// z standard normal per band and gain uniform in [gain_min, gain_max] per sample.
struct SynthSpec {
  std::size_t samples = 2000;
  std::vector<std::string> band_names;
  std::array<Vector, 2> class_means;
  double within_class_scale = 0.05;
  double gain_min = 0.5;
  double gain_max = 2.0;
  double class1_fraction = 0.5;
  std::uint64_t seed = 0;

  std::size_t n_bands() const noexcept { return class_means[0].size(); }

  void validate() const {
    if (samples == 0) throw UsageError("synth spec: 'samples' must be positive");
    const std::size_t n = class_means[0].size();
    if (n < 2) throw UsageError("synth spec: 'class_means' need at least 2 bands");
    if (class_means[1].size() != n) {
      throw UsageError("synth spec: 'class_means' rows must have equal length");
    }
    if (!band_names.empty() && band_names.size() != n) {
      throw UsageError("synth spec: 'band_names' length must match 'class_means'");
    }
    for (const auto& m : class_means) {
      for (double v : m) {
        if (!(v > 0.0) || !std::isfinite(v)) {
          throw UsageError("synth spec: 'class_means' entries must be positive");
        }
      }
    }
    if (!(within_class_scale >= 0.0) || !std::isfinite(within_class_scale)) {
      throw UsageError("synth spec: 'within_class_scale' must be >= 0");
    }
    if (!(gain_min > 0.0) || !(gain_max >= gain_min) || !std::isfinite(gain_max)) {
      throw UsageError("synth spec: gain range must satisfy 0 < 'gain_min' <= 'gain_max'");
    }
    if (!(class1_fraction > 0.0) || !(class1_fraction < 1.0)) {
      throw UsageError("synth spec: 'class1_fraction' must be in (0, 1)");
    }
  }
};

inline void to_json(nlohmann::json& j, const SynthSpec& s) {
  j = nlohmann::json{{"samples", s.samples},
                     {"band_names", s.band_names},
                     {"class_means", {s.class_means[0], s.class_means[1]}},
                     {"within_class_scale", s.within_class_scale},
                     {"gain_min", s.gain_min},
                     {"gain_max", s.gain_max},
                     {"class1_fraction", s.class1_fraction},
                     {"seed", s.seed}};
}

inline void from_json(const nlohmann::json& j, SynthSpec& s) {
  auto field = [&j](const char* name) -> const nlohmann::json& {
    if (!j.contains(name)) throw UsageError(std::string("synth spec: missing field '") + name + "'");
    return j.at(name);
  };
  try {
    s.samples = field("samples").get<std::size_t>();
    const auto& means = field("class_means");
    if (!means.is_array() || means.size() != 2) {
      throw UsageError("synth spec: 'class_means' must hold exactly two spectra");
    }
    s.class_means = {means[0].get<Vector>(), means[1].get<Vector>()};
    s.band_names = j.value("band_names", std::vector<std::string>{});
    s.within_class_scale = j.value("within_class_scale", 0.05);
    s.gain_min = j.value("gain_min", 0.5);
    s.gain_max = j.value("gain_max", 2.0);
    s.class1_fraction = j.value("class1_fraction", 0.5);
    s.seed = j.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("synth spec: ") + e.what());
  }
}

inline SynthSpec load_synth_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open synth spec '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("synth spec '" + path.string() + "': " + e.what());
  }
  SynthSpec spec = j.get<SynthSpec>();
  spec.validate();
  return spec;
}

inline Dataset synth_generate(const SynthSpec& spec) {
  spec.validate();
  constexpr double kFloor = 1e-4;
  const std::size_t n = spec.n_bands();

  Dataset ds;
  ds.band_names = spec.band_names;
  if (ds.band_names.empty()) {
    for (std::size_t k = 0; k < n; ++k) ds.band_names.push_back("band_" + std::to_string(k + 1));
  }

  const auto n1 = static_cast<std::size_t>(
      std::llround(spec.class1_fraction * static_cast<double>(spec.samples)));
  ds.labels.assign(spec.samples, 0);
  std::fill(ds.labels.begin(), ds.labels.begin() + static_cast<std::ptrdiff_t>(n1), 1);

  std::mt19937_64 rng(spec.seed);
  std::shuffle(ds.labels.begin(), ds.labels.end(), rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  ds.samples.reserve(spec.samples);
  for (std::size_t r = 0; r < spec.samples; ++r) {
    const Vector& mean = spec.class_means[static_cast<std::size_t>(ds.labels[r])];
    const double gain = spec.gain_min + (spec.gain_max - spec.gain_min) * unit(rng);
    Vector row(n);
    for (std::size_t k = 0; k < n; ++k) {
      double v = mean[k];
      if (spec.within_class_scale > 0.0) {
        v = mean[k] * (1.0 + spec.within_class_scale * normal(rng));
        for (int attempt = 0; attempt < 16 && v < kFloor; ++attempt) {
          v = mean[k] * (1.0 + spec.within_class_scale * normal(rng));
        }
      }
      row[k] = gain * std::max(v, kFloor);
    }
    ds.samples.push_back(std::move(row));
  }
  return ds;
}

/// Returns a copy with every value replaced by b + eta * |b| * z, z ~ N(0, 1)
/// drawn independently per value. No clamping; results may be negative.
inline Dataset inject_noise(const Dataset& ds, double eta, std::uint64_t seed) {
  if (!(eta >= 0.0) || eta > 0.5) throw UsageError("inject_noise: eta must be in [0, 0.5]");
  Dataset out = ds;
  if (eta == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& row : out.samples) {
    for (double& b : row) b += eta * std::abs(b) * normal(rng);
  }
  return out;
}

}  // namespace ndl

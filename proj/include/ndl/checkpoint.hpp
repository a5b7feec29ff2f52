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

// Checkpoints are JSON documents:
//
//   {
//     "format": "ndl-checkpoint", "version": 1,
//     "arch": "nd", "depth": 2, "eps": 1e-08,
//     "band_names": [...],
//     "nd": {"alpha": [...], "beta": [...]},            // nd / attnd only
//     "attention": {"rows": P, "cols": n,                // attnd only
//                   "weights": [...], "bias": [...]},
//     "dense": [{"rows": r, "cols": c, "activation": "relu",
//                "weights": [...], "bias": [...]}, ...],
//     "meta": {...}                                      // free-form provenance
//   }
//
// Doubles are written as shortest round-trip decimals, so loading a saved
// checkpoint reproduces every parameter bit for bit.

#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "ndl/network.hpp"

namespace ndl {

inline constexpr const char* kCheckpointFormat = "ndl-checkpoint";
inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline nlohmann::json checkpoint_to_json(const Model& m, const nlohmann::json& meta = nlohmann::json::object()) {
  using nlohmann::json;
  json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["arch"] = std::string(to_string(m.arch));
  j["depth"] = m.depth;
  j["eps"] = m.eps.eps;
  j["band_names"] = m.band_names;
  if (m.has_nd_layer()) {
    j["nd"] = {{"alpha", m.params.nd.alpha}, {"beta", m.params.nd.beta}};
  }
  if (m.has_attention()) {
    const auto w = m.params.gate.weights.values();
    j["attention"] = {{"rows", m.params.gate.weights.rows()},
                      {"cols", m.params.gate.weights.cols()},
                      {"weights", Vector(w.begin(), w.end())},
                      {"bias", m.params.gate.bias}};
  }
  json dense = json::array();
  for (const auto& layer : m.params.dense) {
    const auto w = layer.weights.values();
    dense.push_back({{"rows", layer.weights.rows()},
                     {"cols", layer.weights.cols()},
                     {"activation", std::string(to_string(layer.activation))},
                     {"weights", Vector(w.begin(), w.end())},
                     {"bias", layer.bias}});
  }
  j["dense"] = std::move(dense);
  j["meta"] = meta;
  return j;
}

inline Model checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", std::string()) != kCheckpointFormat) {
      throw CheckpointError("not an ndl checkpoint (missing 'format')");
    }
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw CheckpointError("unsupported checkpoint version");
    }
    Model m;
    m.arch = parse_arch(j.at("arch").get<std::string>());
    m.depth = j.at("depth").get<int>();
    m.eps.eps = j.at("eps").get<double>();
    m.eps.validate();
    m.band_names = j.at("band_names").get<std::vector<std::string>>();
    m.n_bands = m.band_names.size();
    if (m.has_nd_layer()) {
      m.params.nd = NdParams{m.n_bands, j.at("nd").at("alpha").get<Vector>(),
                             j.at("nd").at("beta").get<Vector>()};
      m.params.nd.validate();
    }
    if (m.has_attention()) {
      const auto& a = j.at("attention");
      m.params.gate.weights = Matrix(a.at("rows").get<std::size_t>(), a.at("cols").get<std::size_t>(),
                                     a.at("weights").get<Vector>());
      m.params.gate.bias = a.at("bias").get<Vector>();
    }
    for (const auto& d : j.at("dense")) {
      DenseLayer layer{Matrix(d.at("rows").get<std::size_t>(), d.at("cols").get<std::size_t>(),
                              d.at("weights").get<Vector>()),
                       d.at("bias").get<Vector>(),
                       parse_activation(d.at("activation").get<std::string>())};
      if (layer.bias.size() != layer.weights.rows()) {
        throw CheckpointError("dense layer bias length does not match its rows");
      }
      m.params.dense.push_back(std::move(layer));
    }
    if (m.params.dense.empty() || m.params.dense.back().weights.rows() != 1) {
      throw CheckpointError("checkpoint has no single-logit output layer");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  } catch (const UsageError& e) {
    throw CheckpointError(std::string("invalid checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const Model& m, const std::filesystem::path& path,
                            const nlohmann::json& meta = nlohmann::json::object()) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint '" + path.string() + "'");
  out << checkpoint_to_json(m, meta).dump(1) << '\n';
}

inline Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("checkpoint '" + path.string() + "': " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace ndl

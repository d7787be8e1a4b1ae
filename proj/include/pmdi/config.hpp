// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmdi/lhe.hpp"
#include "pmdi/model.hpp"
#include "pmdi/protocol.hpp"
#include "pmdi/ring.hpp"

namespace pmdi {

/// Run configuration, read from JSON:
///
///   {
///     "model": "model.json",            // or "preset": "minionn-toy", "model_seed": 1
///     "ring": {"bit_width": 32, "frac_bits": 12},
///     "kappa": 128,
///     "clusters": {"P": 2, "T": 1},
///     "gamma": [1.0, 1.0],
///     "seed": 1,
///     "he": {"backend": "paillier", "key_bits": 2048},
///     "transport": {"kind": "sim", "base_port": 39100, "latency_s": 0, "bytes_per_s": 0,
///                   "layer_delay_s": 0, "gamma_delay": false, "pipelined": true},
///     "inputs": {"values": [[0.5, -1.0]]},  // or {"count": 4, "seed": 7, "range": 1.0}
///     "out": "out"
///   }
///
/// Relative paths resolve against the directory holding the config file.
struct RunConfig {
  std::optional<std::filesystem::path> model_path;
  std::optional<std::string> preset;
  std::uint64_t model_seed = 1;
  double weight_scale = 1.0;
  RingParams ring;

  unsigned kappa = 128;
  std::size_t clusters = 1;
  std::size_t colluding = 1;
  std::vector<double> gamma;
  std::uint64_t seed = 1;
  lhe::Backend he_backend = lhe::Backend::Paillier;
  unsigned he_bits = 2048;

  TransportKind transport = TransportKind::Sim;
  std::uint16_t base_port = 39100;
  double latency_s = 0;
  double bytes_per_s = 0;
  double layer_delay_s = 0;
  bool gamma_delay = false;
  bool pipelined = true;

  std::vector<std::vector<double>> input_values;
  std::size_t random_inputs = 0;
  std::uint64_t input_seed = 7;
  double input_range = 1.0;

  std::filesystem::path out_dir = "out";

  /// Throws ConfigError.
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  /// Throws ConfigError.
  void validate() const;
  /// Reads the model file or generates the preset with this config's ring.
  ModelSpec load_model() const;
  /// Encoded client inputs; random inputs are uniform in [-range, range].
  std::vector<RingVector> inputs(const ModelSpec& model) const;
  std::size_t session_count() const noexcept {
    return input_values.empty() ? random_inputs : input_values.size();
  }
  ProtocolConfig protocol() const;
  LatencyModel latency() const { return {latency_s, bytes_per_s}; }
};

}  // namespace pmdi

// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmdi/gc.hpp"
#include "pmdi/kernels.hpp"
#include "pmdi/ring.hpp"

namespace pmdi {

/// Dense layer y = M x (convolutions are supplied pre-lowered to this form),
/// optionally followed by an activation and a shift by frac_bits.
struct LayerSpec {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint64_t> weights;  // row-major, fixed-point encoded
  gc::Activation activation = gc::Activation::None;

  bool has_nonlinear() const noexcept { return activation != gc::Activation::None; }
  std::size_t params() const noexcept { return rows * cols; }
};

struct ModelSpec {
  RingParams ring;
  std::size_t input_dim = 0;
  std::vector<LayerSpec> layers;

  /// Throws ConfigError if L == 0, dims are zero, weight counts are wrong, or the chain breaks.
  void validate() const;
  std::size_t layer_count() const noexcept { return layers.size(); }
  std::size_t output_dim() const { return layers.back().rows; }
  std::size_t total_params() const noexcept;
  /// Fixed-point scale of the output when the input uses frac_bits: each purely
  /// linear layer adds frac_bits, a truncating nonlinear layer adds none.
  unsigned output_frac_bits() const noexcept;
};

/// Public architecture: dims and activation tags, no weights.
struct ModelShape {
  RingParams ring;
  std::size_t input_dim = 0;
  struct Layer {
    std::size_t rows = 0;
    std::size_t cols = 0;
    gc::Activation activation = gc::Activation::None;
    bool has_nonlinear() const noexcept { return activation != gc::Activation::None; }
  };
  std::vector<Layer> layers;

  static ModelShape of(const ModelSpec& m);
  std::size_t layer_count() const noexcept { return layers.size(); }
  std::size_t nonlinear_count() const noexcept;
};

/// Reference inference using the same ring and truncation pipeline as the protocol.
RingVector oracle_infer(const ModelSpec& model, const RingVector& x, Exec exec = Exec::Parallel);

nlohmann::json model_to_json(const ModelSpec& m);
ModelSpec model_from_json(const nlohmann::json& j);
void save_model(const ModelSpec& m, const std::filesystem::path& path);
ModelSpec load_model(const std::filesystem::path& path);

struct ModelGenOptions {
  std::vector<std::size_t> dims;  // input dim followed by each layer's output dim
  std::vector<gc::Activation> activations;  // one per layer
  RingParams ring;
  std::uint64_t seed = 1;
  /// Weights are uniform in [-scale/sqrt(cols), scale/sqrt(cols)].
  double weight_scale = 1.0;
};

/// Throws ConfigError for zero dims or mismatched activation count.
ModelSpec generate_model(const ModelGenOptions& opts);

/// Named architectures for genmodel; each entry lists dims and activations.
struct ModelPreset {
  std::string name;
  std::vector<std::size_t> dims;
  std::vector<gc::Activation> activations;
};
const std::vector<ModelPreset>& model_presets();
const ModelPreset& find_preset(const std::string& name);

}  // namespace pmdi

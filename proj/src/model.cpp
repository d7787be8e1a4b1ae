// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#include "pmdi/model.hpp"

#include <cmath>
#include <fstream>

#include "pmdi/bytes.hpp"
#include "pmdi/errors.hpp"
#include "pmdi/prg.hpp"

namespace pmdi {

void ModelSpec::validate() const {
  ring.validate();
  if (layers.empty()) throw ConfigError("model must have at least one layer");
  if (input_dim == 0) throw ConfigError("model input_dim must be positive");
  std::size_t expect = input_dim;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    const std::string where = "layer " + std::to_string(l + 1);
    if (layer.rows == 0 || layer.cols == 0) throw ConfigError(where + ": zero dimension");
    if (layer.cols != expect) {
      throw ConfigError(where + ": expects " + std::to_string(layer.cols) + " inputs but previous layer gives " +
                        std::to_string(expect));
    }
    if (layer.weights.size() != layer.rows * layer.cols) throw ConfigError(where + ": weight count != rows * cols");
    for (auto w : layer.weights) {
      if ((w & ~ring.mask()) != 0) throw ConfigError(where + ": weight not reduced mod 2^N");
    }
    expect = layer.rows;
  }
}

std::size_t ModelSpec::total_params() const noexcept {
  std::size_t total = 0;
  for (const auto& l : layers) total += l.params();
  return total;
}

unsigned ModelSpec::output_frac_bits() const noexcept {
  unsigned f = ring.frac_bits;
  for (const auto& l : layers) {
    if (!l.has_nonlinear()) f += ring.frac_bits;
  }
  return f;
}

ModelShape ModelShape::of(const ModelSpec& m) {
  ModelShape s;
  s.ring = m.ring;
  s.input_dim = m.input_dim;
  for (const auto& l : m.layers) s.layers.push_back({l.rows, l.cols, l.activation});
  return s;
}

std::size_t ModelShape::nonlinear_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.has_nonlinear() ? 1 : 0;
  return n;
}

RingVector oracle_infer(const ModelSpec& model, const RingVector& x, Exec exec) {
  if (x.size() != model.input_dim) throw DimensionError("oracle_infer: input length != model input_dim");
  const RingParams& p = model.ring;
  RingVector cur = x;
  for (const auto& layer : model.layers) {
    RingVector y = kernels::matvec(p, layer.weights, layer.rows, layer.cols, cur, exec);
    if (layer.has_nonlinear()) {
      for (auto& v : y.raw()) {
        v = ring::is_negative(p, v) ? 0 : ring::truncate(p, {v}, p.frac_bits).value;
      }
    }
    cur = std::move(y);
  }
  return cur;
}

nlohmann::json model_to_json(const ModelSpec& m) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : m.layers) {
    ByteWriter w;
    write_ring_values(w, RingVector(m.ring, l.weights));
    layers.push_back({{"rows", l.rows},
                      {"cols", l.cols},
                      {"activation", gc::to_string(l.activation)},
                      {"weights", base64_encode(w.view())}});
  }
  return {{"schema", 1},
          {"ring", {{"bit_width", m.ring.bit_width}, {"frac_bits", m.ring.frac_bits}}},
          {"input_dim", m.input_dim},
          {"layers", layers}};
}

ModelSpec model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema").get<int>() != 1) throw ConfigError("model: unsupported schema version");
    ModelSpec m;
    m.ring.bit_width = j.at("ring").at("bit_width").get<unsigned>();
    m.ring.frac_bits = j.at("ring").at("frac_bits").get<unsigned>();
    m.ring.validate();
    m.input_dim = j.at("input_dim").get<std::size_t>();
    for (const auto& jl : j.at("layers")) {
      LayerSpec l;
      l.rows = jl.at("rows").get<std::size_t>();
      l.cols = jl.at("cols").get<std::size_t>();
      l.activation = gc::parse_activation(jl.value("activation", std::string("none")));
      const Bytes raw = base64_decode(jl.at("weights").get<std::string>());
      if (raw.size() != l.rows * l.cols * m.ring.element_bytes()) {
        throw ConfigError("model: weight blob size does not match rows * cols");
      }
      ByteReader r(raw);
      l.weights = read_ring_values(r, m.ring, l.rows * l.cols).raw();
      m.layers.push_back(std::move(l));
    }
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model: malformed JSON: ") + e.what());
  }
}

void save_model(const ModelSpec& m, const std::filesystem::path& path) {
  m.validate();
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write model file " + path.string());
  out << model_to_json(m).dump(2) << '\n';
}

ModelSpec load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read model file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("model " + path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

ModelSpec generate_model(const ModelGenOptions& opts) {
  opts.ring.validate();
  if (opts.dims.size() < 2) throw ConfigError("genmodel: need an input dim and at least one layer dim");
  if (opts.activations.size() != opts.dims.size() - 1) {
    throw ConfigError("genmodel: need one activation per layer");
  }
  for (auto d : opts.dims) {
    if (d == 0) throw ConfigError("genmodel: dimensions must be positive");
  }
  Prg rng(seed_from_u64(opts.seed), 0x6d6f64656cULL);
  ModelSpec m;
  m.ring = opts.ring;
  m.input_dim = opts.dims.front();
  for (std::size_t l = 0; l + 1 < opts.dims.size(); ++l) {
    LayerSpec layer;
    layer.cols = opts.dims[l];
    layer.rows = opts.dims[l + 1];
    layer.activation = opts.activations[l];
    const double bound = opts.weight_scale / std::sqrt(static_cast<double>(layer.cols));
    layer.weights.resize(layer.rows * layer.cols);
    for (auto& w : layer.weights) {
      const double u = static_cast<double>(rng.next_bits(53)) / 9007199254740992.0;  // [0, 1)
      w = ring::encode_fixed((2 * u - 1) * bound, m.ring).value;
    }
    m.layers.push_back(std::move(layer));
  }
  m.validate();
  return m;
}

const std::vector<ModelPreset>& model_presets() {
  using gc::Activation;
  static const std::vector<ModelPreset> presets = {
      {"minionn-toy", {16, 16, 16, 8}, {Activation::ReLU, Activation::ReLU, Activation::None}},
      {"minionn-mnist-lite",
       {64, 64, 32, 32, 16, 10},
       {Activation::ReLU, Activation::ReLU, Activation::ReLU, Activation::ReLU, Activation::None}},
      {"mlp2", {32, 16, 10}, {Activation::ReLU, Activation::None}},
      {"deep8",
       {16, 16, 16, 16, 16, 16, 16, 16, 8},
       {Activation::ReLU, Activation::ReLU, Activation::ReLU, Activation::ReLU, Activation::ReLU,
        Activation::ReLU, Activation::ReLU, Activation::None}},
  };
  return presets;
}

const ModelPreset& find_preset(const std::string& name) {
  for (const auto& p : model_presets()) {
    if (p.name == name) return p;
  }
  throw ConfigError("unknown model preset '" + name + "'");
}

}  // namespace pmdi

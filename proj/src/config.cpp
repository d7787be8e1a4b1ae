// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#include "pmdi/config.hpp"

#include <fstream>

#include "pmdi/errors.hpp"
#include "pmdi/prg.hpp"

namespace pmdi {

namespace {

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  if (j.contains("model")) c.model_path = resolve(base_dir, get_or<std::string>(j, "model", ""));
  if (j.contains("preset")) c.preset = get_or<std::string>(j, "preset", "");
  c.model_seed = get_or<std::uint64_t>(j, "model_seed", c.model_seed);
  c.weight_scale = get_or<double>(j, "weight_scale", c.weight_scale);
  if (j.contains("ring")) {
    const auto& r = j.at("ring");
    c.ring.bit_width = get_or<unsigned>(r, "bit_width", c.ring.bit_width);
    c.ring.frac_bits = get_or<unsigned>(r, "frac_bits", c.ring.frac_bits);
  }
  c.kappa = get_or<unsigned>(j, "kappa", c.kappa);
  if (j.contains("clusters")) {
    const auto& k = j.at("clusters");
    c.clusters = get_or<std::size_t>(k, "P", c.clusters);
    c.colluding = get_or<std::size_t>(k, "T", c.colluding);
  }
  c.gamma = get_or<std::vector<double>>(j, "gamma", {});
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  if (j.contains("he")) {
    const auto& h = j.at("he");
    c.he_backend = lhe::parse_backend(get_or<std::string>(h, "backend", "paillier"));
    c.he_bits = get_or<unsigned>(h, "key_bits", c.he_bits);
  }
  if (j.contains("transport")) {
    const auto& t = j.at("transport");
    c.transport = parse_transport(get_or<std::string>(t, "kind", "sim"));
    c.base_port = get_or<std::uint16_t>(t, "base_port", c.base_port);
    c.latency_s = get_or<double>(t, "latency_s", c.latency_s);
    c.bytes_per_s = get_or<double>(t, "bytes_per_s", c.bytes_per_s);
    c.layer_delay_s = get_or<double>(t, "layer_delay_s", c.layer_delay_s);
    c.gamma_delay = get_or<bool>(t, "gamma_delay", c.gamma_delay);
    c.pipelined = get_or<bool>(t, "pipelined", c.pipelined);
  }
  if (j.contains("inputs")) {
    const auto& in = j.at("inputs");
    c.input_values = get_or<std::vector<std::vector<double>>>(in, "values", {});
    c.random_inputs = get_or<std::size_t>(in, "count", 0);
    c.input_seed = get_or<std::uint64_t>(in, "seed", c.input_seed);
    c.input_range = get_or<double>(in, "range", c.input_range);
  }
  if (j.contains("out")) c.out_dir = resolve(base_dir, get_or<std::string>(j, "out", "out"));
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  if (model_path) j["model"] = model_path->string();
  if (preset) j["preset"] = *preset;
  j["model_seed"] = model_seed;
  j["weight_scale"] = weight_scale;
  j["ring"] = {{"bit_width", ring.bit_width}, {"frac_bits", ring.frac_bits}};
  j["kappa"] = kappa;
  j["clusters"] = {{"P", clusters}, {"T", colluding}};
  j["gamma"] = gamma;
  j["seed"] = seed;
  j["he"] = {{"backend", lhe::to_string(he_backend)}, {"key_bits", he_bits}};
  j["transport"] = {{"kind", to_string(transport)}, {"base_port", base_port},      {"latency_s", latency_s},
                    {"bytes_per_s", bytes_per_s},   {"layer_delay_s", layer_delay_s}, {"gamma_delay", gamma_delay},
                    {"pipelined", pipelined}};
  nlohmann::json in;
  if (!input_values.empty()) {
    in["values"] = input_values;
  } else {
    in["count"] = random_inputs;
    in["seed"] = input_seed;
    in["range"] = input_range;
  }
  j["inputs"] = in;
  j["out"] = out_dir.string();
  return j;
}

void RunConfig::validate() const {
  if (model_path.has_value() == preset.has_value()) throw ConfigError("config needs exactly one of 'model' or 'preset'");
  ring.validate();
  if (kappa == 0 || kappa % 8 != 0) throw ConfigError("kappa must be a positive multiple of 8");
  if (clusters == 0) throw ConfigError("clusters.P must be at least 1");
  if (colluding == 0) throw ConfigError("clusters.T must be at least 1");
  if (!gamma.empty() && gamma.size() != clusters) throw ConfigError("gamma needs one entry per cluster");
  for (double g : gamma) {
    if (!(g > 0)) throw ConfigError("gamma entries must be positive");
  }
  if (latency_s < 0 || bytes_per_s < 0 || layer_delay_s < 0) throw ConfigError("transport delays must be non-negative");
  if (!input_values.empty() && random_inputs != 0) throw ConfigError("inputs: give 'values' or 'count', not both");
  if (session_count() == 0) throw ConfigError("inputs: at least one input is required");
  if (!(input_range > 0)) throw ConfigError("inputs.range must be positive");
}

ModelSpec RunConfig::load_model() const {
  ModelSpec m;
  if (model_path) {
    m = pmdi::load_model(*model_path);
    if (!(m.ring == ring)) {
      throw ConfigError("model ring (" + std::to_string(m.ring.bit_width) + ", " + std::to_string(m.ring.frac_bits) +
                        ") differs from config ring");
    }
  } else {
    const auto& p = find_preset(*preset);
    ModelGenOptions opts;
    opts.dims = p.dims;
    opts.activations = p.activations;
    opts.ring = ring;
    opts.seed = model_seed;
    opts.weight_scale = weight_scale;
    m = generate_model(opts);
  }
  return m;
}

std::vector<RingVector> RunConfig::inputs(const ModelSpec& model) const {
  std::vector<RingVector> out;
  if (!input_values.empty()) {
    for (const auto& v : input_values) {
      if (v.size() != model.input_dim) {
        throw ConfigError("input has " + std::to_string(v.size()) + " values, model expects " +
                          std::to_string(model.input_dim));
      }
      out.push_back(ring::encode_vector(v, model.ring));
    }
    return out;
  }
  Prg rng(seed_from_u64(input_seed), 0);
  for (std::size_t t = 0; t < random_inputs; ++t) {
    std::vector<double> v(model.input_dim);
    for (auto& x : v) {
      const double u = static_cast<double>(rng.next_bits(53)) / 9007199254740992.0;
      x = (2 * u - 1) * input_range;
    }
    out.push_back(ring::encode_vector(v, model.ring));
  }
  return out;
}

ProtocolConfig RunConfig::protocol() const {
  ProtocolConfig p;
  p.kappa = kappa;
  p.clusters = clusters;
  p.colluding = colluding;
  p.gamma = gamma;
  p.seed = seed;
  p.he_backend = he_backend;
  p.he_bits = he_bits;
  p.layer_delay_s = layer_delay_s;
  p.gamma_delay = gamma_delay;
  p.expected_sessions = static_cast<std::uint32_t>(session_count());
  return p;
}

}  // namespace pmdi

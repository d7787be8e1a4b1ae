// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "pmdi/model.hpp"
#include "pmdi/prg.hpp"
#include "pmdi/protocol.hpp"

namespace pmdi::test {

inline ModelSpec scalar_model(std::uint64_t weight, gc::Activation act, RingParams ring) {
  ModelSpec m;
  m.ring = ring;
  m.input_dim = 1;
  m.layers.push_back({1, 1, {weight & ring.mask()}, act});
  return m;
}

inline ModelSpec random_model(const std::vector<std::size_t>& dims, const std::vector<gc::Activation>& acts,
                              std::uint64_t seed, RingParams ring = {}) {
  ModelGenOptions o;
  o.dims = dims;
  o.activations = acts;
  o.ring = ring;
  o.seed = seed;
  return generate_model(o);
}

inline ModelSpec toy3(std::uint64_t seed = 11) {
  using gc::Activation;
  return random_model({16, 16, 16, 8}, {Activation::ReLU, Activation::ReLU, Activation::None}, seed);
}

inline std::vector<RingVector> random_inputs(const ModelSpec& m, std::size_t count, std::uint64_t seed,
                                             double range = 1.0) {
  Prg rng(seed_from_u64(seed), 99);
  std::vector<RingVector> out;
  for (std::size_t t = 0; t < count; ++t) {
    std::vector<double> v(m.input_dim);
    for (auto& x : v) x = (2.0 * static_cast<double>(rng.next_bits(53)) / 9007199254740992.0 - 1.0) * range;
    out.push_back(ring::encode_vector(v, m.ring));
  }
  return out;
}

inline ProtocolConfig mock_config(std::size_t P = 1, std::size_t T = 1, std::uint64_t seed = 1, unsigned kappa = 128) {
  ProtocolConfig c;
  c.clusters = P;
  c.colluding = T;
  c.seed = seed;
  c.kappa = kappa;
  c.he_backend = lhe::Backend::Mock;
  return c;
}

}  // namespace pmdi::test

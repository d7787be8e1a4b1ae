// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "fixtures.hpp"
#include "pmdi/errors.hpp"
#include "pmdi/model.hpp"

using namespace pmdi;

namespace {

nlohmann::json frozen() {
  std::ifstream in(PMDI_TEST_DATA "/fixture_expected.json");
  REQUIRE(in);
  return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("oracle matches the independent reference on the frozen fixture") {
  const ModelSpec m = load_model(PMDI_TEST_DATA "/fixture_model.json");
  const auto j = frozen();
  for (const auto& c : j.at("cases")) {
    const RingVector x(m.ring, c.at("input").get<std::vector<std::uint64_t>>());
    const RingVector want(m.ring, c.at("output").get<std::vector<std::uint64_t>>());
    CHECK(oracle_infer(m, x, Exec::Serial) == want);
    CHECK(oracle_infer(m, x, Exec::Parallel) == want);
  }
}

TEST_CASE("single ReLU layer sits within one step of exact rationals") {
  const ModelSpec full = load_model(PMDI_TEST_DATA "/fixture_model.json");
  ModelSpec m = full;
  m.layers.resize(1);
  const double step = std::ldexp(1.0, -static_cast<int>(m.ring.frac_bits));
  for (const auto& c : frozen().at("first_layer_rational")) {
    const RingVector x(m.ring, c.at("input").get<std::vector<std::uint64_t>>());
    const auto y = oracle_infer(m, x);
    const auto& exact = c.at("rational");
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double q = static_cast<double>(exact[i][0].get<std::int64_t>()) / exact[i][1].get<double>();
      const double got = ring::decode_fixed(y.at(i), m.ring);
      CHECK(got <= q);
      CHECK(q - got < step);
    }
  }
}

TEST_CASE("small models") {
  const RingParams p0{32, 0};
  const auto doubled = test::scalar_model(2, gc::Activation::ReLU, p0);
  CHECK(oracle_infer(doubled, RingVector(p0, {3})) == RingVector(p0, {6}));

  ModelSpec id;
  id.ring = {32, 12};
  id.input_dim = 3;
  id.layers.push_back({3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}, gc::Activation::None});
  const RingVector x(id.ring, {5, 0xFFFFFFFF, 77});
  CHECK(oracle_infer(id, x) == x);
  CHECK(id.output_frac_bits() == 24);

  const auto toy = test::toy3();
  CHECK(toy.output_frac_bits() == 24);
  CHECK(ModelShape::of(toy).nonlinear_count() == 2);
  const auto zero = oracle_infer(toy, RingVector(toy.ring, 16));
  CHECK(zero == RingVector(toy.ring, 8));
}

TEST_CASE("json round trip and validation") {
  const auto m = test::toy3(3);
  const auto back = model_from_json(model_to_json(m));
  CHECK(back.input_dim == m.input_dim);
  REQUIRE(back.layers.size() == m.layers.size());
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    CHECK(back.layers[l].weights == m.layers[l].weights);
    CHECK(back.layers[l].activation == m.layers[l].activation);
  }
  const auto path = std::filesystem::temp_directory_path() / "pmdi_model_roundtrip.json";
  save_model(m, path);
  CHECK(model_to_json(load_model(path)) == model_to_json(m));
  std::filesystem::remove(path);

  ModelSpec empty;
  empty.input_dim = 4;
  CHECK_THROWS_AS(empty.validate(), ConfigError);
  ModelSpec broken = m;
  broken.layers[1].cols = 15;
  CHECK_THROWS_AS(broken.validate(), ConfigError);
  ModelSpec short_weights = m;
  short_weights.layers[0].weights.pop_back();
  CHECK_THROWS_AS(short_weights.validate(), ConfigError);
  CHECK_THROWS(load_model("/nonexistent/model.json"));
}

TEST_CASE("generation is deterministic and checks its inputs") {
  const auto a = test::toy3(5);
  const auto b = test::toy3(5);
  const auto c = test::toy3(6);
  CHECK(model_to_json(a) == model_to_json(b));
  CHECK(model_to_json(a) != model_to_json(c));
  CHECK_THROWS_AS(test::random_model({4, 0, 2}, {gc::Activation::ReLU, gc::Activation::None}, 1), ConfigError);
  CHECK_THROWS_AS(test::random_model({4, 3, 2}, {gc::Activation::ReLU}, 1), ConfigError);
  for (const auto& preset : model_presets()) {
    CHECK(preset.dims.size() == preset.activations.size() + 1);
    CHECK(find_preset(preset.name).name == preset.name);
  }
  CHECK(find_preset("minionn-toy").activations.size() == 3);
  CHECK_THROWS_AS(find_preset("nope"), ConfigError);
}

TEST_CASE("oracle is deterministic and rejects bad input") {
  const auto m = test::toy3();
  const auto inputs = test::random_inputs(m, 3, 1);
  for (const auto& x : inputs) CHECK(oracle_infer(m, x) == oracle_infer(m, x));
  CHECK_THROWS_AS(oracle_infer(m, RingVector(m.ring, 3)), DimensionError);
}

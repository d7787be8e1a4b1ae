// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "pmdi/config.hpp"
#include "pmdi/errors.hpp"

using namespace pmdi;
using nlohmann::json;

TEST_CASE("defaults and full parse") {
  const auto c = RunConfig::from_json(json{{"preset", "minionn-toy"}, {"inputs", {{"count", 1}}}});
  CHECK(c.kappa == 128);
  CHECK(c.clusters == 1);
  CHECK(c.he_backend == lhe::Backend::Paillier);
  CHECK(c.transport == TransportKind::Sim);
  CHECK(c.session_count() == 1);
  CHECK(c.out_dir == std::filesystem::path("out"));

  const json j = {{"preset", "minionn-toy"},
                  {"ring", {{"bit_width", 32}, {"frac_bits", 8}}},
                  {"kappa", 64},
                  {"clusters", {{"P", 2}, {"T", 2}}},
                  {"gamma", {1.0, 3.0}},
                  {"seed", 9},
                  {"he", {{"backend", "mock"}}},
                  {"transport", {{"kind", "threaded"}, {"layer_delay_s", 0.25}}},
                  {"inputs", {{"count", 3}, {"seed", 4}, {"range", 0.5}}},
                  {"out", "results"}};
  const auto d = RunConfig::from_json(j, "/tmp/base");
  CHECK(d.ring.frac_bits == 8);
  CHECK(d.kappa == 64);
  CHECK(d.colluding == 2);
  CHECK(d.gamma == std::vector<double>{1.0, 3.0});
  CHECK(d.he_backend == lhe::Backend::Mock);
  CHECK(d.transport == TransportKind::Threaded);
  CHECK(d.out_dir == std::filesystem::path("/tmp/base/results"));
  CHECK(d.session_count() == 3);

  const auto pc = d.protocol();
  CHECK(pc.clusters == 2);
  CHECK(pc.layer_delay_s == 0.25);
  CHECK(pc.expected_sessions == 3);

  const auto m = d.load_model();
  CHECK(m.ring == d.ring);
  const auto xs = d.inputs(m);
  REQUIRE(xs.size() == 3);
  for (const auto& x : xs) {
    for (double v : ring::decode_vector(x)) CHECK(std::abs(v) <= 0.5);
  }
  CHECK(d.inputs(m) == xs);

  const auto back = RunConfig::from_json(d.to_json());
  CHECK(back.to_json() == d.to_json());
}

TEST_CASE("explicit inputs and model files") {
  const auto dir = std::filesystem::temp_directory_path() / "pmdi_config_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "cfg.json") << json{{"model", "m.json"},
                                            {"he", {{"backend", "mock"}}},
                                            {"inputs", {{"values", {{0.5, -1.0}}}}}}
                                           .dump();
    ModelSpec m;
    m.ring = {32, 12};
    m.input_dim = 2;
    m.layers.push_back({1, 2, {4096, 4096}, gc::Activation::None});
    save_model(m, dir / "m.json");
  }
  const auto c = RunConfig::load(dir / "cfg.json");
  CHECK(c.model_path == dir / "m.json");
  const auto m = c.load_model();
  const auto xs = c.inputs(m);
  REQUIRE(xs.size() == 1);
  CHECK(xs[0] == ring::encode_vector(std::vector<double>{0.5, -1.0}, m.ring));

  auto wrong_dim = c;
  wrong_dim.input_values = {{1.0}};
  CHECK_THROWS_AS(wrong_dim.inputs(m), ConfigError);
  auto wrong_ring = c;
  wrong_ring.ring = {32, 8};
  CHECK_THROWS_AS(wrong_ring.load_model(), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("validation errors") {
  const auto bad = [](json j) {
    if (!j.contains("model")) j["preset"] = "minionn-toy";
    if (!j.contains("inputs")) j["inputs"] = {{"count", 1}};
    CHECK_THROWS_AS(RunConfig::from_json(j), ConfigError);
  };
  CHECK_THROWS_AS(RunConfig::from_json(json::object()), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(json::array()), ConfigError);
  bad({{"model", "b"}, {"preset", "minionn-toy"}});
  bad({{"inputs", json::object()}});
  bad({{"inputs", {{"count", 1}, {"values", {{1.0}}}}}});
  bad({{"kappa", 12}});
  bad({{"clusters", {{"P", 0}}}});
  bad({{"gamma", {1.0, 2.0}}});
  bad({{"he", {{"backend", "rsa"}}}});
  bad({{"transport", {{"kind", "udp"}}}});
  bad({{"transport", {{"latency_s", -1}}}});
  bad({{"inputs", {{"count", 2}, {"range", -1}}}});
  bad({{"ring", {{"bit_width", 70}}}});
  bad({{"kappa", "big"}});
  CHECK_THROWS_AS(RunConfig::load("/nonexistent/cfg.json"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(json{{"preset", "nope"}, {"inputs", {{"count", 1}}}}).load_model(), ConfigError);
}

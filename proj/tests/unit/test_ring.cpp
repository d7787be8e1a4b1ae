// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <fstream>

#include <json.hpp>

#include "pmdi/errors.hpp"
#include "pmdi/ring.hpp"

using namespace pmdi;

TEST_CASE("encode_fixed matches the frozen reference values") {
  std::ifstream in(PMDI_TEST_DATA "/fixture_expected.json");
  REQUIRE(in);
  const auto j = nlohmann::json::parse(in);
  for (const auto& e : j.at("encode_examples")) {
    const RingParams p{e[1].get<unsigned>(), e[2].get<unsigned>()};
    CHECK(ring::encode_fixed(e[0].get<double>(), p).value == e[3].get<std::uint64_t>());
  }
}

TEST_CASE("encode and decode") {
  const RingParams p32{32, 12};
  const RingParams p16{16, 4};
  CHECK(ring::encode_fixed(0, p32).value == 0);
  CHECK(ring::encode_fixed(1, p32).value == 4096);
  CHECK(ring::encode_fixed(-1.5, p16).value == 65512);
  CHECK(ring::decode_fixed({4096}, p32) == 1.0);
  CHECK(ring::decode_fixed({0}, p32) == 0.0);
  CHECK(ring::decode_fixed({65512}, p16) == -1.5);
  // half away from zero
  CHECK(ring::encode_fixed(0.5 / 16, p16).value == 1);
  CHECK(ring::encode_fixed(-0.5 / 16, p16).value == 65535);
  CHECK(ring::encode_fixed(1.5 / 16, p16).value == 2);
  CHECK_THROWS_AS(ring::encode_fixed(2048.0, p16), OverflowError);
  CHECK_THROWS_AS(ring::encode_fixed(-2048.0, p16), OverflowError);
  CHECK(ring::encode_fixed(-2047.9375, p16).value == 32769);
}

TEST_CASE("ring arithmetic wraps") {
  for (unsigned n : {8U, 16U, 32U, 64U}) {
    const RingParams p{n, 0};
    CHECK(ring::add(p, p.mask(), 1) == 0);
    CHECK(ring::mul(p, 3, 4) == 12);
    CHECK(ring::sub(p, 0, 5) == (p.mask() - 4));
    CHECK(ring::neg(p, 1) == p.mask());
    CHECK(ring::to_signed(p, p.mask()) == -1);
    CHECK(ring::from_signed(p, -1) == p.mask());
    CHECK(ring::is_negative(p, std::uint64_t{1} << (n - 1)));
    CHECK_FALSE(ring::is_negative(p, (std::uint64_t{1} << (n - 1)) - 1));
  }
}

TEST_CASE("truncate") {
  const RingParams p{32, 12};
  CHECK(ring::truncate(p, {16777216}, 12).value == 4096);
  CHECK(ring::truncate(p, {0}, 12).value == 0);
  const auto a = ring::encode_fixed(2.5, p);
  const auto b = ring::encode_fixed(2.0, p);
  const auto prod = ring::truncate(p, ring::mul(p, a, b), 12);
  CHECK(prod.value == ring::encode_fixed(5.0, p).value);
  const auto c = ring::encode_fixed(1.3, p);
  const auto d = ring::encode_fixed(2.7, p);
  const double got = ring::decode_fixed(ring::truncate(p, ring::mul(p, c, d), 12), p);
  CHECK(std::abs(got - 1.3 * 2.7) <= 2.0 / 4096);
}

TEST_CASE("vectors") {
  const RingParams p{8, 2};
  const RingVector a(p, {250, 3});
  const RingVector b(p, {10, 5});
  CHECK(ring::add(a, b) == RingVector(p, {4, 8}));
  CHECK(ring::sub(b, a) == RingVector(p, {16, 2}));
  CHECK(RingVector(p, {300}).values()[0] == 44);
  const std::vector<double> reals = {0.25, -0.5};
  const auto enc = ring::encode_vector(reals, p);
  CHECK(ring::decode_vector(enc) == reals);
  CHECK_THROWS_AS(ring::add(a, RingVector(p, 3)), DimensionError);
}

TEST_CASE("params validation") {
  CHECK_THROWS_AS((RingParams{0, 0}).validate(), ConfigError);
  CHECK_THROWS_AS((RingParams{65, 0}).validate(), ConfigError);
  CHECK_THROWS_AS((RingParams{16, 14}).validate(), ConfigError);
  CHECK_NOTHROW((RingParams{64, 20}).validate());
  CHECK((RingParams{32, 12}).element_bytes() == 4);
  CHECK((RingParams{12, 2}).element_bytes() == 2);
}

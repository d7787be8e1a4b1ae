// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "pmdi/alloc.hpp"
#include "pmdi/prg.hpp"

using namespace pmdi;
using alloc::ClusterProfile;

namespace {

std::vector<ClusterProfile> profiles(std::initializer_list<double> gammas) {
  std::vector<ClusterProfile> out;
  for (double g : gammas) out.push_back({out.size(), g});
  return out;
}

}  // namespace

TEST_CASE("targets") {
  CHECK(alloc::armdi_targets(100, profiles({2, 2})) == std::vector<double>{50, 50});
  CHECK(alloc::armdi_targets(100, profiles({1, 3})) == std::vector<double>{75, 25});
  CHECK(alloc::armdi_targets(100, profiles({4})) == std::vector<double>{100});
  const auto t = alloc::armdi_targets(1001, profiles({1, 3, 7, 0.5}));
  CHECK(std::accumulate(t.begin(), t.end(), 0.0) == 1001.0);
  CHECK_THROWS(alloc::armdi_targets(100, profiles({})));
  CHECK_THROWS(alloc::armdi_targets(100, profiles({1, 0})));
  CHECK_THROWS(alloc::armdi_targets(0, profiles({1})));
}

TEST_CASE("boundaries") {
  const std::vector<std::size_t> even = {25, 25, 25, 25};
  const auto a = alloc::assign_layers(even, std::vector<double>{50, 50});
  REQUIRE(a.cluster_count() == 2);
  CHECK(a.ranges[0].first == 1);
  CHECK(a.ranges[0].last == 2);
  CHECK(a.ranges[1].first == 3);
  CHECK(a.ranges[1].last == 4);

  const std::vector<std::size_t> skew = {60, 20, 20};
  const auto b = alloc::assign_layers(skew, std::vector<double>{75, 25});
  CHECK(b.ranges[0].last == 2);
  CHECK(b.ranges[1].first == 3);
  CHECK(b.ranges[1].last == 3);
  CHECK(b.ranges[0].params == 80);
  CHECK(b.cluster_of(3) == 1);
  CHECK_THROWS(b.cluster_of(4));

  const auto whole = alloc::assign_layers(skew, std::vector<double>{100});
  CHECK(whole.ranges[0].first == 1);
  CHECK(whole.ranges[0].last == 3);

  // equidistant boundaries pick the smaller range
  const std::vector<std::size_t> tie = {10, 10};
  const auto c = alloc::assign_layers(std::vector<std::size_t>{10, 10, 10}, std::vector<double>{15, 15});
  CHECK(c.ranges[0].last == 1);
  CHECK_THROWS(alloc::assign_layers(tie, std::vector<double>{5, 5, 10}));
}

namespace {

/// True when no boundary was pushed off its nearest cumulative point by the
/// one-layer-per-cluster constraint.
bool unconstrained(const std::vector<std::size_t>& layers, const std::vector<double>& targets) {
  std::vector<double> cum(layers.size() + 1, 0.0);
  for (std::size_t l = 0; l < layers.size(); ++l) cum[l + 1] = cum[l] + static_cast<double>(layers[l]);
  double c = 0;
  std::size_t prev = 0;
  for (std::size_t j = 0; j + 1 < targets.size(); ++j) {
    c += targets[j];
    std::size_t best = 0;
    for (std::size_t e = 1; e <= layers.size(); ++e) {
      if (std::abs(cum[e] - c) < std::abs(cum[best] - c)) best = e;
    }
    if (best <= prev || best > layers.size() - (targets.size() - j - 1)) return false;
    prev = best;
  }
  return true;
}

}  // namespace

TEST_CASE("every layer lands in exactly one cluster and deviation is bounded") {
  Prg rng(seed_from_u64(1));
  int bounded_cases = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t L = 2 + rng.next_bits(8) % 10;
    const std::size_t P = 1 + rng.next_bits(8) % std::min<std::size_t>(L, 4);
    std::vector<std::size_t> layers(L);
    for (auto& l : layers) l = 1 + rng.next_bits(12);
    std::vector<ClusterProfile> prof;
    for (std::size_t j = 0; j < P; ++j) prof.push_back({j, 0.5 + static_cast<double>(rng.next_bits(8)) / 32});
    const double W = static_cast<double>(std::accumulate(layers.begin(), layers.end(), std::size_t{0}));
    const auto targets = alloc::armdi_targets(W, prof);
    const auto a = alloc::assign_layers(layers, targets);
    REQUIRE(a.cluster_count() == P);
    std::size_t next = 1;
    const double max_layer = static_cast<double>(*std::max_element(layers.begin(), layers.end()));
    const bool free = unconstrained(layers, targets);
    bounded_cases += free;
    for (std::size_t j = 0; j < P; ++j) {
      CHECK(a.ranges[j].first == next);
      CHECK(a.ranges[j].last >= a.ranges[j].first);
      next = a.ranges[j].last + 1;
      if (free) CHECK(std::abs(static_cast<double>(a.ranges[j].params) - targets[j]) <= max_layer);
    }
    CHECK(next == L + 1);
  }
  CHECK(bounded_cases > 200);
}

TEST_CASE("non-empty ranges can force a deviation above one layer") {
  const std::vector<std::size_t> layers = {4000, 4000, 4000, 4000};
  const auto targets = alloc::armdi_targets(16000, profiles({40, 40, 40, 1}));
  const auto a = alloc::assign_layers(layers, targets);
  for (std::size_t j = 0; j < 4; ++j) CHECK(a.ranges[j].params == 4000);
  CHECK(targets[3] - 4000 > 4000);
}

TEST_CASE("allocation depends only on gamma ratios") {
  const std::vector<std::size_t> layers = {30, 10, 50, 20, 40};
  const auto a = alloc::assign_layers(layers, alloc::armdi_targets(150, profiles({1, 2, 3})));
  const auto b = alloc::assign_layers(layers, alloc::armdi_targets(150, profiles({5, 10, 15})));
  for (std::size_t j = 0; j < 3; ++j) CHECK(a.ranges[j].last == b.ranges[j].last);
}

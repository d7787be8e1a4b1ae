// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

// Serial reference loops against their OpenMP twins.

#include <benchmark/benchmark.h>

#include "pmdi/gc.hpp"
#include "pmdi/kernels.hpp"
#include "pmdi/prg.hpp"

namespace {

using namespace pmdi;

void BM_Matvec(benchmark::State& state, Exec exec) {
  const RingParams p{32, 12};
  const auto n = static_cast<std::size_t>(state.range(0));
  Prg rng(seed_from_u64(1));
  std::vector<std::uint64_t> m(n * n);
  for (auto& v : m) v = rng.next_bits(32);
  RingVector x(p, n);
  for (std::size_t i = 0; i < n; ++i) x.set(i, rng.next_bits(32));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::matvec(p, m, n, n, x, exec));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n));
}

void BM_GarbleBatch(benchmark::State& state, Exec exec) {
  const RingParams p{32, 12};
  const auto circuit = gc::build_nonlinear_block(p, gc::Activation::ReLU);
  const auto count = static_cast<std::size_t>(state.range(0));
  const Seed seed = seed_from_u64(2);
  for (auto _ : state) benchmark::DoNotOptimize(gc::garble_batch(circuit, count, seed, 0, 128, exec));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * count));
}

BENCHMARK_CAPTURE(BM_Matvec, serial, Exec::Serial)->Arg(64)->Arg(256)->Arg(1024);
BENCHMARK_CAPTURE(BM_Matvec, parallel, Exec::Parallel)->Arg(64)->Arg(256)->Arg(1024);
BENCHMARK_CAPTURE(BM_GarbleBatch, serial, Exec::Serial)->Arg(16)->Arg(64);
BENCHMARK_CAPTURE(BM_GarbleBatch, parallel, Exec::Parallel)->Arg(16)->Arg(64);

}  // namespace

BENCHMARK_MAIN();

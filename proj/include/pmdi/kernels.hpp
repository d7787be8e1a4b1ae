// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "pmdi/ring.hpp"

namespace pmdi {

/// Selects the serial reference loop or the OpenMP loop of a data-parallel kernel.
/// Both produce identical results; the serial form exists for testing and benchmarking.
enum class Exec { Serial, Parallel };

namespace kernels {

/// y = M x mod 2^N, with M row-major rows x cols.
RingVector matvec(const RingParams& p, std::span<const std::uint64_t> matrix, std::size_t rows,
                  std::size_t cols, const RingVector& x, Exec exec = Exec::Parallel);

/// y = M x - b mod 2^N.
RingVector matvec_sub(const RingParams& p, std::span<const std::uint64_t> matrix, std::size_t rows,
                      std::size_t cols, const RingVector& x, const RingVector& b,
                      Exec exec = Exec::Parallel);

/// Number of OpenMP threads the parallel kernels will use.
int parallel_threads();

}  // namespace kernels
}  // namespace pmdi

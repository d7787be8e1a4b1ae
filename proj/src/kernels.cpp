// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#include "pmdi/kernels.hpp"

#include <omp.h>

#include "pmdi/errors.hpp"

namespace pmdi::kernels {

namespace {

void check_dims(std::size_t matrix_size, std::size_t rows, std::size_t cols, const RingVector& x) {
  if (matrix_size != rows * cols) throw DimensionError("matvec: matrix size != rows * cols");
  if (x.size() != cols) throw DimensionError("matvec: vector length != cols");
}

inline std::uint64_t row_dot(std::span<const std::uint64_t> matrix, std::size_t r, std::size_t cols,
                             std::span<const std::uint64_t> x) {
  const std::uint64_t* row = matrix.data() + r * cols;
  std::uint64_t acc = 0;
  for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];  // wraps mod 2^64
  return acc;
}

}  // namespace

RingVector matvec(const RingParams& p, std::span<const std::uint64_t> matrix, std::size_t rows,
                  std::size_t cols, const RingVector& x, Exec exec) {
  check_dims(matrix.size(), rows, cols, x);
  RingVector y(p, rows);
  auto& out = y.raw();
  const auto xv = x.values();
  const auto mask = p.mask();
  if (exec == Exec::Serial) {
    for (std::size_t r = 0; r < rows; ++r) out[r] = row_dot(matrix, r, cols, xv) & mask;
  } else {
    const auto n = static_cast<std::int64_t>(rows);
#pragma omp parallel for schedule(static) if (rows * cols > 4096)
    for (std::int64_t r = 0; r < n; ++r) {
      out[static_cast<std::size_t>(r)] = row_dot(matrix, static_cast<std::size_t>(r), cols, xv) & mask;
    }
  }
  return y;
}

RingVector matvec_sub(const RingParams& p, std::span<const std::uint64_t> matrix, std::size_t rows,
                      std::size_t cols, const RingVector& x, const RingVector& b, Exec exec) {
  if (b.size() != rows) throw DimensionError("matvec_sub: bias length != rows");
  RingVector y = matvec(p, matrix, rows, cols, x, exec);
  for (std::size_t r = 0; r < rows; ++r) y.raw()[r] = ring::sub(p, y[r], b[r]);
  return y;
}

int parallel_threads() { return omp_get_max_threads(); }

}  // namespace pmdi::kernels

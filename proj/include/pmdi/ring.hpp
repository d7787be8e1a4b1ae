// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace pmdi {

/// Ring Z_{2^N} with fixed-point scale 2^f.
struct RingParams {
  unsigned bit_width = 32;
  unsigned frac_bits = 12;

  /// Throws ConfigError unless 0 < N <= 64 and f < N - 2.
  void validate() const;

  std::uint64_t mask() const noexcept {
    return bit_width >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << bit_width) - 1;
  }
  /// Bytes per element on the wire.
  std::size_t element_bytes() const noexcept { return (bit_width + 7) / 8; }

  friend bool operator==(const RingParams&, const RingParams&) = default;
};

struct RingElement {
  std::uint64_t value = 0;
  friend auto operator<=>(const RingElement&, const RingElement&) = default;
};

class RingVector {
 public:
  RingVector() = default;
  RingVector(RingParams params, std::size_t n) : params_(params), values_(n, 0) {}
  /// Values are reduced mod 2^N.
  RingVector(RingParams params, std::vector<std::uint64_t> values);
  RingVector(RingParams params, std::initializer_list<std::uint64_t> values)
      : RingVector(params, std::vector<std::uint64_t>(values)) {}

  const RingParams& params() const noexcept { return params_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  std::uint64_t operator[](std::size_t i) const { return values_[i]; }
  RingElement at(std::size_t i) const { return RingElement{values_.at(i)}; }
  void set(std::size_t i, std::uint64_t v) { values_.at(i) = v & params_.mask(); }

  std::span<const std::uint64_t> values() const noexcept { return values_; }
  /// Raw access; callers must keep entries reduced.
  std::vector<std::uint64_t>& raw() noexcept { return values_; }

  friend bool operator==(const RingVector& a, const RingVector& b) {
    return a.params_ == b.params_ && a.values_ == b.values_;
  }

 private:
  RingParams params_{};
  std::vector<std::uint64_t> values_;
};

namespace ring {

inline std::uint64_t add(const RingParams& p, std::uint64_t a, std::uint64_t b) noexcept {
  return (a + b) & p.mask();
}
inline std::uint64_t sub(const RingParams& p, std::uint64_t a, std::uint64_t b) noexcept {
  return (a - b) & p.mask();
}
inline std::uint64_t mul(const RingParams& p, std::uint64_t a, std::uint64_t b) noexcept {
  return (a * b) & p.mask();
}
inline std::uint64_t neg(const RingParams& p, std::uint64_t a) noexcept { return (0 - a) & p.mask(); }

RingElement add(const RingParams& p, RingElement a, RingElement b) noexcept;
RingElement sub(const RingParams& p, RingElement a, RingElement b) noexcept;
RingElement mul(const RingParams& p, RingElement a, RingElement b) noexcept;

/// Bit N-1 set.
bool is_negative(const RingParams& p, std::uint64_t x) noexcept;
/// Two's-complement centered representative.
std::int64_t to_signed(const RingParams& p, std::uint64_t x) noexcept;
std::uint64_t from_signed(const RingParams& p, std::int64_t x) noexcept;

/// Logical right shift by f. Only meaningful for non-negative encodings.
RingElement truncate(const RingParams& p, RingElement x, unsigned f) noexcept;

/// round(real * 2^f) mod 2^N, rounding half away from zero.
/// Throws OverflowError when |real| * 2^f >= 2^(N-1).
RingElement encode_fixed(double real, const RingParams& p);
double decode_fixed(RingElement x, const RingParams& p);

RingVector encode_vector(std::span<const double> reals, const RingParams& p);
std::vector<double> decode_vector(const RingVector& v);

RingVector add(const RingVector& a, const RingVector& b);
RingVector sub(const RingVector& a, const RingVector& b);

}  // namespace ring

}  // namespace pmdi

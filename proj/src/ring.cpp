// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#include "pmdi/ring.hpp"

#include <cmath>
#include <string>

#include "pmdi/errors.hpp"

namespace pmdi {

void RingParams::validate() const {
  if (bit_width == 0 || bit_width > 64) {
    throw ConfigError("ring bit_width must be in [1, 64], got " + std::to_string(bit_width));
  }
  if (frac_bits + 2 >= bit_width) {
    throw ConfigError("ring frac_bits must be < bit_width - 2, got f=" + std::to_string(frac_bits) +
                      " N=" + std::to_string(bit_width));
  }
}

RingVector::RingVector(RingParams params, std::vector<std::uint64_t> values)
    : params_(params), values_(std::move(values)) {
  const auto m = params_.mask();
  for (auto& v : values_) v &= m;
}

namespace ring {

RingElement add(const RingParams& p, RingElement a, RingElement b) noexcept {
  return {add(p, a.value, b.value)};
}
RingElement sub(const RingParams& p, RingElement a, RingElement b) noexcept {
  return {sub(p, a.value, b.value)};
}
RingElement mul(const RingParams& p, RingElement a, RingElement b) noexcept {
  return {mul(p, a.value, b.value)};
}

bool is_negative(const RingParams& p, std::uint64_t x) noexcept {
  return ((x >> (p.bit_width - 1)) & 1U) != 0;
}

std::int64_t to_signed(const RingParams& p, std::uint64_t x) noexcept {
  x &= p.mask();
  if (p.bit_width >= 64) return static_cast<std::int64_t>(x);
  if (is_negative(p, x)) {
    return static_cast<std::int64_t>(x) - (std::int64_t{1} << p.bit_width);
  }
  return static_cast<std::int64_t>(x);
}

std::uint64_t from_signed(const RingParams& p, std::int64_t x) noexcept {
  return static_cast<std::uint64_t>(x) & p.mask();
}

RingElement truncate(const RingParams& p, RingElement x, unsigned f) noexcept {
  if (f >= 64) return {0};
  return {(x.value & p.mask()) >> f};
}

RingElement encode_fixed(double real, const RingParams& p) {
  if (!std::isfinite(real)) throw OverflowError("encode_fixed: non-finite value");
  const long double scaled = std::ldexp(static_cast<long double>(real), static_cast<int>(p.frac_bits));
  const long double limit = std::ldexp(1.0L, static_cast<int>(p.bit_width) - 1);
  // round() is half-away-from-zero; the range check applies to the rounded value.
  const long double rounded = std::roundl(scaled);
  if (std::fabs(scaled) >= limit || std::fabs(rounded) >= limit) {
    throw OverflowError("encode_fixed: " + std::to_string(real) + " does not fit in " +
                        std::to_string(p.bit_width) + "-bit fixed point with f=" +
                        std::to_string(p.frac_bits));
  }
  return {from_signed(p, static_cast<std::int64_t>(rounded))};
}

double decode_fixed(RingElement x, const RingParams& p) {
  return std::ldexp(static_cast<double>(to_signed(p, x.value)), -static_cast<int>(p.frac_bits));
}

RingVector encode_vector(std::span<const double> reals, const RingParams& p) {
  RingVector out(p, reals.size());
  for (std::size_t i = 0; i < reals.size(); ++i) out.set(i, encode_fixed(reals[i], p).value);
  return out;
}

std::vector<double> decode_vector(const RingVector& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = decode_fixed(v.at(i), v.params());
  return out;
}

namespace {
void check_same(const RingVector& a, const RingVector& b) {
  if (!(a.params() == b.params()) || a.size() != b.size()) {
    throw DimensionError("ring vectors differ in length or ring parameters");
  }
}
}  // namespace

RingVector add(const RingVector& a, const RingVector& b) {
  check_same(a, b);
  RingVector out(a.params(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out.raw()[i] = add(a.params(), a[i], b[i]);
  return out;
}

RingVector sub(const RingVector& a, const RingVector& b) {
  check_same(a, b);
  RingVector out(a.params(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out.raw()[i] = sub(a.params(), a[i], b[i]);
  return out;
}

}  // namespace ring
}  // namespace pmdi

// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pmdi/ring.hpp"

namespace pmdi {

using Bytes = std::vector<std::uint8_t>;

/// Little-endian append-only encoder.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void le(std::uint64_t v, std::size_t width) {
    for (std::size_t i = 0; i < width; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }

  std::size_t size() const noexcept { return out_.size(); }
  Bytes take() && { return std::move(out_); }
  const Bytes& view() const noexcept { return out_; }

 private:
  Bytes out_;
};

/// Little-endian decoder; throws ProtocolError on truncated input.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  std::uint64_t le(std::size_t width);
  std::span<const std::uint8_t> bytes(std::size_t n);

  std::size_t remaining() const noexcept { return in_.size() - pos_; }
  bool done() const noexcept { return pos_ == in_.size(); }
  /// Throws unless all input was consumed.
  void expect_done(std::string_view what) const;

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

/// Ring vector packed as ceil(N/8) little-endian bytes per element, no header.
void write_ring_values(ByteWriter& w, const RingVector& v);
RingVector read_ring_values(ByteReader& r, const RingParams& p, std::size_t n);

std::string base64_encode(std::span<const std::uint8_t> data);
Bytes base64_decode(std::string_view text);

}  // namespace pmdi

// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "pmdi/bytes.hpp"
#include "pmdi/prg.hpp"

namespace pmdi {

/// Bit string of length kappa <= 128. Used for wire labels, OT masks, and OT blobs.
/// Bit 0 is the point-and-permute bit.
class Label {
 public:
  static constexpr unsigned kMaxBits = 128;

  Label() = default;
  /// All-zero label of the given width. Throws std::invalid_argument if bits is 0 or > 128.
  explicit Label(unsigned bits);

  static Label random(unsigned bits, Prg& rng);
  /// Binary string, most significant bit first ("1010" has bit 3 set).
  static Label from_string(std::string_view binary);

  unsigned bits() const noexcept { return bits_; }
  std::size_t byte_size() const noexcept { return (bits_ + 7) / 8; }
  bool bit(unsigned i) const noexcept { return ((words_[i / 64] >> (i % 64)) & 1U) != 0; }
  void set_bit(unsigned i, bool v) noexcept;
  bool permute_bit() const noexcept { return bit(0); }
  const std::array<std::uint64_t, 2>& words() const noexcept { return words_; }

  Label operator^(const Label& o) const;
  Label& operator^=(const Label& o);
  friend bool operator==(const Label&, const Label&) = default;

  std::string to_string() const;

  /// ceil(bits/8) bytes, little-endian.
  void write(ByteWriter& w) const;
  static Label read(ByteReader& r, unsigned bits);

 private:
  void clamp() noexcept;

  std::array<std::uint64_t, 2> words_{};
  unsigned bits_ = 0;
};

}  // namespace pmdi

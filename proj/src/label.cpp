// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#include "pmdi/label.hpp"

#include <stdexcept>

namespace pmdi {

Label::Label(unsigned bits) : bits_(bits) {
  if (bits == 0 || bits > kMaxBits) throw std::invalid_argument("label width must be in [1, 128]");
}

Label Label::random(unsigned bits, Prg& rng) {
  Label l(bits);
  l.words_[0] = rng.next_u64();
  if (bits > 64) l.words_[1] = rng.next_u64();
  l.clamp();
  return l;
}

Label Label::from_string(std::string_view binary) {
  Label l(static_cast<unsigned>(binary.size()));
  for (std::size_t k = 0; k < binary.size(); ++k) {
    const char c = binary[binary.size() - 1 - k];
    if (c != '0' && c != '1') throw std::invalid_argument("label string must be binary");
    l.set_bit(static_cast<unsigned>(k), c == '1');
  }
  return l;
}

void Label::set_bit(unsigned i, bool v) noexcept {
  const std::uint64_t m = std::uint64_t{1} << (i % 64);
  if (v) {
    words_[i / 64] |= m;
  } else {
    words_[i / 64] &= ~m;
  }
}

void Label::clamp() noexcept {
  if (bits_ < 64) {
    words_[0] &= (std::uint64_t{1} << bits_) - 1;
    words_[1] = 0;
  } else if (bits_ < 128) {
    words_[1] &= (std::uint64_t{1} << (bits_ - 64)) - 1;
  }
}

Label Label::operator^(const Label& o) const {
  Label r = *this;
  r ^= o;
  return r;
}

Label& Label::operator^=(const Label& o) {
  if (o.bits_ != bits_) throw std::invalid_argument("label width mismatch");
  words_[0] ^= o.words_[0];
  words_[1] ^= o.words_[1];
  return *this;
}

std::string Label::to_string() const {
  std::string s(bits_, '0');
  for (unsigned k = 0; k < bits_; ++k) {
    if (bit(k)) s[bits_ - 1 - k] = '1';
  }
  return s;
}

void Label::write(ByteWriter& w) const {
  for (std::size_t b = 0; b < byte_size(); ++b) {
    w.u8(static_cast<std::uint8_t>(words_[b / 8] >> (8 * (b % 8))));
  }
}

Label Label::read(ByteReader& r, unsigned bits) {
  Label l(bits);
  const auto bytes = r.bytes(l.byte_size());
  for (std::size_t b = 0; b < bytes.size(); ++b) l.words_[b / 8] |= std::uint64_t{bytes[b]} << (8 * (b % 8));
  l.clamp();
  return l;
}

}  // namespace pmdi

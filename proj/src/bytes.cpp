// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#include "pmdi/bytes.hpp"

#include <openssl/evp.h>

#include "pmdi/errors.hpp"

namespace pmdi {

std::uint64_t ByteReader::le(std::size_t width) {
  if (remaining() < width) throw ProtocolError("truncated message: need " + std::to_string(width) + " bytes");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < width; ++i) v |= std::uint64_t{in_[pos_ + i]} << (8 * i);
  pos_ += width;
  return v;
}

std::span<const std::uint8_t> ByteReader::bytes(std::size_t n) {
  if (remaining() < n) throw ProtocolError("truncated message: need " + std::to_string(n) + " bytes");
  auto s = in_.subspan(pos_, n);
  pos_ += n;
  return s;
}

void ByteReader::expect_done(std::string_view what) const {
  if (!done()) {
    throw ProtocolError(std::string(what) + ": " + std::to_string(remaining()) + " trailing bytes");
  }
}

void write_ring_values(ByteWriter& w, const RingVector& v) {
  const std::size_t width = v.params().element_bytes();
  for (auto x : v.values()) w.le(x, width);
}

RingVector read_ring_values(ByteReader& r, const RingParams& p, std::size_t n) {
  RingVector v(p, n);
  const std::size_t width = p.element_bytes();
  for (std::size_t i = 0; i < n; ++i) v.raw()[i] = r.le(width) & p.mask();
  return v;
}

std::string base64_encode(std::span<const std::uint8_t> data) {
  std::string out(4 * ((data.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data.data(),
                                static_cast<int>(data.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

Bytes base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw ConfigError("base64: length is not a multiple of 4");
  Bytes out(3 * (text.size() / 4));
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw ConfigError("base64: invalid characters");
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() >= 2 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

}  // namespace pmdi

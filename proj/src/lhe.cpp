// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#include "pmdi/lhe.hpp"

#include <algorithm>
#include <bit>

#include "pmdi/errors.hpp"
#include "pmdi/paillier.hpp"

namespace pmdi::lhe {

std::shared_ptr<const PaillierPublicKey> deserialize_paillier(ByteReader& r);

Backend parse_backend(const std::string& name) {
  if (name == "paillier") return Backend::Paillier;
  if (name == "mock") return Backend::Mock;
  throw ConfigError("unknown HE backend '" + name + "' (expected paillier|mock)");
}

std::string to_string(Backend b) { return b == Backend::Paillier ? "paillier" : "mock"; }

unsigned linear_bound_bits(unsigned ring_bits, std::size_t cols, unsigned x_bits, unsigned b_bits) {
  // sum_c M_rc x_c + b_r < (cols + 1) * 2^max(N + x_bits, b_bits)
  const unsigned widest = std::max(ring_bits + x_bits, b_bits);
  return widest + static_cast<unsigned>(std::bit_width(cols + 1));
}

namespace {

/// Identity "encryption" with the same wire size and headroom rule as Paillier of the
/// same modulus size. Plaintexts are tracked mod 2^64, which reduces correctly mod 2^N.
class MockPublicKey final : public PublicKey {
 public:
  MockPublicKey(std::uint64_t id, unsigned bits) : id_(id), bits_(bits) {}

  Backend backend() const override { return Backend::Mock; }
  std::uint64_t id() const override { return id_; }
  unsigned security_bits() const override { return bits_; }
  std::size_t element_bytes() const override { return 4 + 2 * ((bits_ + 7) / 8); }
  unsigned plaintext_bits() const override { return bits_ - 1; }

  Ciphertext encrypt(const RingVector& v, Prg& /*rng*/) const override {
    Ciphertext ct = empty(v.params().bit_width);
    for (auto x : v.values()) ct.elements.push_back(blob(x));
    return ct;
  }

  Ciphertext scale(std::span<const std::uint64_t> a, const Ciphertext& x) const override {
    check(x);
    if (a.size() != x.element_count()) throw DimensionError("scale: scalar count != ciphertext count");
    Ciphertext out = empty(x.bound_bits + 64);
    if (out.bound_bits > plaintext_bits()) throw OverflowError("scale: plaintext headroom exceeded");
    for (std::size_t i = 0; i < a.size(); ++i) out.elements.push_back(blob(a[i] * value(x.elements[i])));
    return out;
  }

  Ciphertext add(const Ciphertext& x, const Ciphertext& y) const override {
    check(x);
    check(y);
    if (x.element_count() != y.element_count()) throw DimensionError("add: ciphertext counts differ");
    Ciphertext out = empty(std::max(x.bound_bits, y.bound_bits) + 1);
    if (out.bound_bits > plaintext_bits()) throw OverflowError("add: plaintext headroom exceeded");
    for (std::size_t i = 0; i < x.element_count(); ++i) {
      out.elements.push_back(blob(value(x.elements[i]) + value(y.elements[i])));
    }
    return out;
  }

  Ciphertext eval_linear(std::span<const std::uint64_t> matrix, std::size_t rows, std::size_t cols,
                         unsigned ring_bits, const Ciphertext& x, const Ciphertext& b,
                         Exec exec) const override {
    check(x);
    check(b);
    if (matrix.size() != rows * cols || x.element_count() != cols || b.element_count() != rows) {
      throw DimensionError("eval_linear: dimension mismatch");
    }
    Ciphertext out = empty(linear_bound_bits(ring_bits, cols, x.bound_bits, b.bound_bits));
    if (out.bound_bits > plaintext_bits()) throw OverflowError("eval_linear: plaintext headroom exceeded");
    std::vector<std::uint64_t> xs(cols);
    for (std::size_t c = 0; c < cols; ++c) xs[c] = value(x.elements[c]);
    out.elements.resize(rows);
    auto row = [&](std::size_t r) {
      std::uint64_t acc = value(b.elements[r]);
      for (std::size_t c = 0; c < cols; ++c) acc += matrix[r * cols + c] * xs[c];
      out.elements[r] = blob(acc);
    };
    if (exec == Exec::Serial) {
      for (std::size_t r = 0; r < rows; ++r) row(r);
    } else {
      const auto n = static_cast<std::int64_t>(rows);
#pragma omp parallel for schedule(static) if (rows * cols > 4096)
      for (std::int64_t r = 0; r < n; ++r) row(static_cast<std::size_t>(r));
    }
    return out;
  }

  Bytes serialize() const override {
    ByteWriter w;
    w.u8(2);
    w.u32(bits_);
    w.u64(id_);
    return std::move(w).take();
  }

  std::uint64_t value(const Bytes& blob) const {
    ByteReader r(blob);
    return r.u64();
  }

 private:
  Ciphertext empty(unsigned bound) const {
    Ciphertext ct;
    ct.key_id = id_;
    ct.element_bytes = element_bytes();
    ct.bound_bits = bound;
    return ct;
  }
  Bytes blob(std::uint64_t v) const {
    Bytes b(element_bytes() - 4, 0);
    for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v >> (8 * i));
    return b;
  }
  void check(const Ciphertext& ct) const {
    if (ct.key_id != id_) throw ProtocolError("ciphertext was produced under a different key");
  }

  std::uint64_t id_;
  unsigned bits_;
};

class MockSecretKey final : public SecretKey {
 public:
  explicit MockSecretKey(std::shared_ptr<const MockPublicKey> pk) : pk_(std::move(pk)) {}
  std::uint64_t id() const override { return pk_->id(); }
  RingVector decrypt(const Ciphertext& ct, const RingParams& p) const override {
    if (ct.key_id != pk_->id()) throw ProtocolError("ciphertext was produced under a different key");
    RingVector out(p, ct.element_count());
    for (std::size_t i = 0; i < ct.element_count(); ++i) out.raw()[i] = pk_->value(ct.elements[i]) & p.mask();
    return out;
  }

 private:
  std::shared_ptr<const MockPublicKey> pk_;
};

}  // namespace

KeyPair keygen(Backend backend, unsigned security_bits, Prg& rng) {
  if (backend == Backend::Paillier) return paillier_keygen(security_bits, rng);
  if (security_bits < 64 || security_bits % 16 != 0) throw ConfigError("mock HE: key size must be a multiple of 16, >= 64");
  auto pk = std::make_shared<const MockPublicKey>(rng.next_u64(), security_bits);
  return {pk, std::make_shared<const MockSecretKey>(pk)};
}

std::shared_ptr<const PublicKey> deserialize_public_key(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const auto tag = r.u8();
  if (tag == 1) return deserialize_paillier(r);
  if (tag == 2) {
    const unsigned bits = r.u32();
    const std::uint64_t id = r.u64();
    r.expect_done("mock public key");
    return std::make_shared<const MockPublicKey>(id, bits);
  }
  throw ProtocolError("unknown public key tag " + std::to_string(tag));
}

void write_ciphertext(ByteWriter& w, const Ciphertext& ct) {
  for (const auto& e : ct.elements) {
    w.u32(static_cast<std::uint32_t>(e.size()));
    w.bytes(e);
  }
}

Ciphertext read_ciphertext(ByteReader& r, const PublicKey& pk, std::size_t count, unsigned bound_bits) {
  Ciphertext ct;
  ct.key_id = pk.id();
  ct.element_bytes = pk.element_bytes();
  ct.bound_bits = bound_bits;
  ct.elements.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t len = r.u32();
    if (len + 4 != pk.element_bytes()) throw ProtocolError("ciphertext element has unexpected width");
    const auto b = r.bytes(len);
    ct.elements.emplace_back(b.begin(), b.end());
  }
  return ct;
}

}  // namespace pmdi::lhe

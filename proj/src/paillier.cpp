// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#include "pmdi/paillier.hpp"

#include <openssl/sha.h>

#include <algorithm>

#include "pmdi/errors.hpp"

namespace pmdi::lhe {

namespace {

mpz_class import_le(std::span<const std::uint8_t> bytes) {
  mpz_class v;
  if (!bytes.empty()) mpz_import(v.get_mpz_t(), bytes.size(), -1, 1, 0, 0, bytes.data());
  return v;
}

Bytes export_le(const mpz_class& v, std::size_t width) {
  Bytes out(width, 0);
  std::size_t count = 0;
  if (sgn(v) != 0) {
    const std::size_t need = (mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8;
    if (need > width) throw ProtocolError("paillier: value wider than blob");
    mpz_export(out.data(), &count, -1, 1, 0, 0, v.get_mpz_t());
  }
  return out;
}

mpz_class random_below(const mpz_class& bound, Prg& rng) {
  const std::size_t bytes = (mpz_sizeinbase(bound.get_mpz_t(), 2) + 7) / 8 + 8;
  Bytes buf(bytes);
  mpz_class v;
  do {
    rng.fill(buf);
    v = import_le(buf) % bound;
  } while (sgn(v) == 0);
  return v;
}

mpz_class random_prime(unsigned bits, Prg& rng) {
  Bytes buf((bits + 7) / 8);
  rng.fill(buf);
  mpz_class v = import_le(buf);
  mpz_class top = mpz_class(1) << bits;
  v %= top;
  // Top two bits set so p*q has exactly 2*bits bits.
  mpz_setbit(v.get_mpz_t(), bits - 1);
  mpz_setbit(v.get_mpz_t(), bits - 2);
  mpz_class p;
  mpz_nextprime(p.get_mpz_t(), v.get_mpz_t());
  return p;
}

std::uint64_t fingerprint(const mpz_class& n) {
  const Bytes b = export_le(n, (mpz_sizeinbase(n.get_mpz_t(), 2) + 7) / 8);
  std::uint8_t h[SHA256_DIGEST_LENGTH];
  SHA256(b.data(), b.size(), h);
  std::uint64_t id = 0;
  for (int i = 0; i < 8; ++i) id |= std::uint64_t{h[i]} << (8 * i);
  return id;
}

// L_x(u) = (u - 1) / x
mpz_class l_func(const mpz_class& u, const mpz_class& x) { return (u - 1) / x; }

void check_key(const Ciphertext& ct, std::uint64_t id) {
  if (ct.key_id != id) throw ProtocolError("ciphertext was produced under a different key");
}

}  // namespace

PaillierPublicKey::PaillierPublicKey(mpz_class n, unsigned bits)
    : n_(std::move(n)), n2_(n_ * n_), bits_(bits), blob_bytes_(2 * ((bits + 7) / 8)), id_(fingerprint(n_)) {}

mpz_class PaillierPublicKey::encrypt_integer(const mpz_class& m, Prg& rng) const {
  const mpz_class r = random_below(n_, rng);
  mpz_class rn;
  mpz_powm(rn.get_mpz_t(), r.get_mpz_t(), n_.get_mpz_t(), n2_.get_mpz_t());
  // (1 + n)^m = 1 + m n mod n^2
  mpz_class gm = (1 + (m % n_) * n_) % n2_;
  return (gm * rn) % n2_;
}

Bytes PaillierPublicKey::to_blob(const mpz_class& c) const { return export_le(c, blob_bytes_); }

mpz_class PaillierPublicKey::from_blob(std::span<const std::uint8_t> blob) const {
  if (blob.size() != blob_bytes_) throw ProtocolError("paillier: ciphertext blob has wrong width");
  mpz_class c = import_le(blob);
  if (c >= n2_) throw ProtocolError("paillier: ciphertext out of range");
  return c;
}

Ciphertext PaillierPublicKey::encrypt(const RingVector& v, Prg& rng) const {
  Ciphertext ct;
  ct.key_id = id_;
  ct.element_bytes = element_bytes();
  ct.bound_bits = v.params().bit_width;
  ct.elements.reserve(v.size());
  for (auto x : v.values()) {
    mpz_class m;
    mpz_import(m.get_mpz_t(), 1, -1, sizeof x, 0, 0, &x);
    ct.elements.push_back(to_blob(encrypt_integer(m, rng)));
  }
  return ct;
}

Ciphertext PaillierPublicKey::scale(std::span<const std::uint64_t> a, const Ciphertext& x) const {
  check_key(x, id_);
  if (a.size() != x.element_count()) throw DimensionError("scale: scalar count != ciphertext count");
  Ciphertext out;
  out.key_id = id_;
  out.element_bytes = element_bytes();
  out.bound_bits = x.bound_bits + 64;
  if (out.bound_bits > plaintext_bits()) throw OverflowError("scale: plaintext headroom exceeded");
  for (std::size_t i = 0; i < a.size(); ++i) {
    mpz_class e;
    mpz_import(e.get_mpz_t(), 1, -1, sizeof a[i], 0, 0, &a[i]);
    mpz_class c = from_blob(x.elements[i]);
    mpz_class r;
    mpz_powm(r.get_mpz_t(), c.get_mpz_t(), e.get_mpz_t(), n2_.get_mpz_t());
    out.elements.push_back(to_blob(r));
  }
  return out;
}

Ciphertext PaillierPublicKey::add(const Ciphertext& x, const Ciphertext& y) const {
  check_key(x, id_);
  check_key(y, id_);
  if (x.element_count() != y.element_count()) throw DimensionError("add: ciphertext counts differ");
  Ciphertext out;
  out.key_id = id_;
  out.element_bytes = element_bytes();
  out.bound_bits = std::max(x.bound_bits, y.bound_bits) + 1;
  if (out.bound_bits > plaintext_bits()) throw OverflowError("add: plaintext headroom exceeded");
  for (std::size_t i = 0; i < x.element_count(); ++i) {
    mpz_class c = (from_blob(x.elements[i]) * from_blob(y.elements[i])) % n2_;
    out.elements.push_back(to_blob(c));
  }
  return out;
}

Ciphertext PaillierPublicKey::eval_linear(std::span<const std::uint64_t> matrix, std::size_t rows,
                                          std::size_t cols, unsigned ring_bits, const Ciphertext& x,
                                          const Ciphertext& b, Exec exec) const {
  check_key(x, id_);
  check_key(b, id_);
  if (matrix.size() != rows * cols || x.element_count() != cols || b.element_count() != rows) {
    throw DimensionError("eval_linear: dimension mismatch");
  }
  const unsigned bound = linear_bound_bits(ring_bits, cols, x.bound_bits, b.bound_bits);
  if (bound > plaintext_bits()) throw OverflowError("eval_linear: plaintext headroom exceeded");

  std::vector<mpz_class> xs(cols);
  for (std::size_t c = 0; c < cols; ++c) xs[c] = from_blob(x.elements[c]);

  Ciphertext out;
  out.key_id = id_;
  out.element_bytes = element_bytes();
  out.bound_bits = bound;
  out.elements.resize(rows);

  auto row = [&](std::size_t r) {
    mpz_class acc = from_blob(b.elements[r]);
    mpz_class term, e;
    for (std::size_t c = 0; c < cols; ++c) {
      const std::uint64_t w = matrix[r * cols + c];
      if (w == 0) continue;
      mpz_import(e.get_mpz_t(), 1, -1, sizeof w, 0, 0, &w);
      mpz_powm(term.get_mpz_t(), xs[c].get_mpz_t(), e.get_mpz_t(), n2_.get_mpz_t());
      acc = (acc * term) % n2_;
    }
    out.elements[r] = to_blob(acc);
  };

  if (exec == Exec::Serial) {
    for (std::size_t r = 0; r < rows; ++r) row(r);
  } else {
    const auto n = static_cast<std::int64_t>(rows);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t r = 0; r < n; ++r) row(static_cast<std::size_t>(r));
  }
  return out;
}

Bytes PaillierPublicKey::serialize() const {
  ByteWriter w;
  w.u8(1);
  w.u32(bits_);
  const Bytes nb = export_le(n_, (bits_ + 7) / 8);
  w.u32(static_cast<std::uint32_t>(nb.size()));
  w.bytes(nb);
  return std::move(w).take();
}

PaillierSecretKey::PaillierSecretKey(std::shared_ptr<const PaillierPublicKey> pk, mpz_class p, mpz_class q)
    : pk_(std::move(pk)), p_(std::move(p)), q_(std::move(q)) {
  p2_ = p_ * p_;
  q2_ = q_ * q_;
  const mpz_class g = pk_->n() + 1;
  mpz_class t;
  mpz_powm(t.get_mpz_t(), g.get_mpz_t(), mpz_class(p_ - 1).get_mpz_t(), p2_.get_mpz_t());
  t = l_func(t, p_);
  mpz_invert(hp_.get_mpz_t(), t.get_mpz_t(), p_.get_mpz_t());
  mpz_powm(t.get_mpz_t(), g.get_mpz_t(), mpz_class(q_ - 1).get_mpz_t(), q2_.get_mpz_t());
  t = l_func(t, q_);
  mpz_invert(hq_.get_mpz_t(), t.get_mpz_t(), q_.get_mpz_t());
  mpz_invert(q_inv_p_.get_mpz_t(), q_.get_mpz_t(), p_.get_mpz_t());

  mpz_lcm(lambda_.get_mpz_t(), mpz_class(p_ - 1).get_mpz_t(), mpz_class(q_ - 1).get_mpz_t());
  mpz_powm(t.get_mpz_t(), g.get_mpz_t(), lambda_.get_mpz_t(), pk_->n_squared().get_mpz_t());
  t = l_func(t, pk_->n());
  mpz_invert(mu_.get_mpz_t(), t.get_mpz_t(), pk_->n().get_mpz_t());
}

mpz_class PaillierSecretKey::decrypt_integer(const mpz_class& c) const {
  mpz_class mp, mq;
  mpz_class cp = c % p2_;
  mpz_powm(mp.get_mpz_t(), cp.get_mpz_t(), mpz_class(p_ - 1).get_mpz_t(), p2_.get_mpz_t());
  mp = (l_func(mp, p_) * hp_) % p_;
  mpz_class cq = c % q2_;
  mpz_powm(mq.get_mpz_t(), cq.get_mpz_t(), mpz_class(q_ - 1).get_mpz_t(), q2_.get_mpz_t());
  mq = (l_func(mq, q_) * hq_) % q_;
  mpz_class h = ((mp - mq) * q_inv_p_) % p_;
  if (sgn(h) < 0) h += p_;
  return mq + h * q_;
}

mpz_class PaillierSecretKey::decrypt_integer_textbook(const mpz_class& c) const {
  mpz_class u;
  mpz_powm(u.get_mpz_t(), c.get_mpz_t(), lambda_.get_mpz_t(), pk_->n_squared().get_mpz_t());
  return (l_func(u, pk_->n()) * mu_) % pk_->n();
}

RingVector PaillierSecretKey::decrypt(const Ciphertext& ct, const RingParams& p) const {
  check_key(ct, pk_->id());
  RingVector out(p, ct.element_count());
  mpz_class low;
  for (std::size_t i = 0; i < ct.element_count(); ++i) {
    const mpz_class m = decrypt_integer(pk_->from_blob(ct.elements[i]));
    mpz_fdiv_r_2exp(low.get_mpz_t(), m.get_mpz_t(), 64);
    std::uint64_t v = 0;
    std::size_t count = 0;
    mpz_export(&v, &count, -1, sizeof v, 0, 0, low.get_mpz_t());
    out.raw()[i] = v & p.mask();
  }
  return out;
}

KeyPair paillier_keygen(unsigned bits, Prg& rng) {
  if (bits < 64 || bits % 16 != 0) throw ConfigError("paillier: key size must be a multiple of 16, >= 64");
  mpz_class p, q, n;
  do {
    p = random_prime(bits / 2, rng);
    q = random_prime(bits / 2, rng);
    n = p * q;
  } while (p == q || mpz_sizeinbase(n.get_mpz_t(), 2) != bits ||
           gcd(n, mpz_class((p - 1) * (q - 1))) != 1);
  auto pk = std::make_shared<const PaillierPublicKey>(n, bits);
  auto sk = std::make_shared<const PaillierSecretKey>(pk, p, q);
  return {pk, sk};
}

std::shared_ptr<const PaillierPublicKey> deserialize_paillier(ByteReader& r) {
  const unsigned bits = r.u32();
  const std::uint32_t len = r.u32();
  const auto nb = r.bytes(len);
  r.expect_done("paillier public key");
  return std::make_shared<const PaillierPublicKey>(import_le(nb), bits);
}

}  // namespace pmdi::lhe

// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <gmpxx.h>

#include "pmdi/lhe.hpp"

namespace pmdi::lhe {

/// Paillier with g = n + 1. Ciphertext blobs are c mod n^2, fixed width, little-endian.
class PaillierPublicKey final : public PublicKey {
 public:
  PaillierPublicKey(mpz_class n, unsigned bits);

  Backend backend() const override { return Backend::Paillier; }
  std::uint64_t id() const override { return id_; }
  unsigned security_bits() const override { return bits_; }
  std::size_t element_bytes() const override { return 4 + blob_bytes_; }
  unsigned plaintext_bits() const override { return static_cast<unsigned>(mpz_sizeinbase(n_.get_mpz_t(), 2)) - 1; }

  Ciphertext encrypt(const RingVector& v, Prg& rng) const override;
  Ciphertext scale(std::span<const std::uint64_t> a, const Ciphertext& x) const override;
  Ciphertext add(const Ciphertext& x, const Ciphertext& y) const override;
  Ciphertext eval_linear(std::span<const std::uint64_t> matrix, std::size_t rows, std::size_t cols,
                         unsigned ring_bits, const Ciphertext& x, const Ciphertext& b,
                         Exec exec) const override;
  Bytes serialize() const override;

  const mpz_class& n() const noexcept { return n_; }
  const mpz_class& n_squared() const noexcept { return n2_; }

  /// Encrypts an arbitrary plaintext in [0, n).
  mpz_class encrypt_integer(const mpz_class& m, Prg& rng) const;
  Bytes to_blob(const mpz_class& c) const;
  mpz_class from_blob(std::span<const std::uint8_t> blob) const;

 private:
  mpz_class n_;
  mpz_class n2_;
  unsigned bits_;
  std::size_t blob_bytes_;
  std::uint64_t id_;
};

class PaillierSecretKey final : public SecretKey {
 public:
  PaillierSecretKey(std::shared_ptr<const PaillierPublicKey> pk, mpz_class p, mpz_class q);

  std::uint64_t id() const override { return pk_->id(); }
  RingVector decrypt(const Ciphertext& ct, const RingParams& p) const override;

  /// CRT decryption of a single element.
  mpz_class decrypt_integer(const mpz_class& c) const;
  /// Textbook L(c^lambda mod n^2) * mu mod n; kept as an independent route for tests.
  mpz_class decrypt_integer_textbook(const mpz_class& c) const;

 private:
  std::shared_ptr<const PaillierPublicKey> pk_;
  mpz_class p_, q_, p2_, q2_, hp_, hq_, q_inv_p_;
  mpz_class lambda_, mu_;
};

KeyPair paillier_keygen(unsigned bits, Prg& rng);

}  // namespace pmdi::lhe

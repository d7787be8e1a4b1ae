// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pmdi/bytes.hpp"
#include "pmdi/kernels.hpp"
#include "pmdi/prg.hpp"
#include "pmdi/ring.hpp"

namespace pmdi::lhe {

enum class Backend { Paillier, Mock };

Backend parse_backend(const std::string& name);
std::string to_string(Backend b);

/// Vector of per-element ciphertexts.
///
/// Plaintexts live in the scheme's plaintext space (integers mod n for Paillier),
/// never reduced mod 2^N until decryption. `bound_bits` tracks an upper bound on
/// the plaintext bit length so homomorphic evaluation can refuse to wrap.
struct Ciphertext {
  std::uint64_t key_id = 0;
  /// Wire bytes per element including the 4-byte length prefix. N_enc = 8 * element_bytes.
  std::size_t element_bytes = 0;
  unsigned bound_bits = 0;
  std::vector<Bytes> elements;

  std::size_t element_count() const noexcept { return elements.size(); }
  std::size_t byte_size() const noexcept { return element_bytes * elements.size(); }
};

class PublicKey {
 public:
  virtual ~PublicKey() = default;

  virtual Backend backend() const = 0;
  virtual std::uint64_t id() const = 0;
  virtual unsigned security_bits() const = 0;
  /// Serialized bytes per ciphertext element, length prefix included.
  virtual std::size_t element_bytes() const = 0;
  /// Largest plaintext bit length that decrypts without wrapping.
  virtual unsigned plaintext_bits() const = 0;

  /// Elements of v are taken as integers in [0, 2^N).
  virtual Ciphertext encrypt(const RingVector& v, Prg& rng) const = 0;

  /// Elementwise a_i * x_i (plaintext scalars).
  virtual Ciphertext scale(std::span<const std::uint64_t> a, const Ciphertext& x) const = 0;
  virtual Ciphertext add(const Ciphertext& x, const Ciphertext& y) const = 0;

  /// Encrypts M x + b for plaintext M (rows x cols, row-major, entries in [0, 2^N)).
  /// Throws DimensionError on shape mismatch and OverflowError when the plaintext bound
  /// would exceed plaintext_bits().
  virtual Ciphertext eval_linear(std::span<const std::uint64_t> matrix, std::size_t rows,
                                 std::size_t cols, unsigned ring_bits, const Ciphertext& x,
                                 const Ciphertext& b, Exec exec = Exec::Parallel) const = 0;

  virtual Bytes serialize() const = 0;
};

class SecretKey {
 public:
  virtual ~SecretKey() = default;
  virtual std::uint64_t id() const = 0;
  /// Decrypts and reduces mod 2^N. Throws ProtocolError for a foreign ciphertext.
  virtual RingVector decrypt(const Ciphertext& ct, const RingParams& p) const = 0;
};

struct KeyPair {
  std::shared_ptr<const PublicKey> pk;
  std::shared_ptr<const SecretKey> sk;
};

/// security_bits is the modulus size; 1024 for tests, 2048 default.
KeyPair keygen(Backend backend, unsigned security_bits, Prg& rng);

std::shared_ptr<const PublicKey> deserialize_public_key(std::span<const std::uint8_t> bytes);

/// Wire format: per element, u32 little-endian length followed by the blob.
void write_ciphertext(ByteWriter& w, const Ciphertext& ct);
Ciphertext read_ciphertext(ByteReader& r, const PublicKey& pk, std::size_t count, unsigned bound_bits);

/// Bit bound for eval_linear's result; shared by both backends.
unsigned linear_bound_bits(unsigned ring_bits, std::size_t cols, unsigned x_bits, unsigned b_bits);

}  // namespace pmdi::lhe

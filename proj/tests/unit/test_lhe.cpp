// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "pmdi/errors.hpp"
#include "pmdi/kernels.hpp"
#include "pmdi/lhe.hpp"

using namespace pmdi;

namespace {

RingVector random_vec(const RingParams& p, std::size_t n, Prg& rng) {
  RingVector v(p, n);
  for (auto& x : v.raw()) x = rng.next_bits(p.bit_width);
  return v;
}

}  // namespace

TEST_CASE("both backends satisfy the homomorphic identities") {
  const RingParams p{32, 12};
  for (auto backend : {lhe::Backend::Mock, lhe::Backend::Paillier}) {
    CAPTURE(lhe::to_string(backend));
    Prg rng(seed_from_u64(1), static_cast<std::uint64_t>(backend));
    const auto kp = lhe::keygen(backend, 512, rng);
    const auto& pk = *kp.pk;

    const RingVector x = random_vec(p, 6, rng);
    CHECK(kp.sk->decrypt(pk.encrypt(x, rng), p) == x);
    CHECK(kp.sk->decrypt(pk.encrypt(RingVector(p, 1), rng), p) == RingVector(p, 1));

    const auto z1 = pk.encrypt(RingVector(p, 1), rng);
    const auto z2 = pk.encrypt(RingVector(p, 1), rng);
    if (backend == lhe::Backend::Paillier) CHECK(z1.elements != z2.elements);

    // a * x + y
    for (int k = 0; k < 20; ++k) {
      const RingVector a = random_vec(p, 3, rng), xv = random_vec(p, 3, rng), y = random_vec(p, 3, rng);
      const auto ct = pk.add(pk.scale(a.values(), pk.encrypt(xv, rng)), pk.encrypt(y, rng));
      RingVector want(p, 3);
      for (std::size_t i = 0; i < 3; ++i) want.set(i, a[i] * xv[i] + y[i]);
      CHECK(kp.sk->decrypt(ct, p) == want);
    }

    // identity matrix, zero bias
    const std::vector<std::uint64_t> eye = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    const RingVector x3 = random_vec(p, 3, rng);
    const auto id = pk.eval_linear(eye, 3, 3, 32, pk.encrypt(x3, rng), pk.encrypt(RingVector(p, 3), rng));
    CHECK(kp.sk->decrypt(id, p) == x3);

    // [[2]] * 3 + 5
    const auto s = pk.eval_linear(std::vector<std::uint64_t>{2}, 1, 1, 32, pk.encrypt(RingVector(p, {3}), rng),
                                  pk.encrypt(RingVector(p, {5}), rng));
    CHECK(kp.sk->decrypt(s, p) == RingVector(p, {11}));

    // random 4x4 against the plaintext kernel
    const RingVector M = random_vec(p, 16, rng), c = random_vec(p, 4, rng), b = random_vec(p, 4, rng);
    const auto lin = pk.eval_linear(M.values(), 4, 4, 32, pk.encrypt(c, rng), pk.encrypt(b, rng));
    CHECK(kp.sk->decrypt(lin, p) == ring::add(kernels::matvec(p, M.values(), 4, 4, c), b));

    CHECK_THROWS_AS(pk.eval_linear(M.values(), 4, 3, 32, pk.encrypt(c, rng), pk.encrypt(b, rng)), DimensionError);
    CHECK(pk.element_bytes() > 4);
    CHECK(lin.byte_size() == 4 * pk.element_bytes());
  }
}

TEST_CASE("paillier wire format round trips") {
  const RingParams p{32, 0};
  Prg rng(seed_from_u64(2));
  const auto kp = lhe::keygen(lhe::Backend::Paillier, 512, rng);
  const auto pk2 = lhe::deserialize_public_key(kp.pk->serialize());
  CHECK(pk2->id() == kp.pk->id());
  CHECK(pk2->element_bytes() == kp.pk->element_bytes());
  CHECK(kp.pk->element_bytes() == 4 + 128);  // n^2 for a 512-bit modulus, plus the length prefix

  const RingVector x(p, {1, 2, 3});
  const auto ct = pk2->encrypt(x, rng);
  ByteWriter w;
  lhe::write_ciphertext(w, ct);
  CHECK(w.size() == ct.byte_size());
  const Bytes bytes = std::move(w).take();
  ByteReader r(bytes);
  const auto back = lhe::read_ciphertext(r, *kp.pk, 3, 32);
  CHECK(r.done());
  CHECK(kp.sk->decrypt(back, p) == x);
}

TEST_CASE("foreign ciphertexts and overflow are rejected") {
  const RingParams p{32, 0};
  Prg rng(seed_from_u64(3));
  const auto a = lhe::keygen(lhe::Backend::Paillier, 256, rng);
  const auto b = lhe::keygen(lhe::Backend::Paillier, 256, rng);
  CHECK_THROWS_AS(b.sk->decrypt(a.pk->encrypt(RingVector(p, {1}), rng), p), ProtocolError);

  // each plaintext scale widens the bound by 64 bits; a 256-bit modulus runs out after a few
  auto ct = a.pk->encrypt(RingVector(p, {3}), rng);
  const std::vector<std::uint64_t> k = {0xFFFFFFFFULL};
  auto widen = [&] {
    for (int i = 0; i < 8; ++i) ct = a.pk->scale(k, ct);
  };
  CHECK_THROWS_AS(widen(), OverflowError);
  CHECK(ct.bound_bits <= a.pk->plaintext_bits());
  CHECK(lhe::linear_bound_bits(32, 16, 32, 32) < 32 + 32 + 6);
}

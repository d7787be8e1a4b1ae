// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <set>

#include "pmdi/bytes.hpp"
#include "pmdi/prg.hpp"

using namespace pmdi;

TEST_CASE("prg is deterministic per seed and stream") {
  Prg a(seed_from_u64(1), 0);
  Prg b(seed_from_u64(1), 0);
  Prg c(seed_from_u64(1), 1);
  Prg d(seed_from_u64(2), 0);
  std::vector<std::uint64_t> va, vb, vc, vd;
  for (int i = 0; i < 200; ++i) {
    va.push_back(a.next_u64());
    vb.push_back(b.next_u64());
    vc.push_back(c.next_u64());
    vd.push_back(d.next_u64());
  }
  CHECK(va == vb);
  CHECK(va != vc);
  CHECK(va != vd);
}

TEST_CASE("next_bits stays in range and covers it") {
  Prg p(seed_from_u64(9), 0);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto v = p.next_bits(4);
    CHECK(v < 16);
    seen.insert(v);
  }
  CHECK(seen.size() == 16);
  CHECK(p.next_bits(64) != p.next_bits(64));
}

TEST_CASE("bit frequency is balanced") {
  Prg p(seed_from_u64(5), 3);
  int ones = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) ones += p.next_bit() ? 1 : 0;
  CHECK(std::abs(ones - n / 2) < 1000);
}

TEST_CASE("derive_seed separates labels") {
  const Seed s = seed_from_u64(3);
  CHECK(derive_seed(s, "a") != derive_seed(s, "b"));
  CHECK(derive_seed(s, "a") == derive_seed(s, "a"));
  CHECK(derive_seed(s, "a") != s);
}

TEST_CASE("byte codec and base64") {
  ByteWriter w;
  w.u8(1);
  w.u16(0x0203);
  w.u32(0x04050607);
  w.u64(0x08090A0B0C0D0E0FULL);
  const Bytes b = std::move(w).take();
  CHECK(b.size() == 15);
  CHECK(b[1] == 0x03);
  ByteReader r(b);
  CHECK(r.u8() == 1);
  CHECK(r.u16() == 0x0203);
  CHECK(r.u32() == 0x04050607);
  CHECK(r.u64() == 0x08090A0B0C0D0E0FULL);
  CHECK(r.done());
  CHECK_THROWS(r.u8());

  CHECK(base64_encode(Bytes{'f', 'o', 'o', 'b'}) == "Zm9vYg==");
  CHECK(base64_decode("Zm9vYmE=") == Bytes{'f', 'o', 'o', 'b', 'a'});
  CHECK(base64_decode(base64_encode(b)) == b);
}

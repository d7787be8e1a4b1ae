// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>

namespace pmdi {

using Seed = std::array<std::uint8_t, 32>;

Seed seed_from_u64(std::uint64_t value);
/// Domain-separated child seed: SHA-256(parent || label).
Seed derive_seed(const Seed& parent, std::string_view label);

/// Counter-mode PRG: AES-256-CTR keyed by the seed, IV = stream id || block counter.
/// Two instances with the same (seed, stream) produce the same byte stream.
class Prg {
 public:
  explicit Prg(const Seed& seed, std::uint64_t stream = 0);
  ~Prg();
  Prg(Prg&&) noexcept;
  Prg& operator=(Prg&&) noexcept;
  Prg(const Prg&) = delete;
  Prg& operator=(const Prg&) = delete;

  void fill(std::span<std::uint8_t> out);
  std::uint64_t next_u64();
  bool next_bit();
  /// Uniform in [0, 2^bits).
  std::uint64_t next_bits(unsigned bits);

 private:
  void refill();

  struct Ctx;
  std::unique_ptr<Ctx> ctx_;
  std::array<std::uint8_t, 512> buf_{};
  std::size_t pos_ = buf_.size();
};

}  // namespace pmdi

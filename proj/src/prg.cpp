// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#include "pmdi/prg.hpp"

#include <openssl/evp.h>
#include <openssl/sha.h>

#include <cstring>
#include <stdexcept>
#include <vector>

namespace pmdi {

Seed seed_from_u64(std::uint64_t value) {
  std::uint8_t in[8];
  for (int i = 0; i < 8; ++i) in[i] = static_cast<std::uint8_t>(value >> (8 * i));
  Seed out{};
  SHA256(in, sizeof in, out.data());
  return out;
}

Seed derive_seed(const Seed& parent, std::string_view label) {
  std::vector<std::uint8_t> in(parent.begin(), parent.end());
  in.insert(in.end(), label.begin(), label.end());
  Seed out{};
  SHA256(in.data(), in.size(), out.data());
  return out;
}

struct Prg::Ctx {
  EVP_CIPHER_CTX* ctx = nullptr;
  ~Ctx() {
    if (ctx != nullptr) EVP_CIPHER_CTX_free(ctx);
  }
};

Prg::Prg(const Seed& seed, std::uint64_t stream) : ctx_(std::make_unique<Ctx>()) {
  std::uint8_t iv[16] = {};
  for (int i = 0; i < 8; ++i) iv[i] = static_cast<std::uint8_t>(stream >> (56 - 8 * i));
  ctx_->ctx = EVP_CIPHER_CTX_new();
  if (ctx_->ctx == nullptr ||
      EVP_EncryptInit_ex(ctx_->ctx, EVP_aes_256_ctr(), nullptr, seed.data(), iv) != 1) {
    throw std::runtime_error("Prg: AES-256-CTR init failed");
  }
}

Prg::~Prg() = default;
Prg::Prg(Prg&&) noexcept = default;
Prg& Prg::operator=(Prg&&) noexcept = default;

void Prg::refill() {
  static const std::array<std::uint8_t, 512> zeros{};
  int len = 0;
  if (EVP_EncryptUpdate(ctx_->ctx, buf_.data(), &len, zeros.data(), static_cast<int>(zeros.size())) != 1 ||
      len != static_cast<int>(buf_.size())) {
    throw std::runtime_error("Prg: keystream generation failed");
  }
  pos_ = 0;
}

void Prg::fill(std::span<std::uint8_t> out) {
  std::size_t done = 0;
  while (done < out.size()) {
    if (pos_ == buf_.size()) refill();
    const std::size_t n = std::min(out.size() - done, buf_.size() - pos_);
    std::memcpy(out.data() + done, buf_.data() + pos_, n);
    pos_ += n;
    done += n;
  }
}

std::uint64_t Prg::next_u64() {
  std::uint8_t b[8];
  fill(b);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{b[i]} << (8 * i);
  return v;
}

bool Prg::next_bit() {
  std::uint8_t b = 0;
  fill({&b, 1});
  return (b & 1U) != 0;
}

std::uint64_t Prg::next_bits(unsigned bits) {
  const std::uint64_t v = next_u64();
  return bits >= 64 ? v : v & ((std::uint64_t{1} << bits) - 1);
}

}  // namespace pmdi

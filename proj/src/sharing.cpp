// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#include "pmdi/sharing.hpp"

#include <stdexcept>

#include "pmdi/errors.hpp"

namespace pmdi::sharing {

ShareSet shr(const RingVector& secret, std::size_t m, Prg& rng) {
  if (m == 0) throw std::invalid_argument("shr: share count must be >= 1");
  const RingParams& p = secret.params();
  ShareSet out;
  out.shares.reserve(m);
  RingVector last = secret;
  for (std::size_t k = 0; k + 1 < m; ++k) {
    RingVector share(p, secret.size());
    for (std::size_t i = 0; i < secret.size(); ++i) {
      share.raw()[i] = rng.next_bits(p.bit_width);
      last.raw()[i] = ring::sub(p, last[i], share[i]);
    }
    out.shares.push_back(std::move(share));
  }
  out.shares.push_back(std::move(last));
  return out;
}

RingVector reconstruct(const ShareSet& shares) {
  if (shares.shares.empty()) throw DimensionError("reconstruct: no shares");
  if (!shares.owners.empty() && shares.owners.size() != shares.shares.size()) {
    throw DimensionError("reconstruct: owner tags do not match share count");
  }
  RingVector acc = shares.shares.front();
  for (std::size_t k = 1; k < shares.shares.size(); ++k) acc = ring::add(acc, shares.shares[k]);
  return acc;
}

}  // namespace pmdi::sharing

// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "pmdi/prg.hpp"
#include "pmdi/ring.hpp"

namespace pmdi {

/// m-of-m additive sharing. shares[k] belongs to owners[k] when owner tags are set.
struct ShareSet {
  std::vector<RingVector> shares;
  std::vector<std::uint32_t> owners;

  std::size_t share_count() const noexcept { return shares.size(); }
};

namespace sharing {

/// The first m-1 shares are drawn from `rng` in order (share 0 element 0 first);
/// the last share is secret minus their sum. Throws std::invalid_argument for m == 0.
ShareSet shr(const RingVector& secret, std::size_t m, Prg& rng);

/// Elementwise modular sum. Throws DimensionError on empty set or mismatched shares.
RingVector reconstruct(const ShareSet& shares);

}  // namespace sharing
}  // namespace pmdi

// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pmdi::alloc {

struct ClusterProfile {
  std::size_t id = 0;
  double gamma = 1.0;  // per-parameter compute delay, seconds
};

/// Contiguous 1-based layer range owned by one cluster.
struct LayerRange {
  std::size_t first = 0;
  std::size_t last = 0;
  std::size_t params = 0;

  bool contains(std::size_t layer) const noexcept { return layer >= first && layer <= last; }
};

struct Allocation {
  std::vector<LayerRange> ranges;  // one per cluster, in order

  std::size_t cluster_count() const noexcept { return ranges.size(); }
  /// 0-based cluster index owning a 1-based layer. Throws std::out_of_range.
  std::size_t cluster_of(std::size_t layer) const;
};

/// rho_j = W (1/gamma_j) / sum_m (1/gamma_m).
/// Throws std::invalid_argument for an empty profile list, W == 0, or gamma <= 0.
std::vector<double> armdi_targets(double total_params, std::span<const ClusterProfile> profiles);

/// Greedy contiguous split on cumulative parameter counts: cluster j ends at the
/// feasible layer boundary nearest the cumulative target sum_{k<=j} rho_k, leaving at
/// least one layer for each later cluster. Ties pick the smaller range.
/// Throws std::invalid_argument when there are more clusters than layers.
Allocation assign_layers(std::span<const std::size_t> layer_params, std::span<const double> targets);

}  // namespace pmdi::alloc

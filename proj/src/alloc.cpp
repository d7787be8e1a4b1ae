// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#include "pmdi/alloc.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pmdi::alloc {

std::size_t Allocation::cluster_of(std::size_t layer) const {
  for (std::size_t j = 0; j < ranges.size(); ++j) {
    if (ranges[j].contains(layer)) return j;
  }
  throw std::out_of_range("layer " + std::to_string(layer) + " is not allocated");
}

std::vector<double> armdi_targets(double total_params, std::span<const ClusterProfile> profiles) {
  if (profiles.empty()) throw std::invalid_argument("armdi_targets: no clusters");
  if (!(total_params > 0)) throw std::invalid_argument("armdi_targets: total parameter count must be positive");
  double inv_sum = 0;
  for (const auto& p : profiles) {
    if (!(p.gamma > 0)) throw std::invalid_argument("armdi_targets: gamma must be positive");
    inv_sum += 1.0 / p.gamma;
  }
  std::vector<double> rho;
  rho.reserve(profiles.size());
  double assigned = 0;
  for (std::size_t j = 0; j < profiles.size(); ++j) {
    if (j + 1 == profiles.size()) {
      // Last share absorbs rounding so the targets sum to W exactly.
      rho.push_back(total_params - assigned);
    } else {
      rho.push_back(total_params * (1.0 / profiles[j].gamma) / inv_sum);
      assigned += rho.back();
    }
  }
  return rho;
}

Allocation assign_layers(std::span<const std::size_t> layer_params, std::span<const double> targets) {
  const std::size_t layers = layer_params.size();
  const std::size_t clusters = targets.size();
  if (clusters == 0) throw std::invalid_argument("assign_layers: no clusters");
  if (clusters > layers) {
    throw std::invalid_argument("assign_layers: " + std::to_string(clusters) + " clusters but only " +
                                std::to_string(layers) + " layers");
  }
  std::vector<double> cum(layers + 1, 0.0);
  for (std::size_t l = 0; l < layers; ++l) cum[l + 1] = cum[l] + static_cast<double>(layer_params[l]);

  Allocation a;
  std::size_t start = 0;  // boundary index: layers [start, end) go to the current cluster
  double target_cum = 0;
  for (std::size_t j = 0; j < clusters; ++j) {
    target_cum += targets[j];
    std::size_t end = layers;
    if (j + 1 < clusters) {
      const std::size_t lo = start + 1;
      const std::size_t hi = layers - (clusters - j - 1);
      end = lo;
      double best = std::fabs(cum[lo] - target_cum);
      for (std::size_t e = lo + 1; e <= hi; ++e) {
        const double d = std::fabs(cum[e] - target_cum);
        if (d < best) {
          best = d;
          end = e;
        }
      }
    }
    a.ranges.push_back({start + 1, end, static_cast<std::size_t>(cum[end] - cum[start])});
    start = end;
  }
  return a;
}

}  // namespace pmdi::alloc

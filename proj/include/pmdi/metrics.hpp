// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmdi/alloc.hpp"
#include "pmdi/model.hpp"
#include "pmdi/transport.hpp"

namespace pmdi::metrics {

/// Symbols of the communication-cost formulas. Linear-layer formulas assume a
/// convolution with input (i, h, h) and kernel (o, g, g); a dense layer with c
/// inputs and r outputs is h = g = 1, i = c, o = r.
struct CostParams {
  double N = 32;
  double N_enc = 0;   // bits per ciphertext element, from the LHE backend
  double kappa = 128;
  double gc_bits = 0;  // |GC| per element, from a serialized GarbledUnit
  double n = 1;        // activations in the layer; 0 zeroes the nonlinear rows
  double h = 1, g = 1, i = 1, o = 1;
  double T = 1;
  double P = 1;
  double p = 67;  // SecureNN's smaller field; placeholder, used for reference predictions only
};

enum class Link { CloudClient, ClientEdge, EdgeEdge };
enum class Component { Linear, NonLinear };
std::string to_string(Link l);
std::string to_string(Component c);

/// One table cell, per element (per activation for nonlinear rows, per layer for linear rows).
struct CostCell {
  std::string scheme;
  Link link;
  Phase phase;  // schemes without an offline phase report Online
  Component component;
  double rounds = 0;
  double bits = 0;
  std::string rounds_expr;
  std::string bits_expr;
};

struct CostPrediction {
  std::vector<CostCell> cells;
  const CostCell* find(Link link, Phase phase, Component component) const;
  nlohmann::json to_json() const;
};

CostPrediction predict_pmdi(const CostParams& p);
/// Delphi, SecureNN and Falcon cells. Reference only; none of them is executed.
CostPrediction predict_baselines(const CostParams& p);

/// Facts about a finished run needed to line predictions up with the ledger.
struct RunFacts {
  ModelShape shape;
  alloc::Allocation allocation;
  unsigned kappa = 128;
  std::size_t colluding = 1;
  std::size_t he_element_bytes = 0;  // N_enc / 8
  std::size_t gc_unit_bytes = 0;     // |GC| / 8
  std::uint32_t sessions = 1;
};

/// Layer-specific parameters for a dense layer.
CostParams params_for_layer(const RunFacts& run, std::size_t layer);

struct Comparison {
  std::string cell;
  std::string pair;
  Phase phase = Phase::Offline;
  std::uint32_t layer = 0;
  std::optional<std::uint64_t> predicted_bytes;
  std::uint64_t measured_bytes = 0;
  std::optional<double> predicted_rounds;
  std::optional<std::uint64_t> measured_rounds;
  bool crisp = false;  // must match exactly
  bool match = false;
  std::string note;
};

struct DiscrepancyReport {
  std::vector<Comparison> rows;

  bool crisp_ok() const;
  nlohmann::json to_json() const;
  /// Fixed-width text table for the CLI.
  std::string table() const;
};

/// Bits to bytes, rounding up.
std::uint64_t bits_to_bytes(double bits);

DiscrepancyReport compare(const RunFacts& run, const LedgerReport& ledger);

/// Full metrics.json document.
nlohmann::json metrics_json(const RunFacts& run, const LedgerReport& ledger, const DiscrepancyReport& report,
                            double offline_seconds, double online_seconds);

}  // namespace pmdi::metrics

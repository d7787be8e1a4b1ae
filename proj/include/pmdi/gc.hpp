// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pmdi/bytes.hpp"
#include "pmdi/kernels.hpp"
#include "pmdi/label.hpp"
#include "pmdi/prg.hpp"
#include "pmdi/ring.hpp"

namespace pmdi::gc {

enum class Activation { None, ReLU };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

enum class GateOp : std::uint8_t { Xor, And, Not };

struct Gate {
  GateOp op;
  std::uint32_t a;
  std::uint32_t b;  // unused for Not
  std::uint32_t out;
};

/// An output bit is either a wire or a constant fixed by the circuit structure.
struct OutputBit {
  bool is_const = false;
  bool value = false;
  std::uint32_t wire = 0;
};

/// Boolean circuit with three N-bit input groups, laid out on wires [0, 3N):
/// garbler input w, then client inputs y1 and y2, each least significant bit first.
struct BoolCircuit {
  RingParams params;
  std::uint32_t wire_count = 0;
  std::vector<Gate> gates;  // topological order
  std::vector<OutputBit> outputs;  // least significant bit first

  std::size_t input_count() const noexcept { return 3 * params.bit_width; }
  std::uint32_t w_wire(unsigned k) const noexcept { return k; }
  std::uint32_t y1_wire(unsigned k) const noexcept { return params.bit_width + k; }
  std::uint32_t y2_wire(unsigned k) const noexcept { return 2 * params.bit_width + k; }

  std::size_t and_count() const noexcept;
  std::size_t wire_output_count() const noexcept;
  /// Structural hash of gates and outputs.
  std::uint64_t hash() const;

  /// Plaintext evaluation over bits; `inputs` has input_count() entries.
  std::vector<bool> evaluate(const std::vector<bool>& inputs) const;
  /// Plaintext evaluation on ring values.
  std::uint64_t evaluate(std::uint64_t w, std::uint64_t y1, std::uint64_t y2) const;
};

/// out = truncate(act(w + y1), f) - y2 over N-bit two's complement.
/// Throws std::invalid_argument for Activation::None.
BoolCircuit build_nonlinear_block(const RingParams& params, Activation activation);

/// Garbled form of one circuit instance as sent to the evaluator.
struct GarbledUnit {
  std::uint64_t circuit_hash = 0;
  unsigned kappa = 0;
  unsigned bit_width = 0;
  unsigned frac_bits = 0;
  std::vector<Label> tables;             // 4 rows per AND gate, in gate order
  std::vector<Label> decode0, decode1;   // per wire output: H_out(label of 0), H_out(label of 1)

  /// Serialized size; this is |GC| for one element.
  std::size_t byte_size() const noexcept;
  void write(ByteWriter& w) const;
  static GarbledUnit read(ByteReader& r, const BoolCircuit& circuit, unsigned kappa);
};

/// Garbler-side secrets of one GarbledUnit.
struct InputLabels {
  Label delta;
  std::vector<Label> zero;  // zero-label per input wire

  Label label(std::size_t wire, bool value) const { return value ? zero[wire] ^ delta : zero[wire]; }
};

struct Garbling {
  GarbledUnit unit;
  InputLabels inputs;
};

/// Free-XOR, point-and-permute, four-row AND tables with a SHA-256 PRF over
/// (label_a, label_b, gate index). kappa must be a multiple of 8 in [8, 128].
Garbling garble(const BoolCircuit& circuit, Prg& rng, unsigned kappa);

/// Evaluates with one label per input wire (circuit input order) and returns the
/// decoded ring value. Throws ProtocolError if an output label matches neither
/// decode entry, which is how corrupted or foreign labels surface.
std::uint64_t eval(const BoolCircuit& circuit, const GarbledUnit& unit, std::span<const Label> input_labels);

/// Garbles `count` independent units; unit e uses Prg(seed, stream_base + e), so the
/// result does not depend on `exec`.
std::vector<Garbling> garble_batch(const BoolCircuit& circuit, std::size_t count, const Seed& seed,
                                   std::uint64_t stream_base, unsigned kappa, Exec exec = Exec::Parallel);

/// labels[e] holds the input labels for unit e.
std::vector<std::uint64_t> eval_batch(const BoolCircuit& circuit, std::span<const GarbledUnit> units,
                                      std::span<const std::vector<Label>> labels, Exec exec = Exec::Parallel);

}  // namespace pmdi::gc

// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#include "pmdi/gc.hpp"

#include <openssl/evp.h>

#include <stdexcept>

#include "pmdi/errors.hpp"

namespace pmdi::gc {

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::ReLU;
  if (name == "none" || name.empty()) return Activation::None;
  throw ConfigError("unsupported activation '" + name + "'");
}

std::string to_string(Activation a) { return a == Activation::ReLU ? "relu" : "none"; }

std::size_t BoolCircuit::and_count() const noexcept {
  std::size_t n = 0;
  for (const auto& g : gates) n += g.op == GateOp::And ? 1 : 0;
  return n;
}

std::size_t BoolCircuit::wire_output_count() const noexcept {
  std::size_t n = 0;
  for (const auto& o : outputs) n += o.is_const ? 0 : 1;
  return n;
}

std::uint64_t BoolCircuit::hash() const {
  // FNV-1a over the structure.
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xFF;
      h *= 1099511628211ULL;
    }
  };
  mix(params.bit_width);
  mix(params.frac_bits);
  mix(wire_count);
  for (const auto& g : gates) {
    mix(static_cast<std::uint64_t>(g.op));
    mix(g.a);
    mix(g.b);
    mix(g.out);
  }
  for (const auto& o : outputs) {
    mix(o.is_const ? 2 + static_cast<std::uint64_t>(o.value) : 0);
    mix(o.wire);
  }
  return h;
}

std::vector<bool> BoolCircuit::evaluate(const std::vector<bool>& inputs) const {
  if (inputs.size() != input_count()) throw std::invalid_argument("evaluate: wrong input count");
  std::vector<bool> v(wire_count, false);
  for (std::size_t i = 0; i < inputs.size(); ++i) v[i] = inputs[i];
  for (const auto& g : gates) {
    switch (g.op) {
      case GateOp::Xor: v[g.out] = v[g.a] != v[g.b]; break;
      case GateOp::And: v[g.out] = v[g.a] && v[g.b]; break;
      case GateOp::Not: v[g.out] = !v[g.a]; break;
    }
  }
  std::vector<bool> out;
  out.reserve(outputs.size());
  for (const auto& o : outputs) out.push_back(o.is_const ? o.value : v[o.wire]);
  return out;
}

std::uint64_t BoolCircuit::evaluate(std::uint64_t w, std::uint64_t y1, std::uint64_t y2) const {
  const unsigned n = params.bit_width;
  std::vector<bool> in(input_count());
  for (unsigned k = 0; k < n; ++k) {
    in[w_wire(k)] = ((w >> k) & 1U) != 0;
    in[y1_wire(k)] = ((y1 >> k) & 1U) != 0;
    in[y2_wire(k)] = ((y2 >> k) & 1U) != 0;
  }
  const auto bits = evaluate(in);
  std::uint64_t out = 0;
  for (std::size_t k = 0; k < bits.size(); ++k) out |= std::uint64_t{bits[k]} << k;
  return out;
}

namespace {

struct Bit {
  bool is_const;
  bool value;
  std::uint32_t wire;
};

Bit constant(bool v) { return {true, v, 0}; }
Bit wire(std::uint32_t w) { return {false, false, w}; }

/// Constant-folding builder; constants never reach the gate list.
class Builder {
 public:
  explicit Builder(BoolCircuit& c) : c_(c) {}

  Bit not_(Bit a) {
    if (a.is_const) return constant(!a.value);
    return emit(GateOp::Not, a.wire, 0);
  }
  Bit xor_(Bit a, Bit b) {
    if (a.is_const && b.is_const) return constant(a.value != b.value);
    if (a.is_const) return a.value ? not_(b) : b;
    if (b.is_const) return b.value ? not_(a) : a;
    return emit(GateOp::Xor, a.wire, b.wire);
  }
  Bit and_(Bit a, Bit b) {
    if (a.is_const) return a.value ? b : constant(false);
    if (b.is_const) return b.value ? a : constant(false);
    return emit(GateOp::And, a.wire, b.wire);
  }

  /// Ripple-carry a + b + carry_in, N bits, final carry dropped. One AND per bit.
  std::vector<Bit> add(const std::vector<Bit>& a, const std::vector<Bit>& b, Bit carry) {
    std::vector<Bit> sum(a.size(), constant(false));
    for (std::size_t k = 0; k < a.size(); ++k) {
      const Bit ac = xor_(a[k], carry);
      const Bit bc = xor_(b[k], carry);
      sum[k] = xor_(ac, b[k]);
      if (k + 1 < a.size()) carry = xor_(and_(ac, bc), carry);
    }
    return sum;
  }

 private:
  Bit emit(GateOp op, std::uint32_t a, std::uint32_t b) {
    const std::uint32_t out = c_.wire_count++;
    c_.gates.push_back({op, a, b, out});
    return wire(out);
  }
  BoolCircuit& c_;
};

}  // namespace

BoolCircuit build_nonlinear_block(const RingParams& params, Activation activation) {
  params.validate();
  if (activation != Activation::ReLU) throw std::invalid_argument("build_nonlinear_block: unsupported activation");
  const unsigned n = params.bit_width;
  const unsigned f = params.frac_bits;

  BoolCircuit c;
  c.params = params;
  c.wire_count = 3 * n;
  Builder b(c);

  std::vector<Bit> w(n, constant(false)), y1(n, constant(false)), y2(n, constant(false));
  for (unsigned k = 0; k < n; ++k) {
    w[k] = wire(c.w_wire(k));
    y1[k] = wire(c.y1_wire(k));
    y2[k] = wire(c.y2_wire(k));
  }

  // (1) v = w + y1
  const std::vector<Bit> v = b.add(w, y1, constant(false));
  // (2) ReLU keeps v when the sign bit is clear; truncation is a rewiring of bits f..N-1.
  const Bit keep = b.not_(v[n - 1]);
  std::vector<Bit> relu(n, constant(false));
  for (unsigned k = 0; k + f < n; ++k) {
    const unsigned src = k + f;
    relu[k] = src == n - 1 ? constant(false) : b.and_(v[src], keep);
  }
  // (3) relu - y2 = relu + ~y2 + 1
  std::vector<Bit> not_y2(n, constant(false));
  for (unsigned k = 0; k < n; ++k) not_y2[k] = b.not_(y2[k]);
  const std::vector<Bit> out = b.add(relu, not_y2, constant(true));

  c.outputs.reserve(n);
  for (const auto& bit : out) c.outputs.push_back({bit.is_const, bit.value, bit.wire});
  return c;
}

namespace {

/// SHA-256 based PRF, truncated to kappa bits.
class Hasher {
 public:
  Hasher() : ctx_(EVP_MD_CTX_new()) {
    if (ctx_ == nullptr) throw std::runtime_error("EVP_MD_CTX_new failed");
  }
  ~Hasher() { EVP_MD_CTX_free(ctx_); }
  Hasher(const Hasher&) = delete;
  Hasher& operator=(const Hasher&) = delete;

  Label gate(const Label& a, const Label& b, std::uint64_t gid) {
    std::uint8_t buf[2 * 16 + 9];
    std::size_t len = put(buf, 0, a);
    len = put(buf, len, b);
    for (int i = 0; i < 8; ++i) buf[len++] = static_cast<std::uint8_t>(gid >> (8 * i));
    buf[len++] = 0x01;
    return digest(buf, len, a.bits());
  }

  Label output(const Label& a, std::uint64_t index) {
    std::uint8_t buf[16 + 9];
    std::size_t len = put(buf, 0, a);
    for (int i = 0; i < 8; ++i) buf[len++] = static_cast<std::uint8_t>(index >> (8 * i));
    buf[len++] = 0x02;
    return digest(buf, len, a.bits());
  }

 private:
  static std::size_t put(std::uint8_t* buf, std::size_t at, const Label& l) {
    for (std::size_t i = 0; i < l.byte_size(); ++i) {
      buf[at + i] = static_cast<std::uint8_t>(l.words()[i / 8] >> (8 * (i % 8)));
    }
    return at + l.byte_size();
  }

  Label digest(const std::uint8_t* buf, std::size_t len, unsigned bits) {
    std::uint8_t md[32];
    unsigned int md_len = 0;
    if (EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1 || EVP_DigestUpdate(ctx_, buf, len) != 1 ||
        EVP_DigestFinal_ex(ctx_, md, &md_len) != 1) {
      throw std::runtime_error("SHA-256 failed");
    }
    ByteReader r({md, md_len});
    return Label::read(r, bits);
  }

  EVP_MD_CTX* ctx_;
};

Hasher& thread_hasher() {
  thread_local Hasher h;
  return h;
}

void check_kappa(unsigned kappa) {
  if (kappa < 8 || kappa > Label::kMaxBits || kappa % 8 != 0) {
    throw ConfigError("kappa must be a multiple of 8 in [8, 128], got " + std::to_string(kappa));
  }
}

}  // namespace

std::size_t GarbledUnit::byte_size() const noexcept {
  const std::size_t lb = kappa / 8;
  return 8 + 2 + 1 + 1 + tables.size() * lb + (decode0.size() + decode1.size()) * lb;
}

void GarbledUnit::write(ByteWriter& w) const {
  w.u64(circuit_hash);
  w.u16(static_cast<std::uint16_t>(kappa));
  w.u8(static_cast<std::uint8_t>(bit_width));
  w.u8(static_cast<std::uint8_t>(frac_bits));
  for (const auto& t : tables) t.write(w);
  for (std::size_t j = 0; j < decode0.size(); ++j) {
    decode0[j].write(w);
    decode1[j].write(w);
  }
}

GarbledUnit GarbledUnit::read(ByteReader& r, const BoolCircuit& circuit, unsigned kappa) {
  GarbledUnit u;
  u.circuit_hash = r.u64();
  u.kappa = r.u16();
  u.bit_width = r.u8();
  u.frac_bits = r.u8();
  if (u.circuit_hash != circuit.hash() || u.kappa != kappa || u.bit_width != circuit.params.bit_width ||
      u.frac_bits != circuit.params.frac_bits) {
    throw ProtocolError("garbled unit header does not match the expected circuit");
  }
  const std::size_t rows = 4 * circuit.and_count();
  u.tables.reserve(rows);
  for (std::size_t i = 0; i < rows; ++i) u.tables.push_back(Label::read(r, kappa));
  const std::size_t outs = circuit.wire_output_count();
  for (std::size_t j = 0; j < outs; ++j) {
    u.decode0.push_back(Label::read(r, kappa));
    u.decode1.push_back(Label::read(r, kappa));
  }
  return u;
}

Garbling garble(const BoolCircuit& circuit, Prg& rng, unsigned kappa) {
  check_kappa(kappa);
  Hasher& h = thread_hasher();

  Garbling g;
  Label delta = Label::random(kappa, rng);
  delta.set_bit(0, true);
  g.inputs.delta = delta;

  std::vector<Label> zero(circuit.wire_count);
  for (std::size_t i = 0; i < circuit.input_count(); ++i) zero[i] = Label::random(kappa, rng);
  g.inputs.zero.assign(zero.begin(), zero.begin() + static_cast<std::ptrdiff_t>(circuit.input_count()));

  GarbledUnit& u = g.unit;
  u.circuit_hash = circuit.hash();
  u.kappa = kappa;
  u.bit_width = circuit.params.bit_width;
  u.frac_bits = circuit.params.frac_bits;
  u.tables.reserve(4 * circuit.and_count());

  std::uint64_t gid = 0;
  for (const auto& gate : circuit.gates) {
    switch (gate.op) {
      case GateOp::Xor:
        zero[gate.out] = zero[gate.a] ^ zero[gate.b];
        break;
      case GateOp::Not:
        zero[gate.out] = zero[gate.a] ^ delta;
        break;
      case GateOp::And: {
        zero[gate.out] = Label::random(kappa, rng);
        Label rows[4];
        for (int ia = 0; ia < 2; ++ia) {
          for (int ib = 0; ib < 2; ++ib) {
            const Label a = ia ? zero[gate.a] ^ delta : zero[gate.a];
            const Label b = ib ? zero[gate.b] ^ delta : zero[gate.b];
            const Label c = (ia & ib) ? zero[gate.out] ^ delta : zero[gate.out];
            const int row = 2 * static_cast<int>(a.permute_bit()) + static_cast<int>(b.permute_bit());
            rows[row] = h.gate(a, b, gid) ^ c;
          }
        }
        for (auto& r : rows) u.tables.push_back(r);
        ++gid;
        break;
      }
    }
  }

  std::uint64_t out_index = 0;
  for (const auto& o : circuit.outputs) {
    if (o.is_const) continue;
    u.decode0.push_back(h.output(zero[o.wire], out_index));
    u.decode1.push_back(h.output(zero[o.wire] ^ delta, out_index));
    ++out_index;
  }
  return g;
}

std::uint64_t eval(const BoolCircuit& circuit, const GarbledUnit& unit, std::span<const Label> input_labels) {
  if (input_labels.size() != circuit.input_count()) throw std::invalid_argument("eval: wrong number of input labels");
  if (unit.circuit_hash != circuit.hash() || unit.tables.size() != 4 * circuit.and_count() ||
      unit.decode0.size() != circuit.wire_output_count()) {
    throw ProtocolError("eval: garbled unit does not match circuit");
  }
  Hasher& h = thread_hasher();
  std::vector<Label> lab(circuit.wire_count);
  for (std::size_t i = 0; i < input_labels.size(); ++i) {
    if (input_labels[i].bits() != unit.kappa) throw ProtocolError("eval: input label has wrong width");
    lab[i] = input_labels[i];
  }

  std::uint64_t gid = 0;
  for (const auto& gate : circuit.gates) {
    switch (gate.op) {
      case GateOp::Xor:
        lab[gate.out] = lab[gate.a] ^ lab[gate.b];
        break;
      case GateOp::Not:
        lab[gate.out] = lab[gate.a];
        break;
      case GateOp::And: {
        const Label& a = lab[gate.a];
        const Label& b = lab[gate.b];
        const std::size_t row = 2 * static_cast<std::size_t>(a.permute_bit()) + static_cast<std::size_t>(b.permute_bit());
        lab[gate.out] = unit.tables[4 * gid + row] ^ h.gate(a, b, gid);
        ++gid;
        break;
      }
    }
  }

  std::uint64_t value = 0;
  std::uint64_t out_index = 0;
  for (std::size_t k = 0; k < circuit.outputs.size(); ++k) {
    const auto& o = circuit.outputs[k];
    bool bit = o.value;
    if (!o.is_const) {
      const Label d = h.output(lab[o.wire], out_index);
      if (d == unit.decode0[out_index]) {
        bit = false;
      } else if (d == unit.decode1[out_index]) {
        bit = true;
      } else {
        throw ProtocolError("eval: output label matches neither decode entry (corrupt input label?)");
      }
      ++out_index;
    }
    value |= std::uint64_t{bit} << k;
  }
  return value;
}

std::vector<Garbling> garble_batch(const BoolCircuit& circuit, std::size_t count, const Seed& seed,
                                   std::uint64_t stream_base, unsigned kappa, Exec exec) {
  check_kappa(kappa);
  std::vector<Garbling> out(count);
  auto one = [&](std::size_t e) {
    Prg rng(seed, stream_base + e);
    out[e] = garble(circuit, rng, kappa);
  };
  if (exec == Exec::Serial) {
    for (std::size_t e = 0; e < count; ++e) one(e);
  } else {
    const auto n = static_cast<std::int64_t>(count);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t e = 0; e < n; ++e) one(static_cast<std::size_t>(e));
  }
  return out;
}

std::vector<std::uint64_t> eval_batch(const BoolCircuit& circuit, std::span<const GarbledUnit> units,
                                      std::span<const std::vector<Label>> labels, Exec exec) {
  if (units.size() != labels.size()) throw std::invalid_argument("eval_batch: units and label sets differ in count");
  std::vector<std::uint64_t> out(units.size());
  if (exec == Exec::Serial) {
    for (std::size_t e = 0; e < units.size(); ++e) out[e] = eval(circuit, units[e], labels[e]);
    return out;
  }
  // Exceptions cannot cross the OpenMP region; carry the first one out.
  std::exception_ptr err;
  const auto n = static_cast<std::int64_t>(units.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t e = 0; e < n; ++e) {
    try {
      out[static_cast<std::size_t>(e)] = eval(circuit, units[static_cast<std::size_t>(e)], labels[static_cast<std::size_t>(e)]);
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  return out;
}

}  // namespace pmdi::gc

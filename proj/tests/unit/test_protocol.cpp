// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <set>

#include "debug_oracle.hpp"
#include "fixtures.hpp"
#include "pmdi/errors.hpp"
#include "pmdi/protocol.hpp"

using namespace pmdi;
using test::mock_config;

namespace {

RingVector payload_values(const MessageEnvelope& env, const RingParams& p) {
  ByteReader r(env.payload);
  return read_ring_values(r, p, env.payload.size() / p.element_bytes());
}

std::vector<RingVector> oracle_all(const ModelSpec& m, const std::vector<RingVector>& xs) {
  std::vector<RingVector> out;
  for (const auto& x : xs) out.push_back(oracle_infer(m, x));
  return out;
}

}  // namespace

TEST_CASE("scalar linear layer: M=[[2]], x=3") {
  const RingParams p{32, 0};
  const auto m = test::scalar_model(2, gc::Activation::None, p);
  Deployment d(m, mock_config());
  RunOptions opts;
  opts.record_transcript = true;
  const auto r = run_protocol(d, {RingVector(p, {3})}, opts);
  REQUIRE(r.outputs.size() == 1);
  CHECK(r.outputs[0] == RingVector(p, {6}));

  const DebugOracle o(m, d);
  // client holds Dec(c_2) = M r_1 + s_1
  const std::uint64_t c2 = ring::add(p, ring::mul(p, 2, o.r(0, 1)[0]), o.s(0, 1)[0]);
  CHECK((*o.c_final(0))[0] == c2);
  CHECK(o.c(0, 2)[0] == c2);
  for (const auto& env : r.transcript) {
    if (env.kind == MsgKind::MaskedResult) {
      // garbler's w = M (x - c_1) - s_1; the client adds c_2
      const std::uint64_t w = payload_values(env, p)[0];
      CHECK(w == ring::sub(p, ring::mul(p, 2, ring::sub(p, 3, o.r(0, 1)[0])), o.s(0, 1)[0]));
      CHECK(ring::add(p, w, c2) == 6);
    }
  }
  CHECK(r.ot_sessions == 0);
  CHECK(r.gc_unit_bytes == 0);
  CHECK(r.ledger.bytes({.kind = MsgKind::GarbledCircuit}) == 0);
  CHECK(r.ledger.bytes({.kind = MsgKind::OtChoice}) == 0);
}

TEST_CASE("scalar ReLU layer") {
  const RingParams p{32, 0};
  const auto m = test::scalar_model(2, gc::Activation::ReLU, p);
  const auto r = run_protocol(m, mock_config(), {RingVector(p, {3}), RingVector(p, {p.mask() - 4})});
  CHECK(r.outputs[0] == RingVector(p, {6}));
  CHECK(r.outputs[1] == RingVector(p, {0}));
  CHECK(r.ot_sessions == 2 * 2 * 32);
}

TEST_CASE("zero input through a bias-free ReLU model gives zero") {
  const auto m = test::toy3(21);
  const auto r = run_protocol(m, mock_config(2), {RingVector(m.ring, 16)});
  CHECK(r.outputs[0] == RingVector(m.ring, 8));
}

TEST_CASE("toy model equals the oracle across cluster and collusion settings") {
  const auto m = test::toy3();
  const auto xs = test::random_inputs(m, 3, 4);
  const auto want = oracle_all(m, xs);
  for (std::size_t P : {1U, 2U, 3U}) {
    for (std::size_t T : {1U, 2U, 3U}) {
      CAPTURE(P);
      CAPTURE(T);
      const auto r = run_protocol(m, mock_config(P, T, 10 * P + T), xs);
      CHECK(r.outputs == want);
      CHECK(r.allocation.cluster_count() == P);
      CHECK(r.ledger.bytes({.pair = PartyPair::of(PartyId::client(), PartyId::cloud()), .phase = Phase::Online}) == 0);
      CHECK(r.ledger.bytes({.phase = Phase::Online, .party = PartyId::cloud()}) == 0);
    }
  }
}

TEST_CASE("frozen fixture through the protocol") {
  const ModelSpec m = load_model(PMDI_TEST_DATA "/fixture_model.json");
  std::vector<RingVector> xs;
  for (std::size_t k = 0; k < 4; ++k) xs.push_back(test::random_inputs(m, 4, 8)[k]);
  const auto r = run_protocol(m, mock_config(2, 1, 3, 64), xs);
  CHECK(r.outputs == oracle_all(m, xs));
}

TEST_CASE("real Paillier backend") {
  const auto m = test::random_model({6, 5, 3}, {gc::Activation::ReLU, gc::Activation::None}, 31);
  auto cfg = mock_config(2);
  cfg.he_backend = lhe::Backend::Paillier;
  cfg.he_bits = 512;
  cfg.kappa = 64;
  const auto xs = test::random_inputs(m, 2, 9);
  const auto r = run_protocol(m, cfg, xs);
  CHECK(r.outputs == oracle_all(m, xs));
  CHECK(r.he_element_bytes == 4 + 128);
}

TEST_CASE("offline client-cloud rounds: two initial plus two per nonlinear boundary") {
  const auto m = test::toy3();
  const auto r = run_protocol(m, mock_config(2), test::random_inputs(m, 2, 1));
  const auto pair = PartyPair::of(PartyId::client(), PartyId::cloud());
  CHECK(r.ledger.rounds({.pair = pair, .phase = Phase::Offline}) == 2 * (2 + 2 * 2));
  CHECK(r.ledger.messages({.pair = pair, .phase = Phase::Offline, .kind = MsgKind::PublicKey}) == 1);
  CHECK(r.ledger.messages({.pair = pair, .kind = MsgKind::EncMask, .layer = 0}) == 2);
  CHECK(r.ledger.messages({.pair = pair, .kind = MsgKind::EncFinalMask}) == 2);
  CHECK(r.ledger.bytes({.pair = pair, .phase = Phase::Online}) == 0);

  // a model ending in ReLU needs no final ciphertext
  const auto m2 = test::random_model({4, 4, 4}, {gc::Activation::ReLU, gc::Activation::ReLU}, 2);
  const auto r2 = run_protocol(m2, mock_config(), test::random_inputs(m2, 1, 1));
  CHECK(r2.ledger.rounds({.pair = pair, .phase = Phase::Offline}) == 1 + 2 * 2);
  CHECK(r2.ledger.messages({.kind = MsgKind::EncFinalMask}) == 0);
  CHECK(r2.outputs == oracle_all(m2, test::random_inputs(m2, 1, 1)));
}

TEST_CASE("garbled-circuit and label traffic sizes") {
  const auto m = test::toy3();
  const std::uint32_t S = 2;
  const auto r = run_protocol(m, mock_config(1, 1, 1, 128), test::random_inputs(m, S, 1));
  const auto ge = PartyPair::of(PartyId::garbler(1), PartyId::evaluator(1));
  REQUIRE(r.gc_unit_bytes > 0);
  for (std::uint32_t l = 1; l <= 2; ++l) {
    CHECK(r.ledger.bytes({.pair = ge, .phase = Phase::Offline, .kind = MsgKind::GarbledCircuit, .layer = l}) ==
          S * 16 * r.gc_unit_bytes);
    CHECK(r.ledger.bytes({.pair = ge, .phase = Phase::Online, .kind = MsgKind::GarblerLabels, .layer = l}) ==
          S * 16 * 32 * 128 / 8);
  }
  CHECK(r.ledger.bytes({.kind = MsgKind::GarbledCircuit, .layer = 3}) == 0);
  CHECK(r.ot_sessions == S * 2 * 16 * 2 * 32);
}

TEST_CASE("evaluator labels decode to the client's y1 and r bits") {
  const RingParams p{8, 2};
  const auto m = test::random_model({3, 4, 2}, {gc::Activation::ReLU, gc::Activation::None}, 5, p);
  Deployment d(m, mock_config(1, 1, 2, 64));
  SimNetwork net;
  d.attach(net);
  d.start_offline(net, 0, 1);
  net.run_until_quiescent();
  REQUIRE(d.client().offline_ready(0));
  const DebugOracle o(m, d);
  const auto y1 = o.y1(0, 1);
  const auto y2 = o.r(0, 2);
  // y1 = M_1 c_1 + s_1
  CHECK(y1 == ring::add(kernels::matvec(p, m.layers[0].weights, 4, 3, o.c(0, 1)), o.s(0, 1)));
  const auto circuit = gc::build_nonlinear_block(p, gc::Activation::ReLU);
  std::size_t checked = 0;
  for (std::size_t e = 0; e < 4; ++e) {
    const auto* in = o.garbler_labels(1, 0, 1, e);
    REQUIRE(in != nullptr);
    for (unsigned k = 0; k < 8; ++k) {
      const auto l1 = o.evaluator_label(1, 0, 1, (e * 2 + 0) * 8 + k);
      const auto l2 = o.evaluator_label(1, 0, 1, (e * 2 + 1) * 8 + k);
      REQUIRE(l1.has_value());
      CHECK(*l1 == in->label(circuit.y1_wire(k), (y1[e] >> k) & 1U));
      CHECK(*l2 == in->label(circuit.y2_wire(k), (y2[e] >> k) & 1U));
      CHECK(*l2 != in->label(circuit.y2_wire(k), !((y2[e] >> k) & 1U)));
      checked += 2;
    }
  }
  CHECK(checked == 64);
}

TEST_CASE("masking chain and view discipline") {
  const auto m = test::random_model({8, 8, 6, 6, 4}, {gc::Activation::ReLU, gc::Activation::None, gc::Activation::ReLU,
                                                      gc::Activation::None},
                                    17);
  const auto xs = test::random_inputs(m, 3, 2);
  Deployment d(m, mock_config(3, 2));
  RunOptions opts;
  opts.record_transcript = true;
  const auto r = run_protocol(d, xs, opts);
  REQUIRE(r.outputs == oracle_all(m, xs));
  const DebugOracle o(m, d);
  const RingParams& p = m.ring;

  std::size_t boundaries = 0, layer_inputs = 0;
  for (const auto& env : r.transcript) {
    const PartyId& to = env.to;
    switch (to.role) {
      case Role::Cloud:
        CHECK((env.kind == MsgKind::PublicKey || env.kind == MsgKind::EncMask));
        CHECK(env.phase == Phase::Offline);
        break;
      case Role::Computing:
        CHECK((env.kind == MsgKind::ModelShare || env.kind == MsgKind::LayerInput));
        break;
      case Role::Evaluator:
        CHECK((env.kind == MsgKind::GarbledCircuit || env.kind == MsgKind::OtSelected ||
               env.kind == MsgKind::GarblerLabels));
        break;
      case Role::Garbler:
        CHECK((env.kind == MsgKind::ModelShare || env.kind == MsgKind::OtChoice || env.kind == MsgKind::MaskedInput ||
               env.kind == MsgKind::Handoff || env.kind == MsgKind::ShareProduct || env.kind == MsgKind::EvalOutput));
        break;
      case Role::Client:
        CHECK(env.from.role != Role::Computing);
        CHECK(env.from.role != Role::Evaluator);
        break;
    }
    if (env.from.role == Role::Cloud) CHECK(env.phase == Phase::Offline);
    const auto t = env.session;
    if (env.kind == MsgKind::MaskedInput || env.kind == MsgKind::Handoff || env.kind == MsgKind::LayerInput) {
      // v + c_l = x_l
      const auto v = payload_values(env, p);
      CHECK(ring::add(v, o.c(t, env.layer)) == o.x(xs[t], env.layer));
      if (env.kind == MsgKind::LayerInput) ++layer_inputs; else ++boundaries;
    }
    if (env.kind == MsgKind::MaskedResult) {
      const auto L = m.layers.size();
      CHECK(ring::add(payload_values(env, p), o.c(t, L + 1)) == o.x(xs[t], L + 1));
      ++boundaries;
    }
    if (env.kind == MsgKind::EvalOutput) {
      // x_{l+1} - r_{l+1}
      CHECK(ring::add(payload_values(env, p), o.r(t, env.layer + 1)) == o.x(xs[t], env.layer + 1));
    }
  }
  CHECK(boundaries == 3 * (1 + 2 + 1));
  CHECK(layer_inputs == 3 * 4 * 2);
}

TEST_CASE("computing servers see uniform bits for a fixed input") {
  const RingParams p{16, 4};
  const auto m = test::random_model({2, 2, 2}, {gc::Activation::ReLU, gc::Activation::None}, 3, p);
  const std::uint32_t S = 600;
  const std::vector<RingVector> xs(S, RingVector(p, {100, 200}));
  Deployment d(m, mock_config(1, 2, 5, 16));
  RunOptions opts;
  opts.record_transcript = true;
  const auto r = run_protocol(d, xs, opts);
  CHECK(r.outputs[0] == oracle_infer(m, xs[0]));
  std::vector<int> ones(2 * 16, 0);
  std::vector<int> share_ones(16, 0);
  int count = 0, shares = 0;
  for (const auto& env : r.transcript) {
    if (env.to != PartyId::computing(1, 1)) continue;
    if (env.kind == MsgKind::LayerInput && env.layer == 1) {
      const auto v = payload_values(env, p);
      for (unsigned e = 0; e < 2; ++e) {
        for (unsigned b = 0; b < 16; ++b) ones[e * 16 + b] += static_cast<int>((v[e] >> b) & 1U);
      }
      ++count;
    }
    if (env.kind == MsgKind::ModelShare && env.layer == 1) {
      ByteReader rd(env.payload);
      const std::uint64_t first = rd.le(p.element_bytes());
      for (unsigned b = 0; b < 16; ++b) share_ones[b] += static_cast<int>((first >> b) & 1U);
      ++shares;
    }
  }
  REQUIRE(count == static_cast<int>(S));
  REQUIRE(shares == static_cast<int>(S));
  for (int c : ones) {
    CHECK(c > 0.42 * S);
    CHECK(c < 0.58 * S);
  }
  for (int c : share_ones) {
    CHECK(c > 0.42 * S);
    CHECK(c < 0.58 * S);
  }
}

TEST_CASE("runs are deterministic and transport independent") {
  const auto m = test::toy3(4);
  const auto xs = test::random_inputs(m, 2, 3);
  RunOptions opts;
  opts.record_transcript = true;
  const auto a = run_protocol(m, mock_config(2, 1, 9), xs, opts);
  const auto b = run_protocol(m, mock_config(2, 1, 9), xs, opts);
  REQUIRE(a.transcript.size() == b.transcript.size());
  for (std::size_t k = 0; k < a.transcript.size(); ++k) {
    CHECK(encode_frame(a.transcript[k]) == encode_frame(b.transcript[k]));
  }
  const auto c = run_protocol(m, mock_config(2, 1, 10), xs, opts);
  CHECK(c.outputs == a.outputs);
  bool differs = c.transcript.size() != a.transcript.size();
  for (std::size_t k = 0; !differs && k < a.transcript.size(); ++k) {
    differs = a.transcript[k].payload != c.transcript[k].payload;
  }
  CHECK(differs);

  for (auto kind : {TransportKind::Threaded, TransportKind::Tcp}) {
    CAPTURE(to_string(kind));
    RunOptions o2;
    o2.transport = kind;
    const auto t = run_protocol(m, mock_config(2, 1, 9), xs, o2);
    CHECK(t.outputs == a.outputs);
    CHECK(t.ledger.to_json() == a.ledger.to_json());
  }
}

TEST_CASE("pipelined batches overlap clusters") {
  const auto m = test::random_model({8, 8, 8, 8, 8}, {gc::Activation::ReLU, gc::Activation::ReLU, gc::Activation::ReLU,
                                                      gc::Activation::None},
                                    6);
  const auto xs = test::random_inputs(m, 8, 5);
  const double dly = 1.0;
  auto cfg = mock_config(2);
  cfg.layer_delay_s = dly;
  RunOptions on;
  const auto piped = run_protocol(m, cfg, xs, on);
  RunOptions off;
  off.pipelined = false;
  const auto serial = run_protocol(m, cfg, xs, off);
  CHECK(piped.outputs == serial.outputs);
  CHECK(piped.outputs == oracle_all(m, xs));
  const double total = 4 * dly;
  const double max_cluster = 2 * dly;
  CHECK(piped.online_seconds < 8 * total);
  CHECK(piped.online_seconds > 8 * max_cluster - 1e-9);
  CHECK(serial.online_seconds >= 8 * total - 1e-9);

  const auto one = run_protocol(m, cfg, {xs[3]});
  CHECK(one.outputs[0] == piped.outputs[3]);
}

TEST_CASE("configuration errors") {
  const auto m = test::toy3();
  CHECK_THROWS_AS(Deployment(m, mock_config(4)), ConfigError);
  auto bad_kappa = mock_config();
  bad_kappa.kappa = 12;
  CHECK_THROWS_AS(Deployment(m, bad_kappa), ConfigError);
  auto bad_gamma = mock_config(2);
  bad_gamma.gamma = {1.0};
  CHECK_THROWS_AS(Deployment(m, bad_gamma), ConfigError);
  bad_gamma.gamma = {1.0, -2.0};
  CHECK_THROWS_AS(Deployment(m, bad_gamma), ConfigError);
  auto bad_he = mock_config();
  bad_he.he_backend = lhe::Backend::Paillier;
  bad_he.he_bits = 100;
  CHECK_THROWS_AS(Deployment(m, bad_he), ConfigError);
  Deployment d(m, mock_config(2, 2));
  CHECK_THROWS_AS(d.make_party(PartyId::computing(1, 3)), ConfigError);
  CHECK_THROWS_AS(d.make_party(PartyId::garbler(3)), ConfigError);
  CHECK(protocol_parties(2, 2).size() == 2 + 2 * 4);
}

TEST_CASE("malformed messages are protocol errors") {
  const auto m = test::toy3();
  Deployment d(m, mock_config());
  SimNetwork net;
  d.attach(net);
  d.start_offline(net, 0, 1);
  net.run_until_quiescent();
  net.post(PartyId::client(), [](Context& ctx) {
    ctx.send(PartyId::garbler(1), Phase::Online, MsgKind::MaskedInput, 0, 1, Bytes(5, 0));
  });
  CHECK_THROWS(net.run_until_quiescent());

  Deployment d2(m, mock_config());
  SimNetwork net2;
  d2.attach(net2);
  net2.post(PartyId::client(), [](Context& ctx) {
    ctx.send(PartyId::cloud(), Phase::Offline, MsgKind::PublicKey, 0, 0, Bytes{1, 2, 3});
  });
  CHECK_THROWS(net2.run_until_quiescent());
}

TEST_CASE("ot session ids are unique within a run") {
  std::set<std::uint64_t> ids;
  for (std::uint32_t t = 0; t < 3; ++t) {
    for (std::uint32_t l = 1; l <= 3; ++l) {
      for (std::size_t e = 0; e < 4; ++e) {
        for (unsigned g = 0; g < 2; ++g) {
          for (unsigned k = 0; k < 32; ++k) ids.insert(ot_session_id(t, l, e, g, k, 32));
        }
      }
    }
  }
  CHECK(ids.size() == 3 * 3 * 4 * 2 * 32);
  CHECK(ot_session_id(1, 2, 0, 1, 3, 32) == ((1ULL << 40) | (2ULL << 28) | 35));
}

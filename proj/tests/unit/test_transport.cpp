// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <memory>

#include "pmdi/errors.hpp"
#include "pmdi/tcp_transport.hpp"
#include "pmdi/transport.hpp"

using namespace pmdi;

namespace {

const PartyId A = PartyId::client();
const PartyId B = PartyId::garbler(1);

/// Records what it receives; replies to kind LayerInput with a ShareProduct.
class Recorder final : public Party {
 public:
  explicit Recorder(PartyId id) : id_(id) {}
  PartyId id() const override { return id_; }
  std::vector<MessageEnvelope> got;
  bool hold_until_public_key = false;

 protected:
  bool on_message(const MessageEnvelope& env, Context& ctx) override {
    if (hold_until_public_key && env.kind != MsgKind::PublicKey && !seen_key_) return false;
    if (env.kind == MsgKind::PublicKey) seen_key_ = true;
    got.push_back(env);
    if (env.kind == MsgKind::LayerInput) {
      ctx.send(env.from, env.phase, MsgKind::ShareProduct, env.session, env.layer, Bytes(env.payload.size() / 2, 7));
    }
    return true;
  }

 private:
  PartyId id_;
  bool seen_key_ = false;
};

struct Pair {
  std::shared_ptr<Recorder> a = std::make_shared<Recorder>(A);
  std::shared_ptr<Recorder> b = std::make_shared<Recorder>(B);
};

void fifo_scenario(Network& net, Pair& p) {
  net.post(A, [](Context& ctx) {
    for (std::uint32_t k = 0; k < 1000; ++k) {
      Bytes payload(4);
      for (int i = 0; i < 4; ++i) payload[i] = static_cast<std::uint8_t>(k >> (8 * i));
      ctx.send(B, Phase::Online, MsgKind::MaskedInput, k, 1, payload);
    }
  });
  net.run_until_quiescent();
  REQUIRE(p.b->got.size() == 1000);
  std::uint64_t last_seq = 0;
  for (std::uint32_t k = 0; k < 1000; ++k) {
    const auto& e = p.b->got[k];
    CHECK(e.session == k);
    CHECK((e.payload[0] | (e.payload[1] << 8)) == static_cast<int>(k & 0xFFFF));
    if (k) CHECK(e.seq > last_seq);
    last_seq = e.seq;
  }
}

void request_reply(Network& net) {
  net.post(A, [](Context& ctx) { ctx.send(B, Phase::Offline, MsgKind::LayerInput, 0, 2, Bytes(64, 1)); });
  net.run_until_quiescent();
}

}  // namespace

TEST_CASE("party ids and kinds print and parse") {
  for (const auto& id : {PartyId::cloud(), PartyId::client(), PartyId::computing(2, 3), PartyId::garbler(4),
                         PartyId::evaluator(1)}) {
    CHECK(PartyId::parse(id.to_string()) == id);
  }
  CHECK(PartyId::computing(2, 1).to_string() == "computing[2.1]");
  CHECK_THROWS(PartyId::parse("garbler"));
  CHECK_THROWS(PartyId::parse("server[1]"));
  for (int k = 0; k < 16; ++k) {
    const auto kind = static_cast<MsgKind>(k);
    CHECK(parse_msg_kind(to_string(kind)) == kind);
  }
  CHECK(PartyPair::of(B, A) == PartyPair::of(A, B));
}

TEST_CASE("frames round trip") {
  MessageEnvelope env{PartyId::computing(1, 2), PartyId::garbler(1), Phase::Online, MsgKind::ShareProduct, 7, 3, 42,
                      Bytes{1, 2, 3}};
  const Bytes frame = encode_frame(env);
  CHECK(frame.size() == 4 + kEnvelopeHeaderBytes + 3);
  CHECK(frame[0] == kEnvelopeHeaderBytes + 3);
  const auto back = decode_frame_body(std::span(frame).subspan(4));
  CHECK(back.from == env.from);
  CHECK(back.to == env.to);
  CHECK(back.kind == env.kind);
  CHECK(back.session == 7);
  CHECK(back.layer == 3);
  CHECK(back.seq == 42);
  CHECK(back.payload == env.payload);
  CHECK_THROWS(decode_frame_body(std::span(frame).subspan(4, 10)));
}

TEST_CASE("sim network: FIFO, bytes and rounds") {
  SimNetwork net;
  Pair p;
  net.add(p.a);
  net.add(p.b);
  CHECK_THROWS(net.add(p.a));
  fifo_scenario(net, p);
  const auto rep = net.ledger().report();
  CHECK(rep.bytes({.pair = PartyPair::of(A, B)}) == 4000);
  CHECK(rep.messages({.pair = PartyPair::of(A, B)}) == 1000);
}

TEST_CASE("ledger: one 64-byte send, then a request and its reply") {
  SimNetwork net;
  Pair p;
  net.add(p.a);
  net.add(p.b);
  CHECK(net.ledger().report().empty());
  net.post(A, [](Context& ctx) { ctx.send(B, Phase::Offline, MsgKind::EncMask, 0, 1, Bytes(64, 0)); });
  net.run_until_quiescent();
  auto rep = net.ledger().report();
  CHECK(rep.bytes({.pair = PartyPair::of(A, B)}) == 64);
  CHECK(rep.rounds({.pair = PartyPair::of(A, B)}) == 1);
  CHECK(rep.bytes({.phase = Phase::Online}) == 0);

  net.ledger().clear();
  CHECK(net.ledger().report().empty());

  SimNetwork fresh;
  Pair q;
  fresh.add(q.a);
  fresh.add(q.b);
  request_reply(fresh);
  rep = fresh.ledger().report();
  CHECK(rep.rounds({.pair = PartyPair::of(A, B), .phase = Phase::Offline, .layer = 2}) == 2);
  CHECK(rep.bytes({.kind = MsgKind::LayerInput}) == 64);
  CHECK(rep.bytes({.kind = MsgKind::ShareProduct}) == 32);
  CHECK(rep.bytes({.party = B}) == 96);
  CHECK(rep.bytes({.party = PartyId::cloud()}) == 0);

  const auto back = LedgerReport::from_json(rep.to_json());
  CHECK(back.to_json() == rep.to_json());
  CHECK(replay_ledger(fresh.send_log()).to_json() == rep.to_json());
  CHECK(replay_ledger(send_log_from_json(send_log_to_json(fresh.send_log()))).to_json() == rep.to_json());
}

TEST_CASE("coalesced same-direction sends are one round") {
  SimNetwork net;
  Pair p;
  net.add(p.a);
  net.add(p.b);
  net.post(A, [](Context& ctx) {
    for (int k = 0; k < 3; ++k) ctx.send(B, Phase::Offline, MsgKind::EncMask, 0, 1, Bytes(8, 0));
  });
  net.run_until_quiescent();
  CHECK(net.ledger().report().rounds({}) == 1);
}

TEST_CASE("parked messages are retried") {
  SimNetwork net;
  Pair p;
  p.b->hold_until_public_key = true;
  net.add(p.a);
  net.add(p.b);
  net.post(A, [](Context& ctx) {
    ctx.send(B, Phase::Offline, MsgKind::EncMask, 0, 1, Bytes(1, 0));
    ctx.send(B, Phase::Offline, MsgKind::EncMask, 1, 1, Bytes(1, 0));
  });
  net.run_until_quiescent();
  CHECK(p.b->got.empty());
  CHECK(p.b->parked() == 2);
  net.post(A, [](Context& ctx) { ctx.send(B, Phase::Offline, MsgKind::PublicKey, 0, 0, Bytes(1, 0)); });
  net.run_until_quiescent();
  REQUIRE(p.b->got.size() == 3);
  CHECK(p.b->got[0].kind == MsgKind::PublicKey);
  CHECK(p.b->got[1].session == 0);
  CHECK(p.b->got[2].session == 1);
  CHECK(p.b->parked() == 0);
}

TEST_CASE("unknown recipients and handler errors surface") {
  SimNetwork net;
  Pair p;
  net.add(p.a);
  net.post(A, [](Context& ctx) { ctx.send(B, Phase::Offline, MsgKind::EncMask, 0, 1, Bytes{}); });
  CHECK_THROWS(net.run_until_quiescent());

  ThreadedNetwork tn;
  Pair q;
  tn.add(q.a);
  tn.add(q.b);
  tn.post(A, [](Context&) { throw ProtocolError("boom"); });
  CHECK_THROWS_AS(tn.run_until_quiescent(), ProtocolError);
}

TEST_CASE("sim latency model") {
  SimNetwork net(LatencyModel{0.5, 100});
  Pair p;
  net.add(p.a);
  net.add(p.b);
  request_reply(net);
  // 64 B request then 32 B reply
  CHECK(net.makespan() == doctest::Approx(0.5 + 0.64 + 0.5 + 0.32));
  CHECK(LatencyModel{}.delay(1000) == 0);
}

TEST_CASE("threaded network keeps FIFO and the same ledger") {
  ThreadedNetwork net;
  Pair p;
  net.add(p.a);
  net.add(p.b);
  fifo_scenario(net, p);
  request_reply(net);

  SimNetwork sim;
  Pair q;
  sim.add(q.a);
  sim.add(q.b);
  fifo_scenario(sim, q);
  request_reply(sim);
  CHECK(net.ledger().report().to_json() == sim.ledger().report().to_json());
}

TEST_CASE("tcp network keeps FIFO and the same ledger") {
  TcpNetwork net({TcpEndpoint{A}, TcpEndpoint{B}}, {PartyPair::of(A, B)});
  Pair p;
  net.add(p.a);
  net.add(p.b);
  CHECK(net.port_of(A) != 0);
  net.connect();
  fifo_scenario(net, p);
  request_reply(net);

  SimNetwork sim;
  Pair q;
  sim.add(q.a);
  sim.add(q.b);
  fifo_scenario(sim, q);
  request_reply(sim);
  CHECK(net.ledger().report().to_json() == sim.ledger().report().to_json());
  CHECK(p.b->got.back().payload == Bytes(64, 1));
}

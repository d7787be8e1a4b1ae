// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#include "pmdi/protocol.hpp"

#include <algorithm>
#include <chrono>

#include "pmdi/errors.hpp"
#include "pmdi/sharing.hpp"
#include "pmdi/tcp_transport.hpp"

namespace pmdi {

namespace {

constexpr std::uint8_t kPurposeMask = 1;
constexpr std::uint8_t kPurposeEncrypt = 2;
constexpr std::uint8_t kPurposeShareM = 3;
constexpr std::uint8_t kPurposeShareS = 4;
constexpr std::uint8_t kPurposeBias = 5;

std::uint64_t stream_id(std::uint32_t session, std::size_t layer, std::uint8_t purpose) {
  return (static_cast<std::uint64_t>(session) << 32) | (static_cast<std::uint64_t>(layer) << 8) | purpose;
}

RingVector random_vector(const RingParams& p, std::size_t n, Prg& rng) {
  RingVector v(p, n);
  for (auto& x : v.raw()) x = rng.next_bits(p.bit_width);
  return v;
}

Bytes ring_payload(const RingVector& v) {
  ByteWriter w;
  write_ring_values(w, v);
  return std::move(w).take();
}

RingVector read_ring_payload(const MessageEnvelope& env, const RingParams& p, std::size_t n) {
  ByteReader r(env.payload);
  RingVector v = read_ring_values(r, p, n);
  r.expect_done(to_string(env.kind));
  return v;
}

Bytes ciphertext_payload(const lhe::Ciphertext& ct) {
  ByteWriter w;
  lhe::write_ciphertext(w, ct);
  return std::move(w).take();
}

struct LayerShare {
  std::vector<std::uint64_t> m;
  RingVector s;
};

LayerShare read_share(const MessageEnvelope& env, const ModelShape::Layer& layer, const RingParams& p) {
  ByteReader r(env.payload);
  LayerShare share;
  share.m = read_ring_values(r, p, layer.rows * layer.cols).raw();
  share.s = read_ring_values(r, p, layer.rows);
  r.expect_done("model_share");
  return share;
}

double layer_cost(const RunContext& rc, std::size_t cluster, std::size_t layer) {
  double cost = rc.config.layer_delay_s;
  if (rc.config.gamma_delay) {
    const auto& l = rc.layer(layer);
    const double gamma = rc.config.gamma.empty() ? 1.0 : rc.config.gamma.at(cluster - 1);
    cost += gamma * static_cast<double>(l.rows * l.cols);
  }
  return cost;
}

std::size_t nonlinear_in_range(const RunContext& rc, std::size_t cluster) {
  const auto& range = rc.allocation.ranges.at(cluster - 1);
  std::size_t n = 0;
  for (std::size_t l = range.first; l <= range.last; ++l) n += rc.layer(l).has_nonlinear() ? 1 : 0;
  return n;
}

void expect_from(const MessageEnvelope& env, const PartyId& who) {
  if (env.from != who) {
    throw ProtocolError(to_string(env.kind) + " from " + env.from.to_string() + ", expected " + who.to_string());
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void ProtocolConfig::validate(const ModelShape& shape) const {
  if (kappa < 8 || kappa > 128 || kappa % 8 != 0) throw ConfigError("kappa must be a multiple of 8 in [8, 128]");
  if (clusters == 0) throw ConfigError("need at least one cluster");
  if (clusters > shape.layer_count()) {
    throw ConfigError(std::to_string(clusters) + " clusters but the model has only " +
                      std::to_string(shape.layer_count()) + " layers");
  }
  if (clusters > 0xFFFF || colluding > 0xFFFF) throw ConfigError("too many clusters or computing servers");
  if (!gamma.empty()) {
    if (gamma.size() != clusters) throw ConfigError("gamma needs one entry per cluster");
    for (double g : gamma) {
      if (!(g > 0)) throw ConfigError("gamma entries must be positive");
    }
  }
  if (he_backend == lhe::Backend::Paillier && (he_bits < 256 || he_bits % 64 != 0)) {
    throw ConfigError("Paillier modulus bits must be a multiple of 64 and at least 256");
  }
  if (layer_delay_s < 0) throw ConfigError("layer_delay_s must be non-negative");
  if (expected_sessions >= (1U << 24)) throw ConfigError("at most 2^24 sessions per run");
  if (shape.layer_count() >= (1U << 12)) throw ConfigError("at most 4095 layers");
  for (const auto& l : shape.layers) {
    if (l.rows * 2 * shape.ring.bit_width >= (1U << 28)) throw ConfigError("layer too wide for OT session ids");
  }
}

std::vector<alloc::ClusterProfile> ProtocolConfig::profiles() const {
  std::vector<alloc::ClusterProfile> out;
  for (std::size_t j = 0; j < clusters; ++j) out.push_back({j + 1, gamma.empty() ? 1.0 : gamma[j]});
  return out;
}

std::uint64_t ot_session_id(std::uint32_t session, std::uint32_t layer, std::size_t element, unsigned group,
                            unsigned bit, unsigned ring_bits) {
  const std::uint64_t idx = (static_cast<std::uint64_t>(element) * 2 + group) * ring_bits + bit;
  return (static_cast<std::uint64_t>(session) << 40) | (static_cast<std::uint64_t>(layer) << 28) | idx;
}

std::vector<PartyId> protocol_parties(std::size_t clusters, std::size_t colluding) {
  std::vector<PartyId> out = {PartyId::cloud(), PartyId::client()};
  for (std::size_t j = 1; j <= clusters; ++j) {
    const auto cj = static_cast<std::uint16_t>(j);
    for (std::size_t v = 1; v <= colluding; ++v) out.push_back(PartyId::computing(cj, static_cast<std::uint16_t>(v)));
    out.push_back(PartyId::garbler(cj));
    out.push_back(PartyId::evaluator(cj));
  }
  return out;
}

std::vector<PartyPair> protocol_channels(std::size_t clusters, std::size_t colluding) {
  std::vector<PartyPair> out = {PartyPair::of(PartyId::client(), PartyId::cloud())};
  for (std::size_t j = 1; j <= clusters; ++j) {
    const auto cj = static_cast<std::uint16_t>(j);
    const PartyId g = PartyId::garbler(cj);
    const PartyId e = PartyId::evaluator(cj);
    for (std::size_t v = 1; v <= colluding; ++v) {
      const PartyId c = PartyId::computing(cj, static_cast<std::uint16_t>(v));
      out.push_back(PartyPair::of(PartyId::cloud(), c));
      out.push_back(PartyPair::of(g, c));
    }
    out.push_back(PartyPair::of(PartyId::cloud(), g));
    out.push_back(PartyPair::of(g, e));
    out.push_back(PartyPair::of(PartyId::client(), g));
    out.push_back(PartyPair::of(PartyId::client(), e));
    if (j < clusters) out.push_back(PartyPair::of(g, PartyId::garbler(static_cast<std::uint16_t>(j + 1))));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cloud

CloudParty::CloudParty(ModelSpec model, std::shared_ptr<const RunContext> ctx)
    : model_(std::move(model)), rc_(std::move(ctx)), seed_(SeedBook(rc_->config.seed).cloud()) {}

bool CloudParty::finished() const {
  return rc_->config.expected_sessions > 0 && done_ >= rc_->config.expected_sessions;
}

bool CloudParty::on_message(const MessageEnvelope& env, Context& ctx) {
  expect_from(env, PartyId::client());
  const RingParams& p = model_.ring;
  switch (env.kind) {
    case MsgKind::PublicKey:
      if (pk_) throw ProtocolError("public key sent twice");
      pk_ = lhe::deserialize_public_key(env.payload);
      return true;
    case MsgKind::EncMask: {
      if (!pk_) return false;
      Session& s = sessions_[env.session];
      if (s.complete) throw ProtocolError("mask for a completed session");
      ByteReader r(env.payload);
      std::size_t count;
      if (env.layer == 0) {
        if (s.c || s.next_layer != 1) throw ProtocolError("duplicate initial mask");
        count = model_.input_dim;
      } else {
        // Reply to the nonlinear layer just sent to the client.
        if (s.c || s.next_layer != env.layer + 1) return false;
        count = model_.layers.at(env.layer - 1).rows;
      }
      s.c = lhe::read_ciphertext(r, *pk_, count, p.bit_width);
      r.expect_done("enc_mask");
      advance(env.session, s, ctx);
      return true;
    }
    default:
      throw ProtocolError("cloud cannot handle " + to_string(env.kind));
  }
}

void CloudParty::advance(std::uint32_t t, Session& s, Context& ctx) {
  const RingParams& p = model_.ring;
  const std::size_t L = model_.layers.size();
  const std::size_t T = rc_->config.colluding;
  while (s.next_layer <= L) {
    const std::size_t l = s.next_layer;
    const LayerSpec& layer = model_.layers[l - 1];
    const auto j = static_cast<std::uint16_t>(rc_->cluster_of(l));
    const auto lt = static_cast<std::uint32_t>(l);

    Prg bias_rng(seed_, stream_id(t, l, kPurposeBias));
    RingVector s_l = random_vector(p, layer.rows, bias_rng);
    Prg m_rng(seed_, stream_id(t, l, kPurposeShareM));
    Prg s_rng(seed_, stream_id(t, l, kPurposeShareS));
    const ShareSet m_shares = sharing::shr(RingVector(p, layer.weights), T + 1, m_rng);
    const ShareSet s_shares = sharing::shr(s_l, T + 1, s_rng);
    for (std::size_t v = 0; v <= T; ++v) {
      ByteWriter w;
      write_ring_values(w, m_shares.shares[v]);
      write_ring_values(w, s_shares.shares[v]);
      const PartyId to = v < T ? PartyId::computing(j, static_cast<std::uint16_t>(v + 1)) : PartyId::garbler(j);
      ctx.send(to, Phase::Offline, MsgKind::ModelShare, t, lt, std::move(w).take());
    }

    Prg enc_rng(seed_, stream_id(t, l, kPurposeEncrypt));
    const lhe::Ciphertext enc_s = pk_->encrypt(s_l, enc_rng);
    lhe::Ciphertext out =
        pk_->eval_linear(layer.weights, layer.rows, layer.cols, p.bit_width, *s.c, enc_s, rc_->config.exec);
    s.s.emplace(l, std::move(s_l));
    s.c.reset();
    ++s.next_layer;
    if (layer.has_nonlinear()) {
      ctx.send(PartyId::client(), Phase::Offline, MsgKind::EncLinear, t, lt, ciphertext_payload(out));
      return;  // wait for Enc(r_{l+1})
    }
    s.c = std::move(out);
  }
  if (!model_.layers.back().has_nonlinear()) {
    ctx.send(PartyId::client(), Phase::Offline, MsgKind::EncFinalMask, t, static_cast<std::uint32_t>(L),
             ciphertext_payload(*s.c));
  }
  s.c.reset();
  s.complete = true;
  ++done_;
}

// ---------------------------------------------------------------------------
// Client

ClientParty::ClientParty(std::shared_ptr<const RunContext> ctx)
    : rc_(std::move(ctx)), seed_(SeedBook(rc_->config.seed).client()) {
  Prg keygen_rng(seed_, ~std::uint64_t{0});
  keys_ = lhe::keygen(rc_->config.he_backend, rc_->config.he_bits, keygen_rng);
  const SeedBook book(rc_->config.seed);
  for (std::size_t j = 1; j <= rc_->config.clusters; ++j) choice_masks_.emplace(j, book.choice_masks(j));
}

Prg ClientParty::stream(std::uint32_t t, std::size_t layer, std::uint8_t purpose) const {
  return Prg(seed_, stream_id(t, layer, purpose));
}

bool ClientParty::finished() const {
  return rc_->config.expected_sessions > 0 && results_.size() >= rc_->config.expected_sessions;
}

void ClientParty::start_offline(std::uint32_t t, Context& ctx) {
  if (sessions_.contains(t)) throw ProtocolError("offline phase already started for session " + std::to_string(t));
  if (!pk_sent_) {
    ctx.send(PartyId::cloud(), Phase::Offline, MsgKind::PublicKey, t, 0, keys_.pk->serialize());
    pk_sent_ = true;
  }
  Session& s = sessions_[t];
  Prg mask_rng = stream(t, 1, kPurposeMask);
  RingVector r1 = random_vector(rc_->shape.ring, rc_->shape.input_dim, mask_rng);
  Prg enc_rng = stream(t, 1, kPurposeEncrypt);
  ctx.send(PartyId::cloud(), Phase::Offline, MsgKind::EncMask, t, 0,
           ciphertext_payload(keys_.pk->encrypt(r1, enc_rng)));
  s.r.emplace(1, std::move(r1));
}

bool ClientParty::offline_ready(std::uint32_t t) const {
  auto it = sessions_.find(t);
  if (it == sessions_.end() || !it->second.c_final) return false;
  for (std::size_t l = 1; l <= rc_->layer_count(); ++l) {
    if (rc_->layer(l).has_nonlinear() && !it->second.ot_done.contains(l)) return false;
  }
  return true;
}

void ClientParty::submit_input(std::uint32_t t, const RingVector& x, Context& ctx) {
  if (x.size() != rc_->shape.input_dim || x.params() != rc_->shape.ring) {
    throw DimensionError("input does not match the model input dimension or ring");
  }
  Session& s = sessions_[t];
  if (s.input) throw ProtocolError("input already submitted for session " + std::to_string(t));
  s.input = x;
  try_send_input(t, s, ctx);
}

void ClientParty::try_send_input(std::uint32_t t, Session& s, Context& ctx) {
  if (!s.input || s.input_sent || !offline_ready(t)) return;
  const RingVector masked = ring::sub(*s.input, s.r.at(1));
  s.input_sent = true;
  s.sent_at = ctx.now();
  const auto j = static_cast<std::uint16_t>(rc_->cluster_of(1));
  ctx.send(PartyId::garbler(j), Phase::Online, MsgKind::MaskedInput, t, 1, ring_payload(masked));
}

std::optional<RingVector> ClientParty::result(std::uint32_t t) const {
  auto it = results_.find(t);
  if (it == results_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::pair<double, double>> ClientParty::timing(std::uint32_t t) const {
  auto it = sessions_.find(t);
  if (it == sessions_.end() || !results_.contains(t)) return std::nullopt;
  return std::make_pair(it->second.sent_at, it->second.result_at);
}

bool ClientParty::on_message(const MessageEnvelope& env, Context& ctx) {
  const RingParams& p = rc_->shape.ring;
  const unsigned N = p.bit_width;
  const std::uint32_t t = env.session;
  switch (env.kind) {
    case MsgKind::EncLinear: {
      expect_from(env, PartyId::cloud());
      auto it = sessions_.find(t);
      if (it == sessions_.end()) throw ProtocolError("enc_linear for unknown session");
      Session& s = it->second;
      const std::size_t l = env.layer;
      const auto& layer = rc_->layer(l);
      if (!layer.has_nonlinear()) throw ProtocolError("enc_linear for a linear layer");
      ByteReader r(env.payload);
      const lhe::Ciphertext ct = lhe::read_ciphertext(r, *keys_.pk, layer.rows, keys_.pk->plaintext_bits());
      r.expect_done("enc_linear");
      RingVector y1 = keys_.sk->decrypt(ct, p);

      Prg mask_rng = stream(t, l + 1, kPurposeMask);
      RingVector r_next = random_vector(p, layer.rows, mask_rng);
      Prg enc_rng = stream(t, l + 1, kPurposeEncrypt);
      ctx.send(PartyId::cloud(), Phase::Offline, MsgKind::EncMask, t, env.layer,
               ciphertext_payload(keys_.pk->encrypt(r_next, enc_rng)));

      // OT round 1: one masked choice bit per input bit of y1 and y2.
      const std::size_t j = rc_->cluster_of(l);
      const auto& masks = choice_masks_.at(j);
      const std::size_t count = layer.rows * 2 * N;
      std::vector<std::uint8_t> packed((count + 7) / 8, 0);
      std::size_t idx = 0;
      for (std::size_t e = 0; e < layer.rows; ++e) {
        for (unsigned g = 0; g < 2; ++g) {
          const std::uint64_t value = g == 0 ? y1[e] : r_next[e];
          for (unsigned k = 0; k < N; ++k, ++idx) {
            const std::uint64_t sid = ot_session_id(t, env.layer, e, g, k, N);
            guard_.claim(sid);
            ++guard_count_;
            const bool choice = ((value >> k) & 1U) != 0;
            if (ot3::client_round1(choice, masks.mask_bit(sid))) {
              packed[idx / 8] = static_cast<std::uint8_t>(packed[idx / 8] | (1U << (idx % 8)));
            }
          }
        }
      }
      ByteWriter w;
      w.u64(ot_session_id(t, env.layer, 0, 0, 0, N));
      w.bytes(packed);
      ctx.send(PartyId::garbler(static_cast<std::uint16_t>(j)), Phase::Offline, MsgKind::OtChoice, t, env.layer,
               std::move(w).take());

      s.y1.emplace(l, std::move(y1));
      if (l == rc_->layer_count()) s.c_final = r_next;
      s.r.emplace(l + 1, std::move(r_next));
      return true;
    }
    case MsgKind::OtMaskedLabels: {
      const std::size_t l = env.layer;
      const std::size_t j = rc_->cluster_of(l);
      expect_from(env, PartyId::garbler(static_cast<std::uint16_t>(j)));
      Session& s = sessions_.at(t);
      const auto& layer = rc_->layer(l);
      const RingVector& y1 = s.y1.at(l);
      const RingVector& y2 = s.r.at(l + 1);
      ByteReader r(env.payload);
      if (r.u64() != ot_session_id(t, env.layer, 0, 0, 0, N)) throw ProtocolError("OT session mismatch");
      ByteWriter w;
      w.u64(ot_session_id(t, env.layer, 0, 0, 0, N));
      const unsigned kappa = rc_->config.kappa;
      for (std::size_t e = 0; e < layer.rows; ++e) {
        for (unsigned g = 0; g < 2; ++g) {
          const std::uint64_t value = g == 0 ? y1[e] : y2[e];
          for (unsigned k = 0; k < N; ++k) {
            ot3::MaskedLabels blobs;
            blobs.first = Label::read(r, kappa);
            blobs.second = Label::read(r, kappa);
            ot3::client_round3(((value >> k) & 1U) != 0, blobs).write(w);
          }
        }
      }
      r.expect_done("ot_masked_labels");
      ctx.send(PartyId::evaluator(static_cast<std::uint16_t>(j)), Phase::Offline, MsgKind::OtSelected, t, env.layer,
               std::move(w).take());
      s.ot_done.insert(l);
      try_send_input(t, s, ctx);
      return true;
    }
    case MsgKind::EncFinalMask: {
      expect_from(env, PartyId::cloud());
      Session& s = sessions_.at(t);
      const auto& layer = rc_->layer(rc_->layer_count());
      ByteReader r(env.payload);
      const lhe::Ciphertext ct = lhe::read_ciphertext(r, *keys_.pk, layer.rows, keys_.pk->plaintext_bits());
      r.expect_done("enc_final_mask");
      s.c_final = keys_.sk->decrypt(ct, p);
      try_send_input(t, s, ctx);
      return true;
    }
    case MsgKind::MaskedResult: {
      const std::size_t L = rc_->layer_count();
      expect_from(env, PartyId::garbler(static_cast<std::uint16_t>(rc_->cluster_of(L))));
      Session& s = sessions_.at(t);
      if (!s.input_sent) throw ProtocolError("result for a session that never sent input");
      if (results_.contains(t)) throw ProtocolError("duplicate result");
      const RingVector v = read_ring_payload(env, p, rc_->layer(L).rows);
      results_.emplace(t, ring::add(v, *s.c_final));
      s.result_at = ctx.now();
      return true;
    }
    default:
      throw ProtocolError("client cannot handle " + to_string(env.kind));
  }
}

// ---------------------------------------------------------------------------
// Computing server

ComputingParty::ComputingParty(std::size_t cluster, std::size_t index, std::shared_ptr<const RunContext> ctx)
    : cluster_(cluster), index_(index), rc_(std::move(ctx)) {}

bool ComputingParty::finished() const {
  const auto& range = rc_->allocation.ranges.at(cluster_ - 1);
  return rc_->config.expected_sessions > 0 &&
         served_ >= rc_->config.expected_sessions * (range.last - range.first + 1);
}

bool ComputingParty::on_message(const MessageEnvelope& env, Context& ctx) {
  const RingParams& p = rc_->shape.ring;
  const auto& layer = rc_->layer(env.layer);
  if (rc_->cluster_of(env.layer) != cluster_) throw ProtocolError("layer not owned by this cluster");
  const std::pair<std::uint32_t, std::size_t> key{env.session, env.layer};
  switch (env.kind) {
    case MsgKind::ModelShare: {
      expect_from(env, PartyId::cloud());
      LayerShare share = read_share(env, layer, p);
      shares_[key] = Share{std::move(share.m), std::move(share.s)};
      return true;
    }
    case MsgKind::LayerInput: {
      const PartyId head = PartyId::garbler(static_cast<std::uint16_t>(cluster_));
      expect_from(env, head);
      auto it = shares_.find(key);
      if (it == shares_.end()) return false;
      const RingVector in = read_ring_payload(env, p, layer.cols);
      const RingVector out = kernels::matvec_sub(p, it->second.m, layer.rows, layer.cols, in, it->second.s,
                                                 rc_->config.exec);
      ctx.send(head, Phase::Online, MsgKind::ShareProduct, env.session, env.layer, ring_payload(out));
      ++served_;
      return true;
    }
    default:
      throw ProtocolError("computing server cannot handle " + to_string(env.kind));
  }
}

// ---------------------------------------------------------------------------
// Garbler

GarblerParty::GarblerParty(std::size_t cluster, std::shared_ptr<const RunContext> ctx)
    : cluster_(cluster),
      rc_(std::move(ctx)),
      seed_(SeedBook(rc_->config.seed).garbler(cluster)),
      label_masks_(SeedBook(rc_->config.seed).label_masks(cluster), rc_->config.kappa) {}

bool GarblerParty::finished() const {
  const std::uint32_t S = rc_->config.expected_sessions;
  return S > 0 && forwarded_ >= S && ot_served_.size() >= S * nonlinear_in_range(*rc_, cluster_);
}

bool GarblerParty::on_message(const MessageEnvelope& env, Context& ctx) {
  const RingParams& p = rc_->shape.ring;
  const unsigned N = p.bit_width;
  const std::uint32_t t = env.session;
  const std::size_t l = env.layer;
  const auto& range = rc_->allocation.ranges.at(cluster_ - 1);
  if (!range.contains(l)) throw ProtocolError("layer " + std::to_string(l) + " not owned by " + id().to_string());
  const auto& layer = rc_->layer(l);
  const std::pair<std::uint32_t, std::size_t> key{t, l};
  const auto cj = static_cast<std::uint16_t>(cluster_);
  switch (env.kind) {
    case MsgKind::ModelShare: {
      expect_from(env, PartyId::cloud());
      LayerShare share = read_share(env, layer, p);
      shares_[key] = Share{std::move(share.m), std::move(share.s)};
      if (layer.has_nonlinear()) {
        const std::uint64_t base = (static_cast<std::uint64_t>(t) << 40) | (static_cast<std::uint64_t>(l) << 24);
        auto garblings = gc::garble_batch(*rc_->circuit, layer.rows, seed_, base, rc_->config.kappa, rc_->config.exec);
        ByteWriter w;
        std::vector<gc::InputLabels> inputs;
        inputs.reserve(garblings.size());
        for (auto& g : garblings) {
          g.unit.write(w);
          inputs.push_back(std::move(g.inputs));
        }
        garblings_[key] = std::move(inputs);
        ctx.send(PartyId::evaluator(cj), Phase::Offline, MsgKind::GarbledCircuit, t, env.layer, std::move(w).take());
      }
      // An online session may be waiting for this share.
      if (auto it = online_.find(t); it != online_.end() && it->second.layer == l && !it->second.acc) {
        begin_layer(t, it->second, ctx);
      }
      return true;
    }
    case MsgKind::OtChoice: {
      expect_from(env, PartyId::client());
      auto it = garblings_.find(key);
      if (it == garblings_.end()) return false;
      if (ot_served_.contains(key)) throw ProtocolError("OT choices received twice");
      const auto& inputs = it->second;
      const std::size_t count = layer.rows * 2 * N;
      ByteReader r(env.payload);
      const std::uint64_t base = r.u64();
      if (base != ot_session_id(t, env.layer, 0, 0, 0, N)) throw ProtocolError("OT session mismatch");
      const auto packed = r.bytes((count + 7) / 8);
      r.expect_done("ot_choice");
      ByteWriter w;
      w.u64(base);
      std::size_t idx = 0;
      for (std::size_t e = 0; e < layer.rows; ++e) {
        for (unsigned g = 0; g < 2; ++g) {
          for (unsigned k = 0; k < N; ++k, ++idx) {
            const std::uint64_t sid = base + idx;
            guard_.claim(sid);
            const std::uint32_t wire = g == 0 ? rc_->circuit->y1_wire(k) : rc_->circuit->y2_wire(k);
            const bool masked = ((packed[idx / 8] >> (idx % 8)) & 1U) != 0;
            const ot3::Masks m = label_masks_.masks(sid);
            const ot3::MaskedLabels out = ot3::garbler_round2(masked, inputs[e].label(wire, false),
                                                              inputs[e].label(wire, true), m.u0, m.u1);
            out.first.write(w);
            out.second.write(w);
          }
        }
      }
      ot_served_.insert(key);
      ctx.send(PartyId::client(), Phase::Offline, MsgKind::OtMaskedLabels, t, env.layer, std::move(w).take());
      return true;
    }
    case MsgKind::MaskedInput:
    case MsgKind::Handoff: {
      if (l != range.first) throw ProtocolError("cluster input must arrive at its first layer");
      if (env.kind == MsgKind::MaskedInput) {
        if (cluster_ != 1) throw ProtocolError("client input must go to the first cluster");
        expect_from(env, PartyId::client());
      } else {
        expect_from(env, PartyId::garbler(static_cast<std::uint16_t>(cluster_ - 1)));
      }
      if (online_.contains(t)) throw ProtocolError("session already online at " + id().to_string());
      Online& st = online_[t];
      st.layer = l;
      st.input = read_ring_payload(env, p, layer.cols);
      begin_layer(t, st, ctx);
      return true;
    }
    case MsgKind::ShareProduct: {
      if (env.from.role != Role::Computing || env.from.cluster != cluster_ || env.from.index == 0 ||
          env.from.index > rc_->config.colluding) {
        throw ProtocolError("share product from " + env.from.to_string());
      }
      auto it = online_.find(t);
      if (it == online_.end() || it->second.layer != l || !it->second.acc) return false;
      Online& st = it->second;
      if (!st.received.insert(env.from.index).second) throw ProtocolError("duplicate share product");
      st.acc = ring::add(*st.acc, read_ring_payload(env, p, layer.rows));
      try_finish_linear(t, st, ctx);
      return true;
    }
    case MsgKind::EvalOutput: {
      expect_from(env, PartyId::evaluator(cj));
      auto it = online_.find(t);
      if (it == online_.end() || it->second.layer != l || !it->second.awaiting_eval) return false;
      after_layer(t, it->second, read_ring_payload(env, p, layer.rows), ctx);
      return true;
    }
    default:
      throw ProtocolError("garbler cannot handle " + to_string(env.kind));
  }
}

void GarblerParty::begin_layer(std::uint32_t t, Online& st, Context& ctx) {
  const std::pair<std::uint32_t, std::size_t> key{t, st.layer};
  auto it = shares_.find(key);
  if (it == shares_.end()) return;  // resumed when the share arrives
  const RingParams& p = rc_->shape.ring;
  const auto& layer = rc_->layer(st.layer);
  ctx.compute(layer_cost(*rc_, cluster_, st.layer));
  const Bytes payload = ring_payload(st.input);
  for (std::size_t v = 1; v <= rc_->config.colluding; ++v) {
    ctx.send(PartyId::computing(static_cast<std::uint16_t>(cluster_), static_cast<std::uint16_t>(v)), Phase::Online,
             MsgKind::LayerInput, t, static_cast<std::uint32_t>(st.layer), payload);
  }
  st.acc = kernels::matvec_sub(p, it->second.m, layer.rows, layer.cols, st.input, it->second.s, rc_->config.exec);
  st.received.clear();
  try_finish_linear(t, st, ctx);
}

bool GarblerParty::try_finish_linear(std::uint32_t t, Online& st, Context& ctx) {
  if (st.received.size() < rc_->config.colluding) return false;
  const auto& layer = rc_->layer(st.layer);
  RingVector w = std::move(*st.acc);  // M_l (x_l - c_l) - s_l
  if (!layer.has_nonlinear()) {
    after_layer(t, st, std::move(w), ctx);
    return true;
  }
  const auto& inputs = garblings_.at({t, st.layer});
  const unsigned N = rc_->shape.ring.bit_width;
  ByteWriter out;
  for (std::size_t e = 0; e < layer.rows; ++e) {
    for (unsigned k = 0; k < N; ++k) {
      inputs[e].label(rc_->circuit->w_wire(k), ((w[e] >> k) & 1U) != 0).write(out);
    }
  }
  st.awaiting_eval = true;
  ctx.send(PartyId::evaluator(static_cast<std::uint16_t>(cluster_)), Phase::Online, MsgKind::GarblerLabels, t,
           static_cast<std::uint32_t>(st.layer), std::move(out).take());
  return true;
}

void GarblerParty::after_layer(std::uint32_t t, Online& st, RingVector out, Context& ctx) {
  const std::size_t l = st.layer;
  shares_.erase({t, l});
  garblings_.erase({t, l});
  const auto& range = rc_->allocation.ranges.at(cluster_ - 1);
  if (l < range.last) {
    st.layer = l + 1;
    st.input = std::move(out);
    st.acc.reset();
    st.awaiting_eval = false;
    begin_layer(t, st, ctx);
    return;
  }
  if (l == rc_->layer_count()) {
    ctx.send(PartyId::client(), Phase::Online, MsgKind::MaskedResult, t, static_cast<std::uint32_t>(l),
             ring_payload(out));
  } else {
    ctx.send(PartyId::garbler(static_cast<std::uint16_t>(cluster_ + 1)), Phase::Online, MsgKind::Handoff, t,
             static_cast<std::uint32_t>(l + 1), ring_payload(out));
  }
  online_.erase(t);
  ++forwarded_;
}

// ---------------------------------------------------------------------------
// Evaluator

EvaluatorParty::EvaluatorParty(std::size_t cluster, std::shared_ptr<const RunContext> ctx)
    : cluster_(cluster),
      rc_(std::move(ctx)),
      choice_masks_(SeedBook(rc_->config.seed).choice_masks(cluster)),
      label_masks_(SeedBook(rc_->config.seed).label_masks(cluster), rc_->config.kappa) {}

bool EvaluatorParty::finished() const {
  const std::uint32_t S = rc_->config.expected_sessions;
  return S > 0 && evaluated_ >= S * nonlinear_in_range(*rc_, cluster_);
}

bool EvaluatorParty::on_message(const MessageEnvelope& env, Context& ctx) {
  const RingParams& p = rc_->shape.ring;
  const unsigned N = p.bit_width;
  const unsigned kappa = rc_->config.kappa;
  const std::size_t l = env.layer;
  if (rc_->cluster_of(l) != cluster_) throw ProtocolError("layer not owned by this cluster");
  const auto& layer = rc_->layer(l);
  if (!layer.has_nonlinear()) throw ProtocolError("evaluator message for a linear layer");
  const Key key{env.session, l};
  const PartyId garbler = PartyId::garbler(static_cast<std::uint16_t>(cluster_));
  switch (env.kind) {
    case MsgKind::GarbledCircuit: {
      expect_from(env, garbler);
      ByteReader r(env.payload);
      std::vector<gc::GarbledUnit> units;
      units.reserve(layer.rows);
      for (std::size_t e = 0; e < layer.rows; ++e) units.push_back(gc::GarbledUnit::read(r, *rc_->circuit, kappa));
      r.expect_done("garbled_circuit");
      if (!units_.emplace(key, std::move(units)).second) throw ProtocolError("garbled circuit received twice");
      return true;
    }
    case MsgKind::OtSelected: {
      expect_from(env, PartyId::client());
      const std::size_t count = layer.rows * 2 * N;
      ByteReader r(env.payload);
      const std::uint64_t base = r.u64();
      if (base != ot_session_id(env.session, env.layer, 0, 0, 0, N)) throw ProtocolError("OT session mismatch");
      std::vector<Label> labels;
      labels.reserve(count);
      for (std::size_t idx = 0; idx < count; ++idx) {
        const std::uint64_t sid = base + idx;
        const Label blob = Label::read(r, kappa);
        const ot3::Masks m = label_masks_.masks(sid);
        labels.push_back(ot3::evaluator_finish(blob, m.u0, m.u1, choice_masks_.mask_bit(sid)));
      }
      r.expect_done("ot_selected");
      if (!client_labels_.emplace(key, std::move(labels)).second) throw ProtocolError("OT labels received twice");
      return true;
    }
    case MsgKind::GarblerLabels: {
      expect_from(env, garbler);
      auto u = units_.find(key);
      auto c = client_labels_.find(key);
      if (u == units_.end() || c == client_labels_.end()) return false;
      ByteReader r(env.payload);
      std::vector<std::vector<Label>> labels(layer.rows);
      for (std::size_t e = 0; e < layer.rows; ++e) {
        auto& in = labels[e];
        in.reserve(3 * N);
        for (unsigned k = 0; k < N; ++k) in.push_back(Label::read(r, kappa));
        for (unsigned g = 0; g < 2; ++g) {
          for (unsigned k = 0; k < N; ++k) in.push_back(c->second[(e * 2 + g) * N + k]);
        }
      }
      r.expect_done("garbler_labels");
      const auto outs = gc::eval_batch(*rc_->circuit, u->second, labels, rc_->config.exec);
      ctx.send(garbler, Phase::Online, MsgKind::EvalOutput, env.session, env.layer,
               ring_payload(RingVector(p, outs)));
      units_.erase(u);
      client_labels_.erase(c);
      ++evaluated_;
      return true;
    }
    default:
      throw ProtocolError("evaluator cannot handle " + to_string(env.kind));
  }
}

// ---------------------------------------------------------------------------
// Deployment

Deployment::Deployment(const ModelSpec& model, const ProtocolConfig& config) : model_(model) {
  model_.validate();
  auto rc = std::make_shared<RunContext>();
  rc->shape = ModelShape::of(model_);
  config.validate(rc->shape);
  rc->config = config;
  std::vector<std::size_t> params;
  for (const auto& l : model_.layers) params.push_back(l.params());
  const auto profiles = config.profiles();
  const auto targets = alloc::armdi_targets(static_cast<double>(model_.total_params()), profiles);
  rc->allocation = alloc::assign_layers(params, targets);
  for (const auto& l : model_.layers) {
    if (l.has_nonlinear()) {
      rc->circuit = std::make_shared<const gc::BoolCircuit>(gc::build_nonlinear_block(model_.ring, l.activation));
      break;
    }
  }
  rc_ = std::move(rc);
}

std::shared_ptr<Party> Deployment::make_party(const PartyId& id) const {
  const std::size_t P = rc_->config.clusters;
  const std::size_t T = rc_->config.colluding;
  const bool in_cluster = id.cluster >= 1 && id.cluster <= P;
  switch (id.role) {
    case Role::Cloud:
      return std::make_shared<CloudParty>(model_, rc_);
    case Role::Client:
      return std::make_shared<ClientParty>(rc_);
    case Role::Computing:
      if (!in_cluster || id.index == 0 || id.index > T) break;
      return std::make_shared<ComputingParty>(id.cluster, id.index, rc_);
    case Role::Garbler:
      if (!in_cluster) break;
      return std::make_shared<GarblerParty>(id.cluster, rc_);
    case Role::Evaluator:
      if (!in_cluster) break;
      return std::make_shared<EvaluatorParty>(id.cluster, rc_);
  }
  throw ConfigError("party " + id.to_string() + " is not part of this deployment");
}

void Deployment::attach(Network& net) {
  if (parties_.empty()) {
    for (const auto& id : protocol_parties(rc_->config.clusters, rc_->config.colluding)) {
      auto party = make_party(id);
      if (id.role == Role::Client) client_ = std::static_pointer_cast<ClientParty>(party);
      if (id.role == Role::Cloud) cloud_ = std::static_pointer_cast<CloudParty>(party);
      parties_.push_back(std::move(party));
    }
  }
  for (const auto& party : parties_) net.add(party);
}

std::shared_ptr<Party> Deployment::party(const PartyId& id) const {
  for (const auto& p : parties_) {
    if (p->id() == id) return p;
  }
  return nullptr;
}

void Deployment::start_offline(Network& net, std::uint32_t first_session, std::uint32_t count) {
  ClientParty* client = client_.get();
  for (std::uint32_t t = first_session; t < first_session + count; ++t) {
    net.post(PartyId::client(), [client, t](Context& ctx) { client->start_offline(t, ctx); });
  }
}

void Deployment::submit_inputs(Network& net, std::uint32_t first_session, const std::vector<RingVector>& inputs) {
  ClientParty* client = client_.get();
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto t = static_cast<std::uint32_t>(first_session + i);
    net.post(PartyId::client(), [client, t, x = inputs[i]](Context& ctx) { client->submit_input(t, x, ctx); });
  }
}

TransportKind parse_transport(const std::string& name) {
  if (name == "sim") return TransportKind::Sim;
  if (name == "threaded") return TransportKind::Threaded;
  if (name == "tcp") return TransportKind::Tcp;
  throw ConfigError("unknown transport '" + name + "' (expected sim, threaded or tcp)");
}

std::string to_string(TransportKind k) {
  switch (k) {
    case TransportKind::Sim:
      return "sim";
    case TransportKind::Threaded:
      return "threaded";
    case TransportKind::Tcp:
      return "tcp";
  }
  return "?";
}

RunResult run_protocol(const ModelSpec& model, const ProtocolConfig& config, const std::vector<RingVector>& inputs,
                       const RunOptions& options) {
  Deployment d(model, config);
  return run_protocol(d, inputs, options);
}

RunResult run_protocol(Deployment& d, const std::vector<RingVector>& inputs, const RunOptions& options) {
  const auto& rc = *d.context();
  std::unique_ptr<Network> net;
  TcpNetwork* tcp = nullptr;
  SimNetwork* sim = nullptr;
  switch (options.transport) {
    case TransportKind::Sim: {
      auto n = std::make_unique<SimNetwork>(options.latency);
      sim = n.get();
      net = std::move(n);
      break;
    }
    case TransportKind::Threaded:
      net = std::make_unique<ThreadedNetwork>();
      break;
    case TransportKind::Tcp: {
      std::vector<TcpEndpoint> dir;
      for (const auto& id : protocol_parties(rc.config.clusters, rc.config.colluding)) dir.push_back({id});
      auto n = std::make_unique<TcpNetwork>(std::move(dir), protocol_channels(rc.config.clusters, rc.config.colluding));
      tcp = n.get();
      net = std::move(n);
      break;
    }
  }
  net->record_transcript(options.record_transcript);
  d.attach(*net);
  if (tcp) tcp->connect();

  const auto S = static_cast<std::uint32_t>(inputs.size());
  using clock = std::chrono::steady_clock;
  RunResult out;
  const auto t0 = clock::now();
  d.start_offline(*net, 0, S);
  net->run_until_quiescent();
  const auto t1 = clock::now();
  const double sim_offline_end = sim ? sim->makespan() : 0;
  out.offline_seconds = sim ? sim_offline_end : std::chrono::duration<double>(t1 - t0).count();
  for (std::uint32_t t = 0; t < S; ++t) {
    if (!d.client().offline_ready(t)) throw ProtocolError("offline phase did not complete for session " + std::to_string(t));
  }

  if (options.pipelined) {
    d.submit_inputs(*net, 0, inputs);
    net->run_until_quiescent();
  } else {
    for (std::uint32_t t = 0; t < S; ++t) {
      d.submit_inputs(*net, t, {inputs[t]});
      net->run_until_quiescent();
    }
  }
  const auto t2 = clock::now();
  double first_sent = 0;
  double last_result = 0;
  for (std::uint32_t t = 0; t < S; ++t) {
    auto r = d.client().result(t);
    if (!r) throw ProtocolError("no result for session " + std::to_string(t));
    out.outputs.push_back(std::move(*r));
    const auto timing = *d.client().timing(t);
    first_sent = t == 0 ? timing.first : std::min(first_sent, timing.first);
    last_result = std::max(last_result, timing.second);
  }
  out.online_seconds = sim ? last_result - first_sent : std::chrono::duration<double>(t2 - t1).count();
  out.ledger = net->ledger().report();
  out.allocation = rc.allocation;
  if (options.record_transcript) out.transcript = net->transcript();
  out.ot_sessions = d.client().ot_sessions();
  out.he_element_bytes = d.client().public_key().element_bytes();
  if (rc.circuit) {
    Prg probe(seed_from_u64(0), 0);
    out.gc_unit_bytes = gc::garble(*rc.circuit, probe, rc.config.kappa).unit.byte_size();
  }
  return out;
}

}  // namespace pmdi

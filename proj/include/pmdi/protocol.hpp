// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <vector>

#include "pmdi/alloc.hpp"
#include "pmdi/gc.hpp"
#include "pmdi/lhe.hpp"
#include "pmdi/model.hpp"
#include "pmdi/ot3.hpp"
#include "pmdi/prg.hpp"
#include "pmdi/ring.hpp"
#include "pmdi/transport.hpp"

namespace pmdi {

class DebugOracle;

struct ProtocolConfig {
  unsigned kappa = 128;
  std::size_t clusters = 1;   // P
  std::size_t colluding = 1;  // T computing servers per cluster
  std::vector<double> gamma;  // per-parameter delay per cluster; empty means all 1
  std::uint64_t seed = 1;
  lhe::Backend he_backend = lhe::Backend::Paillier;
  unsigned he_bits = 2048;
  Exec exec = Exec::Parallel;
  /// Simulated compute charged at a garbler per online layer: layer_delay_s, plus
  /// gamma_j * params when gamma_delay is set.
  double layer_delay_s = 0;
  bool gamma_delay = false;
  /// Sessions each party expects; only consulted by Party::finished().
  std::uint32_t expected_sessions = 0;

  /// Throws ConfigError.
  void validate(const ModelShape& shape) const;
  std::vector<alloc::ClusterProfile> profiles() const;
};

/// Run-wide seeds. Pairwise seeds model the out-of-band provisioning of the
/// client/evaluator and garbler/evaluator PRG seeds.
struct SeedBook {
  Seed master{};

  explicit SeedBook(std::uint64_t seed) : master(seed_from_u64(seed)) {}
  Seed client() const { return derive_seed(master, "client"); }
  Seed cloud() const { return derive_seed(master, "cloud"); }
  Seed garbler(std::size_t j) const { return derive_seed(master, "garbler/" + std::to_string(j)); }
  Seed choice_masks(std::size_t j) const { return derive_seed(master, "ot-choice/" + std::to_string(j)); }
  Seed label_masks(std::size_t j) const { return derive_seed(master, "ot-labels/" + std::to_string(j)); }
};

/// OT session id: session << 40 | layer << 28 | ((element * 2 + group) * N + bit).
/// group 0 is y1 = M_l c_l + s_l, group 1 is y2 = r_{l+1}.
std::uint64_t ot_session_id(std::uint32_t session, std::uint32_t layer, std::size_t element, unsigned group,
                            unsigned bit, unsigned ring_bits);

/// Pairs of parties that exchange messages for a (P, T) deployment.
std::vector<PartyPair> protocol_channels(std::size_t clusters, std::size_t colluding);
std::vector<PartyId> protocol_parties(std::size_t clusters, std::size_t colluding);

/// Public context shared by all edge parties and the client.
struct RunContext {
  ModelShape shape;
  alloc::Allocation allocation;
  ProtocolConfig config;
  std::shared_ptr<const gc::BoolCircuit> circuit;  // null when the model has no nonlinear layer

  std::size_t cluster_of(std::size_t layer) const { return allocation.cluster_of(layer) + 1; }
  const ModelShape::Layer& layer(std::size_t l) const { return shape.layers.at(l - 1); }
  std::size_t layer_count() const noexcept { return shape.layers.size(); }
};

class CloudParty final : public Party {
 public:
  CloudParty(ModelSpec model, std::shared_ptr<const RunContext> ctx);
  PartyId id() const override { return PartyId::cloud(); }
  bool finished() const override;
  std::uint32_t sessions_done() const noexcept { return done_; }

 protected:
  bool on_message(const MessageEnvelope& env, Context& ctx) override;

 private:
  friend class DebugOracle;
  struct Session {
    std::size_t next_layer = 1;  // layer awaiting processing
    std::optional<lhe::Ciphertext> c;
    std::map<std::size_t, RingVector> s;  // s_l, kept for the debug oracle
    bool complete = false;
  };
  void advance(std::uint32_t t, Session& s, Context& ctx);

  ModelSpec model_;
  std::shared_ptr<const RunContext> rc_;
  Seed seed_;
  std::shared_ptr<const lhe::PublicKey> pk_;
  std::map<std::uint32_t, Session> sessions_;
  std::uint32_t done_ = 0;
};

class ClientParty final : public Party {
 public:
  explicit ClientParty(std::shared_ptr<const RunContext> ctx);
  PartyId id() const override { return PartyId::client(); }
  bool finished() const override;

  /// Local events.
  void start_offline(std::uint32_t session, Context& ctx);
  /// Queues an input; it is sent as soon as the session's offline part is done.
  void submit_input(std::uint32_t session, const RingVector& x, Context& ctx);

  bool offline_ready(std::uint32_t session) const;
  std::optional<RingVector> result(std::uint32_t session) const;
  std::size_t result_count() const noexcept { return results_.size(); }
  /// Times at which the input was sent and the result arrived.
  std::optional<std::pair<double, double>> timing(std::uint32_t session) const;
  std::size_t ot_sessions() const noexcept { return guard_count_; }
  const lhe::PublicKey& public_key() const { return *keys_.pk; }

 protected:
  bool on_message(const MessageEnvelope& env, Context& ctx) override;

 private:
  friend class DebugOracle;
  struct Session {
    std::map<std::size_t, RingVector> r;   // r_1 at key 1, r_{l+1} at key l+1
    std::map<std::size_t, RingVector> y1;  // decrypted M_l c_l + s_l per nonlinear l
    std::set<std::size_t> ot_done;         // nonlinear layers whose labels reached the evaluator
    std::optional<RingVector> c_final;     // c_{L+1}
    std::optional<RingVector> input;
    bool input_sent = false;
    double sent_at = 0;
    double result_at = 0;
  };
  void try_send_input(std::uint32_t t, Session& s, Context& ctx);
  Prg stream(std::uint32_t t, std::size_t layer, std::uint8_t purpose) const;

  std::shared_ptr<const RunContext> rc_;
  Seed seed_;
  lhe::KeyPair keys_;
  bool pk_sent_ = false;
  std::map<std::size_t, ot3::ChoiceMaskStream> choice_masks_;  // per cluster
  ot3::SessionGuard guard_;
  std::size_t guard_count_ = 0;
  std::map<std::uint32_t, Session> sessions_;
  std::map<std::uint32_t, RingVector> results_;
};

class ComputingParty final : public Party {
 public:
  ComputingParty(std::size_t cluster, std::size_t index, std::shared_ptr<const RunContext> ctx);
  PartyId id() const override {
    return PartyId::computing(static_cast<std::uint16_t>(cluster_), static_cast<std::uint16_t>(index_));
  }
  bool finished() const override;

 protected:
  bool on_message(const MessageEnvelope& env, Context& ctx) override;

 private:
  friend class DebugOracle;
  struct Share {
    std::vector<std::uint64_t> m;
    RingVector s;
  };
  std::size_t cluster_;
  std::size_t index_;
  std::shared_ptr<const RunContext> rc_;
  std::map<std::pair<std::uint32_t, std::size_t>, Share> shares_;
  std::size_t served_ = 0;
};

class GarblerParty final : public Party {
 public:
  GarblerParty(std::size_t cluster, std::shared_ptr<const RunContext> ctx);
  PartyId id() const override { return PartyId::garbler(static_cast<std::uint16_t>(cluster_)); }
  bool finished() const override;

 protected:
  bool on_message(const MessageEnvelope& env, Context& ctx) override;

 private:
  friend class DebugOracle;
  struct Share {
    std::vector<std::uint64_t> m;
    RingVector s;
  };
  struct Online {
    std::size_t layer = 0;
    RingVector input;  // x_l - c_l
    std::optional<RingVector> acc;  // running sum of share products
    std::set<std::size_t> received;  // computing indices heard from
    bool awaiting_eval = false;
  };
  void begin_layer(std::uint32_t t, Online& st, Context& ctx);
  bool try_finish_linear(std::uint32_t t, Online& st, Context& ctx);
  void after_layer(std::uint32_t t, Online& st, RingVector out, Context& ctx);

  std::size_t cluster_;
  std::shared_ptr<const RunContext> rc_;
  Seed seed_;
  ot3::LabelMaskStream label_masks_;
  ot3::SessionGuard guard_;
  std::map<std::pair<std::uint32_t, std::size_t>, Share> shares_;
  std::map<std::pair<std::uint32_t, std::size_t>, std::vector<gc::InputLabels>> garblings_;
  std::set<std::pair<std::uint32_t, std::size_t>> ot_served_;
  std::map<std::uint32_t, Online> online_;
  std::size_t forwarded_ = 0;
};

class EvaluatorParty final : public Party {
 public:
  EvaluatorParty(std::size_t cluster, std::shared_ptr<const RunContext> ctx);
  PartyId id() const override { return PartyId::evaluator(static_cast<std::uint16_t>(cluster_)); }
  bool finished() const override;

 protected:
  bool on_message(const MessageEnvelope& env, Context& ctx) override;

 private:
  friend class DebugOracle;
  using Key = std::pair<std::uint32_t, std::size_t>;
  std::size_t cluster_;
  std::shared_ptr<const RunContext> rc_;
  ot3::ChoiceMaskStream choice_masks_;
  ot3::LabelMaskStream label_masks_;
  std::map<Key, std::vector<gc::GarbledUnit>> units_;
  std::map<Key, std::vector<Label>> client_labels_;  // per element: y1 bits then y2 bits
  std::size_t evaluated_ = 0;
};

/// All parties of one run, wired to a network.
class Deployment {
 public:
  Deployment(const ModelSpec& model, const ProtocolConfig& config);

  const alloc::Allocation& allocation() const noexcept { return rc_->allocation; }
  std::shared_ptr<const RunContext> context() const { return rc_; }

  /// Builds a single party, e.g. for a one-party-per-process run.
  std::shared_ptr<Party> make_party(const PartyId& id) const;
  /// Builds every party and registers them with `net`.
  void attach(Network& net);

  void start_offline(Network& net, std::uint32_t first_session, std::uint32_t count);
  void submit_inputs(Network& net, std::uint32_t first_session, const std::vector<RingVector>& inputs);

  ClientParty& client() const { return *client_; }
  CloudParty& cloud() const { return *cloud_; }
  const std::vector<std::shared_ptr<Party>>& parties() const noexcept { return parties_; }
  std::shared_ptr<Party> party(const PartyId& id) const;

 private:
  ModelSpec model_;
  std::shared_ptr<RunContext> rc_;
  std::vector<std::shared_ptr<Party>> parties_;
  std::shared_ptr<ClientParty> client_;
  std::shared_ptr<CloudParty> cloud_;
};

enum class TransportKind { Sim, Threaded, Tcp };
TransportKind parse_transport(const std::string& name);
std::string to_string(TransportKind k);

struct RunOptions {
  TransportKind transport = TransportKind::Sim;
  LatencyModel latency;
  /// When false, each input waits for the previous result before it is sent.
  bool pipelined = true;
  bool record_transcript = false;
};

struct RunResult {
  std::vector<RingVector> outputs;
  LedgerReport ledger;
  alloc::Allocation allocation;
  std::vector<MessageEnvelope> transcript;  // only with record_transcript
  double offline_seconds = 0;  // simulated on Sim, wall clock otherwise
  double online_seconds = 0;   // makespan of the online phase
  std::size_t ot_sessions = 0;
  std::size_t he_element_bytes = 0;   // N_enc / 8
  std::size_t gc_unit_bytes = 0;      // |GC| / 8 for one element, 0 without nonlinear layers
};

/// Runs the offline phase for inputs.size() sessions to quiescence, then the online phase.
RunResult run_protocol(const ModelSpec& model, const ProtocolConfig& config, const std::vector<RingVector>& inputs,
                       const RunOptions& options = {});

/// Same, but keeps the deployment alive so tests can inspect party state.
RunResult run_protocol(Deployment& deployment, const std::vector<RingVector>& inputs, const RunOptions& options);

}  // namespace pmdi
